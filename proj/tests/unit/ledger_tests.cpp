// One-shot grant ledger: issuance, single consumption, failure preference,
// journal durability across reload, and the owner-side issue channel.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include "provgate/grant.hpp"
#include "provgate/runtime.hpp"

using namespace provgate;

namespace {

const PrincipalDevice kOwnerPair{"owner", "owner-device"};
const PrincipalDevice kMalloryPair{"mallory", "mallory-phone"};
constexpr char kMalloryKeyHex[] =
    "9c1e4f6a0b2d8e7c5a3f1908d6b4e2c0a8f7d5b3e1c9a70654231f0e8d6c4b2a";

std::string digest_of(char c) { return std::string(64, c); }

Grant make_grant(std::mt19937_64& rng, const std::string& digest, Tick expiry,
                 const PrincipalDevice& issuer = kOwnerPair,
                 const std::string& key = kOwnerIssuerKeyHex) {
  Grant g;
  g.digest_hex = digest;
  g.nonce_hex = random_nonce_hex(rng);
  g.expiry = expiry;
  g.issuer = issuer;
  g.authenticator_hex = grant_mac_hex(key, g.digest_hex, g.nonce_hex, expiry);
  return g;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ledger-test-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("issue then consume exactly once") {
  std::mt19937_64 rng(1);
  auto ledger = NonceLedger::in_memory();
  Grant g = make_grant(rng, digest_of('a'), 50);
  CHECK_FALSE(ledger->issue(g).has_value());
  CHECK(ledger->live_grant_count() == 1);

  auto peeked = ledger->peek(digest_of('a'), kOwnerPair, TrustSet::owner_only(), 10);
  CHECK(peeked.ok);
  CHECK_FALSE(ledger->nonce_consumed(g.nonce_hex));  // peek never spends

  auto res = ledger->attest_and_consume(digest_of('a'), kOwnerPair,
                                        TrustSet::owner_only(), 10);
  REQUIRE(res.ok);
  CHECK(res.grant->nonce_hex == g.nonce_hex);
  CHECK(ledger->nonce_consumed(g.nonce_hex));
  CHECK(ledger->live_grant_count() == 0);
  REQUIRE(ledger->consume_records().size() == 1);
  CHECK(ledger->consume_records()[0].digest_hex == digest_of('a'));

  auto again = ledger->attest_and_consume(digest_of('a'), kOwnerPair,
                                          TrustSet::owner_only(), 10);
  CHECK_FALSE(again.ok);
  CHECK(again.failure == AttestFailure::Consumed);
}

TEST_CASE("issuance rejects malformed and duplicate rows") {
  std::mt19937_64 rng(2);
  auto ledger = NonceLedger::in_memory();
  Grant bad_digest = make_grant(rng, "xyz", 50);
  REQUIRE(ledger->issue(bad_digest).has_value());
  CHECK(ledger->issue(bad_digest)->find("digest") != std::string::npos);

  Grant g = make_grant(rng, digest_of('b'), 50);
  CHECK_FALSE(ledger->issue(g).has_value());
  Grant dup = g;  // same nonce again
  auto err = ledger->issue(dup);
  REQUIRE(err.has_value());
  CHECK(err->find("nonce") != std::string::npos);

  Grant bad_nonce = make_grant(rng, digest_of('b'), 50);
  bad_nonce.nonce_hex = "1234";
  CHECK(ledger->issue(bad_nonce).has_value());
}

TEST_CASE("expiry boundary: valid strictly before, dead at the tick") {
  std::mt19937_64 rng(3);
  auto ledger = NonceLedger::in_memory();
  Grant g = make_grant(rng, digest_of('c'), 100);
  REQUIRE_FALSE(ledger->issue(g).has_value());

  CHECK(ledger->peek(digest_of('c'), kOwnerPair, TrustSet::owner_only(), 99).ok);
  auto at = ledger->peek(digest_of('c'), kOwnerPair, TrustSet::owner_only(), 100);
  CHECK_FALSE(at.ok);
  CHECK(at.failure == AttestFailure::Expired);
  auto past = ledger->peek(digest_of('c'), kOwnerPair, TrustSet::owner_only(), 500);
  CHECK(past.failure == AttestFailure::Expired);
  CHECK_FALSE(ledger->nonce_consumed(g.nonce_hex));
}

TEST_CASE("issuer must be the owner pairing and trusted") {
  std::mt19937_64 rng(4);
  auto ledger = NonceLedger::in_memory();
  Grant g = make_grant(rng, digest_of('d'), 100, kMalloryPair, kMalloryKeyHex);
  REQUIRE_FALSE(ledger->issue(g).has_value());

  // Wrong pairing for the acting owner.
  auto r = ledger->attest_and_consume(digest_of('d'), kOwnerPair,
                                      TrustSet::owner_only(), 10);
  CHECK_FALSE(r.ok);
  CHECK(r.failure == AttestFailure::IssuerMismatch);

  // Right pairing but the pairing is not trusted.
  auto r2 = ledger->attest_and_consume(digest_of('d'), kMalloryPair,
                                       TrustSet::owner_only(), 10);
  CHECK_FALSE(r2.ok);
  CHECK(r2.failure == AttestFailure::IssuerMismatch);

  // Trusting the pairing makes the same grant usable.
  TrustSet wide = TrustSet::owner_only();
  wide.add(kMalloryPair);
  auto r3 = ledger->attest_and_consume(digest_of('d'), kMalloryPair, wide, 10);
  CHECK(r3.ok);
}

TEST_CASE("failure preference: consumed beats expired beats issuer beats digest") {
  std::mt19937_64 rng(5);
  auto ledger = NonceLedger::in_memory();

  // Only a wrong-digest grant: DigestMismatch.
  Grant other = make_grant(rng, digest_of('0'), 100);
  REQUIRE_FALSE(ledger->issue(other).has_value());
  CHECK(ledger->peek(digest_of('e'), kOwnerPair, TrustSet::owner_only(), 10)
            .failure == AttestFailure::DigestMismatch);

  // Add a right-digest wrong-issuer grant: IssuerMismatch outranks it.
  Grant foreign = make_grant(rng, digest_of('e'), 100, kMalloryPair,
                             kMalloryKeyHex);
  REQUIRE_FALSE(ledger->issue(foreign).has_value());
  CHECK(ledger->peek(digest_of('e'), kOwnerPair, TrustSet::owner_only(), 10)
            .failure == AttestFailure::IssuerMismatch);

  // Add an expired owner grant: Expired outranks IssuerMismatch.
  Grant stale = make_grant(rng, digest_of('e'), 5);
  REQUIRE_FALSE(ledger->issue(stale).has_value());
  CHECK(ledger->peek(digest_of('e'), kOwnerPair, TrustSet::owner_only(), 10)
            .failure == AttestFailure::Expired);

  // Consume a live one, then: Consumed outranks everything.
  Grant live = make_grant(rng, digest_of('e'), 100);
  REQUIRE_FALSE(ledger->issue(live).has_value());
  REQUIRE(ledger
              ->attest_and_consume(digest_of('e'), kOwnerPair,
                                   TrustSet::owner_only(), 10)
              .ok);
  CHECK(ledger->peek(digest_of('e'), kOwnerPair, TrustSet::owner_only(), 10)
            .failure == AttestFailure::Consumed);
}

TEST_CASE("a fully valid grant wins even among failing siblings") {
  std::mt19937_64 rng(6);
  auto ledger = NonceLedger::in_memory();
  Grant stale = make_grant(rng, digest_of('f'), 5);
  Grant live = make_grant(rng, digest_of('f'), 100);
  REQUIRE_FALSE(ledger->issue(stale).has_value());
  REQUIRE_FALSE(ledger->issue(live).has_value());
  auto r = ledger->attest_and_consume(digest_of('f'), kOwnerPair,
                                      TrustSet::owner_only(), 10);
  REQUIRE(r.ok);
  CHECK(r.grant->nonce_hex == live.nonce_hex);
  CHECK_FALSE(ledger->nonce_consumed(stale.nonce_hex));
}

TEST_CASE("consume journals before acknowledging; write failure spends nothing") {
  std::mt19937_64 rng(7);
  auto grants = std::make_unique<MemoryJournal>();
  auto consumed = std::make_unique<MemoryJournal>();
  MemoryJournal* consumed_raw = consumed.get();
  NonceLedger ledger(std::move(grants), std::move(consumed));

  Grant g = make_grant(rng, digest_of('1'), 100);
  REQUIRE_FALSE(ledger.issue(g).has_value());
  consumed_raw->fail_writes = true;
  auto r = ledger.attest_and_consume(digest_of('1'), kOwnerPair,
                                     TrustSet::owner_only(), 10);
  CHECK_FALSE(r.ok);
  CHECK(r.failure == AttestFailure::WriteFailure);
  CHECK_FALSE(ledger.nonce_consumed(g.nonce_hex));
  CHECK(ledger.live_grant_count() == 1);

  consumed_raw->fail_writes = false;
  CHECK(ledger
            .attest_and_consume(digest_of('1'), kOwnerPair,
                                TrustSet::owner_only(), 10)
            .ok);
}

TEST_CASE("issuance refuses when the grant journal cannot be written") {
  std::mt19937_64 rng(8);
  auto grants = std::make_unique<MemoryJournal>();
  grants->fail_writes = true;
  NonceLedger ledger(std::move(grants), std::make_unique<MemoryJournal>());
  Grant g = make_grant(rng, digest_of('2'), 100);
  auto err = ledger.issue(g);
  REQUIRE(err.has_value());
  CHECK(err->find("journal") != std::string::npos);
  CHECK(ledger.live_grant_count() == 0);
}

TEST_CASE("directory-backed ledger survives reload with spent nonces spent") {
  std::mt19937_64 rng(9);
  TempDir dir;
  std::string nonce1;
  {
    auto ledger = NonceLedger::at_directory(dir.path.string());
    Grant g1 = make_grant(rng, digest_of('3'), 100);
    Grant g2 = make_grant(rng, digest_of('4'), 100);
    Grant g3 = make_grant(rng, digest_of('5'), 100);
    REQUIRE_FALSE(ledger->issue(g1).has_value());
    REQUIRE_FALSE(ledger->issue(g2).has_value());
    REQUIRE_FALSE(ledger->issue(g3).has_value());
    auto r = ledger->attest_and_consume(digest_of('3'), kOwnerPair,
                                        TrustSet::owner_only(), 10);
    REQUIRE(r.ok);
    nonce1 = r.grant->nonce_hex;
  }
  {
    auto reloaded = NonceLedger::at_directory(dir.path.string());
    CHECK(reloaded->live_grant_count() == 2);
    CHECK(reloaded->nonce_consumed(nonce1));
    CHECK(reloaded->consume_records().size() == 1);
    // The spent grant stays spent; the others still work.
    CHECK(reloaded
              ->attest_and_consume(digest_of('3'), kOwnerPair,
                                   TrustSet::owner_only(), 10)
              .failure == AttestFailure::Consumed);
    CHECK(reloaded
              ->attest_and_consume(digest_of('4'), kOwnerPair,
                                   TrustSet::owner_only(), 10)
              .ok);
  }
}

TEST_CASE("reload with issuer keys drops rows whose authenticator fails") {
  std::mt19937_64 rng(10);
  TempDir dir;
  {
    auto ledger = NonceLedger::at_directory(dir.path.string());
    Grant ok = make_grant(rng, digest_of('6'), 100);
    Grant forged = make_grant(rng, digest_of('7'), 100);
    forged.authenticator_hex = std::string(64, '0');
    REQUIRE_FALSE(ledger->issue(ok).has_value());
    REQUIRE_FALSE(ledger->issue(forged).has_value());
  }
  auto reloaded = NonceLedger::at_directory(dir.path.string());
  CHECK(reloaded->live_grant_count() == 2);  // no keys, no filtering
  std::map<PrincipalDevice, std::string> keys{{kOwnerPair, kOwnerIssuerKeyHex}};
  reloaded->reload(&keys);
  CHECK(reloaded->live_grant_count() == 1);
  CHECK(reloaded->live_grants()[0].digest_hex == digest_of('6'));
}

TEST_CASE("grant mac binds key, digest, nonce and expiry") {
  std::string mac = grant_mac_hex(kOwnerIssuerKeyHex, digest_of('8'),
                                  std::string(32, '1'), 77);
  CHECK(mac == grant_mac_hex(kOwnerIssuerKeyHex, digest_of('8'),
                             std::string(32, '1'), 77));
  CHECK(mac != grant_mac_hex(kMalloryKeyHex, digest_of('8'),
                             std::string(32, '1'), 77));
  CHECK(mac != grant_mac_hex(kOwnerIssuerKeyHex, digest_of('9'),
                             std::string(32, '1'), 77));
  CHECK(mac != grant_mac_hex(kOwnerIssuerKeyHex, digest_of('8'),
                             std::string(32, '2'), 77));
  CHECK(mac != grant_mac_hex(kOwnerIssuerKeyHex, digest_of('8'),
                             std::string(32, '1'), 78));
}

TEST_CASE("issue channel derives the issuer from which key verifies") {
  auto ledger = NonceLedger::in_memory();
  TrustSet trust = TrustSet::owner_only();
  trust.add(kMalloryPair);
  CompanionChannel channel(
      {{kOwnerPair, kOwnerIssuerKeyHex}, {kMalloryPair, kMalloryKeyHex}},
      &trust, ledger.get());

  std::string nonce(32, 'a');
  std::string mac = grant_mac_hex(kMalloryKeyHex, digest_of('a'), nonce, 90);
  auto out = channel.issue(digest_of('a'), nonce, 90, mac);
  REQUIRE(out.accepted);
  REQUIRE(out.issuer.has_value());
  CHECK(*out.issuer == kMalloryPair);  // identity from the verifying key
  REQUIRE(ledger->live_grant_count() == 1);
  CHECK(ledger->live_grants()[0].issuer == kMalloryPair);

  auto bad = channel.issue(digest_of('b'), std::string(32, 'b'), 90,
                           std::string(64, 'f'));
  CHECK_FALSE(bad.accepted);
  CHECK(bad.error.find("authenticator") != std::string::npos);
}

TEST_CASE("issue channel refuses untrusted issuers by name") {
  auto ledger = NonceLedger::in_memory();
  TrustSet trust = TrustSet::owner_only();  // mallory absent
  CompanionChannel channel({{kMalloryPair, kMalloryKeyHex}}, &trust,
                           ledger.get());
  std::string nonce(32, 'c');
  std::string mac = grant_mac_hex(kMalloryKeyHex, digest_of('c'), nonce, 90);
  auto out = channel.issue(digest_of('c'), nonce, 90, mac);
  CHECK_FALSE(out.accepted);
  CHECK(out.error.find("not trusted") != std::string::npos);
  CHECK(ledger->live_grant_count() == 0);
}

TEST_CASE("concurrent consumers on one grant: exactly one wins") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    auto ledger = NonceLedger::in_memory();
    Grant g = make_grant(rng, digest_of('d'), 100);
    REQUIRE_FALSE(ledger->issue(g).has_value());

    constexpr int kThreads = 16;
    std::atomic<int> ready{0};
    std::atomic<bool> go{false};
    std::atomic<int> wins{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < kThreads; ++t) {
      pool.emplace_back([&] {
        ready.fetch_add(1);
        while (!go.load()) {
        }
        auto r = ledger->attest_and_consume(digest_of('d'), kOwnerPair,
                                            TrustSet::owner_only(), 10);
        if (r.ok) wins.fetch_add(1);
      });
    }
    while (ready.load() < kThreads) {
    }
    go.store(true);
    for (auto& th : pool) th.join();
    CHECK(wins.load() == 1);
    CHECK(ledger->consume_records().size() == 1);
  }
}
