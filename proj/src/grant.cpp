#include "provgate/grant.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "provgate/canonical.hpp"
#include "provgate/hash.hpp"

namespace provgate {

namespace {

bool is_hex(const std::string& s, std::size_t want) {
  if (s.size() != want) return false;
  for (char c : s)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

std::string mac_message(const std::string& digest_hex, const std::string& nonce_hex,
                        Tick expiry) {
  return digest_hex + "\n" + nonce_hex + "\n" + std::to_string(expiry);
}

}  // namespace

Value Grant::to_json() const {
  return Value{{"digest", digest_hex},
               {"nonce", nonce_hex},
               {"expiry", expiry},
               {"issuer", issuer.to_json()},
               {"mac", authenticator_hex}};
}

std::optional<Grant> Grant::from_json(const Value& v) {
  try {
    Grant g;
    g.digest_hex = v.at("digest").get<std::string>();
    g.nonce_hex = v.at("nonce").get<std::string>();
    g.expiry = v.at("expiry").get<Tick>();
    g.issuer = PrincipalDevice::from_json(v.at("issuer"));
    g.authenticator_hex = v.at("mac").get<std::string>();
    return g;
  } catch (...) {
    return std::nullopt;
  }
}

bool FileJournal::append(const std::string& line) {
  std::ofstream f(path_, std::ios::app | std::ios::binary);
  if (!f) return false;
  f << line << '\n';
  f.flush();
  return static_cast<bool>(f);
}

std::vector<std::string> FileJournal::read_all() {
  std::vector<std::string> out;
  std::ifstream f(path_, std::ios::binary);
  if (!f) return out;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

NonceLedger::NonceLedger(std::unique_ptr<Journal> grants,
                         std::unique_ptr<Journal> consumed)
    : grants_journal_(std::move(grants)), consumed_journal_(std::move(consumed)) {}

std::unique_ptr<NonceLedger> NonceLedger::in_memory() {
  return std::make_unique<NonceLedger>(std::make_unique<MemoryJournal>(),
                                       std::make_unique<MemoryJournal>());
}

std::unique_ptr<NonceLedger> NonceLedger::at_directory(const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto ledger = std::make_unique<NonceLedger>(
      std::make_unique<FileJournal>(dir + "/grants.journal"),
      std::make_unique<FileJournal>(dir + "/consumed.journal"));
  ledger->reload();
  return ledger;
}

std::optional<std::string> NonceLedger::issue(const Grant& g) {
  if (!is_hex(g.digest_hex, 64)) return "malformed digest";
  if (!is_hex(g.nonce_hex, 32)) return "malformed nonce";
  std::lock_guard<std::mutex> lock(mu_);
  if (nonces_seen_.count(g.nonce_hex)) return "duplicate nonce";
  if (!grants_journal_->append(g.to_json().dump()))
    return "grant journal write failure";
  nonces_seen_.insert(g.nonce_hex);
  grants_.push_back(g);
  return std::nullopt;
}

// Preference order when several grants carry the digest: a fully valid one
// wins; otherwise report the most specific failure (consumed > expired >
// issuer) so replay attempts read as replays, not as stale grants.
AttestResult NonceLedger::evaluate_locked(const std::string& digest_hex,
                                          const PrincipalDevice& owner,
                                          const TrustSet& trust, Tick now,
                                          const Grant** winner) const {
  AttestResult r;
  bool saw_consumed = false, saw_expired = false, saw_issuer = false;
  const Grant* consumed_grant = nullptr;
  const Grant* expired_grant = nullptr;
  const Grant* issuer_grant = nullptr;
  for (const Grant& g : grants_) {
    if (g.digest_hex != digest_hex) continue;
    if (consumed_.count(g.nonce_hex)) {
      saw_consumed = true;
      consumed_grant = &g;
      continue;
    }
    if (now >= g.expiry) {
      saw_expired = true;
      expired_grant = &g;
      continue;
    }
    if (!(g.issuer == owner) || !trust.contains_pair(g.issuer)) {
      saw_issuer = true;
      issuer_grant = &g;
      continue;
    }
    r.ok = true;
    r.grant = g;
    if (winner) *winner = &g;
    return r;
  }
  if (saw_consumed) {
    r.failure = AttestFailure::Consumed;
    if (consumed_grant) r.grant = *consumed_grant;
  } else if (saw_expired) {
    r.failure = AttestFailure::Expired;
    if (expired_grant) r.grant = *expired_grant;
  } else if (saw_issuer) {
    r.failure = AttestFailure::IssuerMismatch;
    if (issuer_grant) r.grant = *issuer_grant;
  } else {
    r.failure = AttestFailure::DigestMismatch;
  }
  return r;
}

AttestResult NonceLedger::peek(const std::string& digest_hex,
                               const PrincipalDevice& owner, const TrustSet& trust,
                               Tick now) const {
  std::lock_guard<std::mutex> lock(mu_);
  return evaluate_locked(digest_hex, owner, trust, now, nullptr);
}

AttestResult NonceLedger::attest_and_consume(const std::string& digest_hex,
                                             const PrincipalDevice& owner,
                                             const TrustSet& trust, Tick now) {
  std::lock_guard<std::mutex> lock(mu_);
  const Grant* winner = nullptr;
  AttestResult r = evaluate_locked(digest_hex, owner, trust, now, &winner);
  if (!r.ok) return r;
  // Journal the consumption *before* acknowledging it; if the journal
  // cannot take the record the consume did not happen.
  std::ostringstream line;
  line << winner->nonce_hex << ' ' << winner->digest_hex << ' ' << now;
  if (!consumed_journal_->append(line.str())) {
    AttestResult fail;
    fail.failure = AttestFailure::WriteFailure;
    return fail;
  }
  consumed_.insert(winner->nonce_hex);
  consume_records_.push_back({winner->nonce_hex, winner->digest_hex, now});
  return r;
}

void NonceLedger::reload(const std::map<PrincipalDevice, std::string>* issuer_keys) {
  std::lock_guard<std::mutex> lock(mu_);
  grants_.clear();
  nonces_seen_.clear();
  consumed_.clear();
  consume_records_.clear();
  for (const std::string& line : grants_journal_->read_all()) {
    Value v = Value::parse(line, nullptr, false);
    if (v.is_discarded()) continue;
    std::optional<Grant> g = Grant::from_json(v);
    if (!g) continue;
    if (issuer_keys) {
      auto key = issuer_keys->find(g->issuer);
      if (key == issuer_keys->end()) continue;
      if (grant_mac_hex(key->second, g->digest_hex, g->nonce_hex, g->expiry) !=
          g->authenticator_hex)
        continue;
    }
    if (nonces_seen_.insert(g->nonce_hex).second) grants_.push_back(*g);
  }
  for (const std::string& line : consumed_journal_->read_all()) {
    std::istringstream in(line);
    ConsumeRecord rec;
    if (in >> rec.nonce_hex >> rec.digest_hex >> rec.tick) {
      consumed_.insert(rec.nonce_hex);
      consume_records_.push_back(rec);
    }
  }
}

std::size_t NonceLedger::live_grant_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t n = 0;
  for (const Grant& g : grants_)
    if (!consumed_.count(g.nonce_hex)) ++n;
  return n;
}

std::vector<Grant> NonceLedger::live_grants() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Grant> out;
  for (const Grant& g : grants_)
    if (!consumed_.count(g.nonce_hex)) out.push_back(g);
  return out;
}

bool NonceLedger::nonce_consumed(const std::string& nonce_hex) const {
  std::lock_guard<std::mutex> lock(mu_);
  return consumed_.count(nonce_hex) > 0;
}

std::vector<NonceLedger::ConsumeRecord> NonceLedger::consume_records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return consume_records_;
}

std::string grant_mac_hex(const std::string& key_hex, const std::string& digest_hex,
                          const std::string& nonce_hex, Tick expiry) {
  auto key = from_hex(key_hex);
  if (!key) throw std::invalid_argument("grant_mac_hex: key must be hex");
  std::string key_bytes(key->begin(), key->end());
  return hmac_sha256_hex(key_bytes, mac_message(digest_hex, nonce_hex, expiry));
}

std::string random_nonce_hex(std::mt19937_64& rng) {
  std::uint8_t bytes[16];
  for (int i = 0; i < 16; i += 8) {
    std::uint64_t w = rng();
    for (int j = 0; j < 8; ++j) bytes[i + j] = static_cast<std::uint8_t>(w >> (8 * j));
  }
  return to_hex(bytes, sizeof bytes);
}

IssueOutcome CompanionChannel::issue(const std::string& digest_hex,
                                     const std::string& nonce_hex, Tick expiry,
                                     const std::string& authenticator_hex) {
  IssueOutcome out;
  if (!is_hex(digest_hex, 64)) {
    out.error = "malformed digest";
    return out;
  }
  if (!is_hex(nonce_hex, 32)) {
    out.error = "malformed nonce";
    return out;
  }
  // Identity comes from verification: whichever configured key authenticates
  // the MAC names the issuer.
  for (const auto& [pair, key_hex] : issuer_keys_) {
    if (grant_mac_hex(key_hex, digest_hex, nonce_hex, expiry) == authenticator_hex) {
      out.issuer = pair;
      break;
    }
  }
  if (!out.issuer) {
    out.error = "authenticator does not verify under any configured issuer key";
    return out;
  }
  if (!trust_ || !trust_->contains_pair(*out.issuer)) {
    out.error = "issuer not trusted: " + out.issuer->principal + "/" +
                out.issuer->device;
    return out;
  }
  Grant g;
  g.digest_hex = digest_hex;
  g.nonce_hex = nonce_hex;
  g.expiry = expiry;
  g.issuer = *out.issuer;
  g.authenticator_hex = authenticator_hex;
  if (auto err = ledger_->issue(g)) {
    out.error = *err;
    return out;
  }
  out.accepted = true;
  return out;
}

}  // namespace provgate
