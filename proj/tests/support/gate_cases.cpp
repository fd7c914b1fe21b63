#include "support/gate_cases.hpp"

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>

#include "provgate/action.hpp"
#include "provgate/artifact.hpp"
#include "provgate/budget.hpp"
#include "provgate/clock.hpp"
#include "provgate/digest.hpp"
#include "provgate/gate.hpp"
#include "provgate/grant.hpp"
#include "provgate/manifest.hpp"
#include "provgate/runtime.hpp"
#include "provgate/source_tag.hpp"

namespace testsupport {
namespace {

using namespace provgate;

const SourceTag kMailTag{"email-gw", "attacker", "gw-dev"};
const SourceTag kTabletTag{"tablet-sync", "owner", "owner-tablet"};
const PrincipalDevice kOwnerPair{kOwnerTag.principal, kOwnerTag.device};
const PrincipalDevice kMalloryPair{"mallory", "mallory-phone"};
constexpr char kMalloryKeyHex[] =
    "9c1e4f6a0b2d8e7c5a3f1908d6b4e2c0a8f7d5b3e1c9a70654231f0e8d6c4b2a";

// Per-case fixture: an isolated store/ledger/budget/manifest wiring with the
// owner pairing trusted and the clock parked at tick 100.
struct World {
  ArtifactStore store;
  TrustSet trust = TrustSet::owner_only();
  std::unique_ptr<NonceLedger> ledger = NonceLedger::in_memory();
  ContactBudget budget{kDefaultContactLimit, kDefaultContactWindowTicks};
  ManifestStore manifests;
  SessionFlags flags;
  Tick now = 100;
  std::mt19937_64 rng{7};

  GateContext ctx(Tier tier = Tier::D2) {
    GateContext c;
    c.store = &store;
    c.trust = &trust;
    c.ledger = ledger.get();
    c.budget = &budget;
    c.manifests = &manifests;
    c.session_flags = &flags;
    c.tier = tier;
    c.now = now;
    return c;
  }

  ArtifactId trusted(const std::string& content) {
    return store.register_intake(ArtifactKind::OwnerRequest, content, {kOwnerTag}).id;
  }
  ArtifactId untrusted(const std::string& content) {
    return store.register_intake(ArtifactKind::Attachment, content, {kMailTag}).id;
  }

  Action act(ActionKind k, std::vector<ArtifactId> causal, Value args,
             std::string target) {
    Action a;
    a.kind_name = action_kind_name(k);
    a.kind = k;
    a.causal = std::move(causal);
    a.args = std::move(args);
    a.target = std::move(target);
    a.owner_device = kOwnerPair;
    return a;
  }

  Action send(std::vector<ArtifactId> causal,
              std::string target = "owner@example.net") {
    return act(ActionKind::MessagingSend, std::move(causal),
               Value{{"to", target}, {"body", "status update"}}, target);
  }

  Grant issue(const std::string& digest, Tick expiry,
              const PrincipalDevice& issuer = kOwnerPair,
              const std::string& key_hex = kOwnerIssuerKeyHex) {
    Grant g;
    g.digest_hex = digest;
    g.nonce_hex = random_nonce_hex(rng);
    g.expiry = expiry;
    g.issuer = issuer;
    g.authenticator_hex = grant_mac_hex(key_hex, g.digest_hex, g.nonce_hex, expiry);
    if (auto err = ledger->issue(g)) {
      throw std::runtime_error("fixture grant rejected: " + *err);
    }
    return g;
  }

  void install_manifest(const std::string& skill_id, std::set<ActionKind> allowed) {
    CapabilityManifest m;
    m.skill_id = skill_id;
    m.allowed = std::move(allowed);
    m.signer = kOwnerPair;
    m.mac_hex = manifest_mac_hex(kOwnerIssuerKeyHex, m.skill_id, m.allowed);
    std::map<PrincipalDevice, std::string> keys{{kOwnerPair, kOwnerIssuerKeyHex}};
    if (auto err = manifests.install(m, keys, trust)) {
      throw std::runtime_error("fixture manifest rejected: " + *err);
    }
  }
};

// First-failure collector so a case reads as a flat list of expectations.
struct Check {
  bool ok = true;
  std::string msg;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      msg = what;
    }
  }
  void deny(const GateDecision& d, DenyReason want, std::set<std::string>& codes,
            const std::string& label) {
    codes.insert(deny_reason_code(want));
    expect(!d.allow, label + ": expected deny, got allow");
    expect(d.reason == want, label + ": expected reason " +
                                 deny_reason_code(want) + ", got " +
                                 deny_reason_code(d.reason));
  }
};

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

struct CaseDef {
  std::string name;
  std::function<void(World&, Check&, std::set<std::string>&)> fn;
};

const std::vector<CaseDef>& cases() {
  static const std::vector<CaseDef> table = {

      {"allow-when-every-tag-trusted",
       [](World& w, Check& c, std::set<std::string>&) {
         auto d = decide(w.ctx(), w.send({w.trusted("send the weekly status")}));
         c.expect(d.allow, "trusted single-contributor send denied");
         c.expect(d.mode == "all-trusted", "mode should be all-trusted");
         c.expect(d.reason == DenyReason::None, "allow must carry reason none");
         c.expect(d.digest_hex.size() == 64, "allow must carry the instance digest");
         c.expect(d.pi_alpha == TagSet{kOwnerTag}, "accumulated tags wrong");
         c.expect(!d.consumed_grant.has_value(), "no nonce may be spent here");
       }},

      {"allow-union-over-multiple-trusted-contributors",
       [](World& w, Check& c, std::set<std::string>&) {
         w.trust.add({kTabletTag.principal, kTabletTag.device});
         auto a = w.trusted("first request");
         auto b = w.store.register_intake(ArtifactKind::File, "tablet note",
                                          {kTabletTag})
                      .id;
         auto note = w.store
                         .register_derived(ArtifactKind::MemoryFact,
                                           "merged notes", {a, b})
                         .id;
         auto d = decide(w.ctx(), w.send({a, b, note}));
         c.expect(d.allow, "multi-contributor trusted send denied");
         c.expect(d.pi_alpha == TagSet{kOwnerTag, kTabletTag},
                  "union over contributors wrong");
       }},

      {"deny-kind-outside-closed-set",
       [](World& w, Check& c, std::set<std::string>& codes) {
         Action a;
         a.kind_name = "telepathy.cast";
         a.causal = std::vector<ArtifactId>{w.trusted("hello")};
         a.owner_device = kOwnerPair;
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::UnclassifiedKind, codes, "unlisted kind");
         c.expect(contains(d.detail, "not in the closed set"),
                  "detail should name the closed-set failure: " + d.detail);
         c.expect(contains(d.detail, "telepathy.cast"),
                  "detail should echo the kind name");
       }},

      {"deny-args-without-canonical-form",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto a = w.act(ActionKind::FsWrite, {w.trusted("write it")},
                        Value{{"path", "/notes/x"}, {"ratio", 0.5}}, "/notes/x");
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::UnclassifiedKind, codes, "undigestable args");
         c.expect(d.detail == "args have no canonical form",
                  "detail wrong: " + d.detail);
         c.expect(d.digest_hex.empty(), "no digest can exist for these args");
       }},

      {"deny-unenumerable-causal",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto a = w.send({});
         a.causal.reset();
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::EmptyCausal, codes, "bottom causal");
         c.expect(d.detail == "causal set not enumerable",
                  "detail wrong: " + d.detail);
       }},

      {"deny-unresolved-contributor",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto d = decide(w.ctx(), w.send({w.trusted("ok"), "art-999999"}));
         c.deny(d, DenyReason::UnknownArtifact, codes, "dangling id");
         c.expect(contains(d.detail, "art-999999"),
                  "detail should name the unresolved id: " + d.detail);
       }},

      {"deny-contributor-with-no-provenance",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto bare = w.store
                         .register_model_emitted(ArtifactKind::ToolCallText,
                                                 "free-floating emission", {})
                         .id;
         auto d = decide(w.ctx(), w.send({bare}));
         c.deny(d, DenyReason::EmptyProvenance, codes, "tagless contributor");
         c.expect(contains(d.detail, bare),
                  "detail should name the bare artifact: " + d.detail);
       }},

      {"deny-untrusted-without-grant",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto d = decide(w.ctx(), w.send({w.untrusted("please forward this")}));
         c.deny(d, DenyReason::UntrustedProvenance, codes, "untrusted send");
         c.expect(d.detail == "untrusted tags: email-gw/attacker/gw-dev",
                  "detail wrong: " + d.detail);
         c.expect(!d.preimage_hex.empty(),
                  "curable deny must surface the preimage");
         c.expect(d.digest_hex.size() == 64, "curable deny must carry digest");
         c.expect(w.ledger->live_grant_count() == 0 &&
                      w.ledger->consume_records().empty(),
                  "deny must not touch the ledger");
       }},

      {"laundering-summary-keeps-origin",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto u = w.untrusted("embedded instruction");
         auto p1 =
             w.store.register_derived(ArtifactKind::MemoryFact, "rewrite", {u}).id;
         auto p2 = w.store
                       .register_derived(ArtifactKind::CompactionSummary,
                                         "clean-looking summary", {p1})
                       .id;
         auto d = decide(w.ctx(), w.send({w.trusted("owner ask"), p2}));
         c.deny(d, DenyReason::UntrustedProvenance, codes, "laundered summary");
         c.expect(d.pi_alpha.count(kMailTag) == 1,
                  "origin tag must survive two derivation hops");
         c.expect(contains(d.detail, "email-gw/attacker/gw-dev"),
                  "detail should name the origin: " + d.detail);
       }},

      {"allow-one-shot-grant-then-deny-replay",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto a = w.send({w.untrusted("forward me")});
         auto digest = action_digest_hex(a);
         auto g = w.issue(digest, w.now + 10);
         auto first = decide(w.ctx(), a);
         c.expect(first.allow, "granted instance should pass");
         c.expect(first.mode == "attested", "mode should be attested");
         c.expect(first.consumed_grant.has_value() &&
                      first.consumed_grant->nonce_hex == g.nonce_hex,
                  "decision must report the spent grant");
         c.expect(w.ledger->nonce_consumed(g.nonce_hex), "nonce must be spent");
         c.expect(w.ledger->live_grant_count() == 0, "no live grants remain");

         auto replayed = decide(w.ctx(), a);
         c.deny(replayed, DenyReason::ConsumedNonce, codes, "grant replay");
         c.expect(w.ledger->consume_records().size() == 1,
                  "replay must not add consume records");
       }},

      {"deny-expired-grant-leaves-nonce-unspent",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto a = w.send({w.untrusted("forward me")});
         auto digest = action_digest_hex(a);
         auto g = w.issue(digest, w.now);  // validity is strictly before expiry
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::ExpiredGrant, codes, "expired grant");
         c.expect(!w.ledger->nonce_consumed(g.nonce_hex),
                  "expired deny must not spend the nonce");
         c.expect(w.ledger->live_grant_count() == 1,
                  "grant row should survive the deny");

         // One tick inside the window the same grant works.
         auto fresh = w.issue(digest, w.now + 1);
         auto d2 = decide(w.ctx(), a);
         c.expect(d2.allow && d2.consumed_grant &&
                      d2.consumed_grant->nonce_hex == fresh.nonce_hex,
                  "expiry-1 should still be live");
       }},

      {"deny-grant-from-untrusted-issuer",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto a = w.send({w.untrusted("forward me")});
         auto digest = action_digest_hex(a);
         auto g = w.issue(digest, w.now + 10, kMalloryPair, kMalloryKeyHex);
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::IssuerMismatch, codes, "foreign issuer");
         c.expect(!w.ledger->nonce_consumed(g.nonce_hex),
                  "issuer deny must not spend the nonce");
       }},

      {"deny-live-grant-for-different-instance",
       [](World& w, Check& c, std::set<std::string>& codes) {
         std::string other(64, 'a');
         w.issue(other, w.now + 10);
         auto d = decide(w.ctx(), w.send({w.untrusted("forward me")}));
         c.deny(d, DenyReason::DigestMismatch, codes, "wrong-instance grant");
         c.expect(d.detail == "no live grant matches this instance digest",
                  "detail wrong: " + d.detail);
       }},

      {"grant-binds-the-exact-instance",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto u = w.untrusted("forward me");
         auto a = w.send({u}, "https://a.example/hook?m=x");
         auto b = w.send({u}, "https://b.example/hook?m=x");
         w.issue(action_digest_hex(a), w.now + 10);
         auto db = decide(w.ctx(), b);
         c.deny(db, DenyReason::DigestMismatch, codes, "sibling instance");
         auto da = decide(w.ctx(), a);
         c.expect(da.allow && da.mode == "attested",
                  "the granted instance itself must pass");
       }},

      {"deny-when-consume-cannot-be-journaled",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto grants = std::make_unique<MemoryJournal>();
         auto consumed = std::make_unique<MemoryJournal>();
         MemoryJournal* consumed_raw = consumed.get();
         w.ledger = std::make_unique<NonceLedger>(std::move(grants),
                                                  std::move(consumed));
         auto a = w.send({w.untrusted("forward me")});
         auto g = w.issue(action_digest_hex(a), w.now + 10);
         consumed_raw->fail_writes = true;
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::UntrustedProvenance, codes, "journal outage");
         c.expect(d.detail == "ledger write failure; attestation unavailable",
                  "detail wrong: " + d.detail);
         c.expect(!w.ledger->nonce_consumed(g.nonce_hex),
                  "unacknowledged consume must not stick");
         consumed_raw->fail_writes = false;
         auto after = decide(w.ctx(), a);
         c.expect(after.allow, "grant must still be usable once writes heal");
       }},

      {"contact-reads-budgeted-then-window-slides",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto src = w.trusted("look up the team");
         auto mk = [&] {
           return w.act(ActionKind::ContactListRead, {src},
                        Value{{"query", "team"}}, "contact-store");
         };
         for (int i = 0; i < kDefaultContactLimit; ++i) {
           auto d = decide(w.ctx(), mk());
           c.expect(d.allow, "read " + std::to_string(i + 1) +
                                 " should fit the window");
         }
         auto over = decide(w.ctx(), mk());
         c.deny(over, DenyReason::ExceededBudget, codes, "11th read");
         c.expect(over.detail == "contact-read window is full",
                  "detail wrong: " + over.detail);

         w.now += kDefaultContactWindowTicks - 1;
         auto still = decide(w.ctx(), mk());
         c.deny(still, DenyReason::ExceededBudget, codes, "window edge");

         w.now += 1;  // the oldest record falls out of the half-open window
         auto again = decide(w.ctx(), mk());
         c.expect(again.allow, "slid window should admit reads again");
       }},

      {"contact-budget-unreadable-history-denies",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto journal = std::make_unique<MemoryJournal>();
         journal->append("not-a-tick");
         ContactBudget bad(kDefaultContactLimit, kDefaultContactWindowTicks,
                           std::move(journal));
         auto ctx = w.ctx();
         ctx.budget = &bad;
         auto d = decide(ctx, w.act(ActionKind::ContactListRead,
                                    {w.trusted("look up")},
                                    Value{{"query", "x"}}, "contact-store"));
         c.deny(d, DenyReason::ExceededBudget, codes, "corrupt history");
         c.expect(d.detail == "budget history unreadable; treated as full",
                  "detail wrong: " + d.detail);
       }},

      {"contact-read-without-budget-wiring-fails-closed",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto ctx = w.ctx();
         ctx.budget = nullptr;
         auto d = decide(ctx, w.act(ActionKind::ContactListRead,
                                    {w.trusted("look up")},
                                    Value{{"query", "x"}}, "contact-store"));
         c.deny(d, DenyReason::ExceededBudget, codes, "missing budget");
       }},

      {"precedence-kind-before-artifact-resolution",
       [](World& w, Check& c, std::set<std::string>& codes) {
         Action a;
         a.kind_name = "made-up-kind";
         a.causal = std::vector<ArtifactId>{"art-424242"};
         a.owner_device = kOwnerPair;
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::UnclassifiedKind, codes,
                "classification outranks resolution");
       }},

      {"precedence-resolution-before-provenance",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto d = decide(w.ctx(), w.send({"art-424242"}));
         c.deny(d, DenyReason::UnknownArtifact, codes,
                "resolution outranks trust checks");
       }},

      {"precedence-budget-before-attestation",
       [](World& w, Check& c, std::set<std::string>& codes) {
         auto trusted_src = w.trusted("fill the window");
         for (int i = 0; i < kDefaultContactLimit; ++i) {
           auto d = decide(w.ctx(),
                           w.act(ActionKind::ContactListRead, {trusted_src},
                                 Value{{"query", "x"}}, "contact-store"));
           c.expect(d.allow, "window fill should pass");
         }
         auto a = w.act(ActionKind::ContactListRead, {w.untrusted("probe")},
                        Value{{"query", "x"}}, "contact-store");
         auto g = w.issue(action_digest_hex(a), w.now + 10);
         auto d = decide(w.ctx(), a);
         c.deny(d, DenyReason::ExceededBudget, codes, "budget outranks grant");
         c.expect(!w.ledger->nonce_consumed(g.nonce_hex),
                  "budget deny must not spend the nonce");
       }},

      {"ungated-tiers-record-but-never-refuse",
       [](World& w, Check& c, std::set<std::string>&) {
         Action weird;
         weird.kind_name = "telepathy.cast";
         weird.owner_device = kOwnerPair;  // unclassified AND bottom causal
         for (Tier t : {Tier::D0, Tier::D1}) {
           auto d = decide(w.ctx(t), weird);
           c.expect(d.allow && d.mode == "ungated",
                    std::string(tier_name(t)) + " must not refuse");
         }
         auto d0 = decide(w.ctx(Tier::D0), w.send({w.untrusted("exfil")}));
         c.expect(d0.allow && d0.mode == "ungated",
                  "untrusted provenance must not matter below d2");
         c.expect(d0.digest_hex.size() == 64,
                  "ungated allows still record the digest for audit");
       }},

      {"d3-manifest-caps-skill-kinds",
       [](World& w, Check& c, std::set<std::string>& codes) {
         w.install_manifest("helper", {ActionKind::FsWrite});
         auto a = w.send({w.trusted("send it")});
         a.initiating_skill = "helper";
         auto d = decide(w.ctx(Tier::D3), a);
         c.deny(d, DenyReason::ManifestViolation, codes, "out-of-manifest kind");
         c.expect(contains(d.detail, "outside manifest of skill helper"),
                  "detail wrong: " + d.detail);
       }},

      {"d3-grant-does-not-override-manifest",
       [](World& w, Check& c, std::set<std::string>& codes) {
         w.install_manifest("helper", {ActionKind::FsWrite});
         auto a = w.send({w.untrusted("send it")});
         a.initiating_skill = "helper";
         auto g = w.issue(action_digest_hex(a), w.now + 10);
         auto d = decide(w.ctx(Tier::D3), a);
         c.deny(d, DenyReason::ManifestViolation, codes, "manifest beats grant");
         c.expect(!w.ledger->nonce_consumed(g.nonce_hex),
                  "manifest deny must not spend the nonce");
       }},

      {"d3-manifest-admits-listed-kind",
       [](World& w, Check& c, std::set<std::string>&) {
         w.install_manifest("helper", {ActionKind::FsWrite});
         auto a = w.act(ActionKind::FsWrite, {w.trusted("write it")},
                        Value{{"path", "/notes/x"}, {"content", "hi"},
                              {"append", false}},
                        "/notes/x");
         a.initiating_skill = "helper";
         auto d = decide(w.ctx(Tier::D3), a);
         c.expect(d.allow, "listed kind should pass the manifest");
       }},

      {"d3-two-of-three-flags-do-not-block",
       [](World& w, Check& c, std::set<std::string>&) {
         w.flags.communicates_externally = true;
         w.flags.modifies_state = true;
         auto d = decide(w.ctx(Tier::D3), w.send({w.trusted("send it")}));
         c.expect(d.allow && d.mode == "all-trusted",
                  "two flags must not require approval");
       }},

      {"d3-full-flag-set-requires-approval",
       [](World& w, Check& c, std::set<std::string>& codes) {
         w.flags = SessionFlags{true, true, true};
         auto a = w.send({w.trusted("send it")});
         auto d = decide(w.ctx(Tier::D3), a);
         c.deny(d, DenyReason::ManifestViolation, codes, "risk-saturated session");
         c.expect(contains(d.detail, "one-shot approval is required"),
                  "detail wrong: " + d.detail);
         c.expect(!d.preimage_hex.empty(), "curable deny must surface preimage");

         w.issue(action_digest_hex(a), w.now + 10);
         auto cured = decide(w.ctx(Tier::D3), a);
         c.expect(cured.allow && cured.mode == "attested",
                  "one approval should unblock exactly this instance");
       }},

      {"d2-ignores-session-flags",
       [](World& w, Check& c, std::set<std::string>&) {
         w.flags = SessionFlags{true, true, true};
         auto d = decide(w.ctx(Tier::D2), w.send({w.trusted("send it")}));
         c.expect(d.allow, "the flag fold applies at d3 only");
       }},
  };
  return table;
}

}  // namespace

std::vector<GateCaseResult> run_gate_cases() {
  std::vector<GateCaseResult> out;
  for (const CaseDef& def : cases()) {
    GateCaseResult r;
    r.name = def.name;
    try {
      World w;
      Check c;
      def.fn(w, c, r.deny_codes);
      r.passed = c.ok;
      r.message = c.msg;
    } catch (const std::exception& e) {
      r.passed = false;
      r.message = std::string("exception: ") + e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace testsupport
