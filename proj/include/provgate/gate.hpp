#pragma once

#include <optional>
#include <string>
#include <vector>

#include "provgate/action.hpp"
#include "provgate/artifact.hpp"
#include "provgate/budget.hpp"
#include "provgate/clock.hpp"
#include "provgate/grant.hpp"
#include "provgate/manifest.hpp"

namespace provgate {

// Enforcement tiers, weakest to strongest:
//   D0 no gating — every emission dispatches (the measurement baseline)
//   D1 no gating, but provenance frames are rendered into model context and
//      the gate records what it would have seen
//   D2 provenance gating with one-shot attestation fallback
//   D3 D2 plus capability manifests and the two-of-three session rule
enum class Tier { D0, D1, D2, D3 };

const char* tier_name(Tier t);
std::optional<Tier> tier_from_name(std::string_view name);

enum class DenyReason {
  None,
  UnknownArtifact,
  EmptyCausal,
  EmptyProvenance,
  ExpiredGrant,
  DigestMismatch,
  ConsumedNonce,
  IssuerMismatch,
  ExceededBudget,
  UnclassifiedKind,
  UntrustedProvenance,
  ManifestViolation,
};

const char* deny_reason_code(DenyReason r);
std::optional<DenyReason> deny_reason_from_code(std::string_view code);

// Two-of-three accumulator: a session that has communicated externally,
// mutated durable state, and taken in untrusted content is one consequential
// action away from the classic lethal combination, so D3 requires a grant
// for whatever it tries next.
struct SessionFlags {
  bool communicates_externally = false;
  bool modifies_state = false;
  bool processes_untrusted = false;

  bool all() const {
    return communicates_externally && modifies_state && processes_untrusted;
  }
};

struct TraceEvent {
  enum class Type { AllowedAction, IntakeTag };
  Type type = Type::AllowedAction;
  GateHook hook = GateHook::H6;       // AllowedAction
  ActionKind kind = ActionKind::MessagingSend;  // AllowedAction
  bool untrusted = false;             // IntakeTag
};

// Pure fold over a session trace; the runtime maintains the same flags
// incrementally and this function is the reference for audits and tests.
SessionFlags rule_of_two_flags(const std::vector<TraceEvent>& trace);

struct GateDecision {
  bool allow = false;
  DenyReason reason = DenyReason::None;
  TagSet pi_alpha;            // accumulated provenance over the causal set
  std::string digest_hex;     // empty when the digest could not be computed
  std::string preimage_hex;   // surfaced on denies an approval could cure
  std::string mode;           // "all-trusted" | "attested" | "ungated"
  std::optional<Grant> consumed_grant;
  std::string detail;         // human-readable specifics (untrusted tags, ids)

  Value to_json() const;
};

struct GateContext {
  const ArtifactStore* store = nullptr;
  const TrustSet* trust = nullptr;
  NonceLedger* ledger = nullptr;          // optional: absent means no approvals
  ContactBudget* budget = nullptr;        // required for contact-list reads
  const ManifestStore* manifests = nullptr;  // consulted by D3 only
  const SessionFlags* session_flags = nullptr;  // consulted by D3 only
  Tier tier = Tier::D2;
  Tick now = 0;
};

// The decision procedure. Total: any internal failure becomes a deny with a
// named reason, never an exception and never an allow.
//
// D2 admits an action when its kind classifies, its causal set enumerates
// and resolves, every contributor carries provenance, the contact budget (if
// applicable) has room, and either every accumulated tag is trusted or a
// one-shot grant matching the instance digest is live — in which case the
// grant's nonce is spent as part of the decision. Denies never spend a
// nonce; the ledger is only written on the allow path.
//
// D3 layers on capability manifests (an action lowered from a skill whose
// manifest omits its kind is denied regardless of trust or grants) and the
// two-of-three rule above.
//
// Reason precedence when several apply, most structural first:
//   unclassified-kind, unknown-artifact, empty-causal, empty-provenance,
//   exceeded-budget, then the trust/attestation family, then
//   manifest-violation.
GateDecision decide(const GateContext& ctx, const Action& a);

}  // namespace provgate
