#include "provgate/gate.hpp"

#include "provgate/canonical.hpp"
#include "provgate/digest.hpp"

namespace provgate {

const char* tier_name(Tier t) {
  switch (t) {
    case Tier::D0: return "d0";
    case Tier::D1: return "d1";
    case Tier::D2: return "d2";
    case Tier::D3: return "d3";
  }
  return "?";
}

std::optional<Tier> tier_from_name(std::string_view name) {
  if (name == "d0" || name == "D0") return Tier::D0;
  if (name == "d1" || name == "D1") return Tier::D1;
  if (name == "d2" || name == "D2") return Tier::D2;
  if (name == "d3" || name == "D3") return Tier::D3;
  return std::nullopt;
}

const char* deny_reason_code(DenyReason r) {
  switch (r) {
    case DenyReason::None: return "none";
    case DenyReason::UnknownArtifact: return "unknown-artifact";
    case DenyReason::EmptyCausal: return "empty-causal";
    case DenyReason::EmptyProvenance: return "empty-provenance";
    case DenyReason::ExpiredGrant: return "expired-grant";
    case DenyReason::DigestMismatch: return "digest-mismatch";
    case DenyReason::ConsumedNonce: return "consumed-nonce";
    case DenyReason::IssuerMismatch: return "issuer-mismatch";
    case DenyReason::ExceededBudget: return "exceeded-budget";
    case DenyReason::UnclassifiedKind: return "unclassified-kind";
    case DenyReason::UntrustedProvenance: return "untrusted-provenance";
    case DenyReason::ManifestViolation: return "manifest-violation";
  }
  return "?";
}

std::optional<DenyReason> deny_reason_from_code(std::string_view code) {
  static const DenyReason all[] = {
      DenyReason::None,           DenyReason::UnknownArtifact,
      DenyReason::EmptyCausal,    DenyReason::EmptyProvenance,
      DenyReason::ExpiredGrant,   DenyReason::DigestMismatch,
      DenyReason::ConsumedNonce,  DenyReason::IssuerMismatch,
      DenyReason::ExceededBudget, DenyReason::UnclassifiedKind,
      DenyReason::UntrustedProvenance, DenyReason::ManifestViolation};
  for (DenyReason r : all)
    if (code == deny_reason_code(r)) return r;
  return std::nullopt;
}

SessionFlags rule_of_two_flags(const std::vector<TraceEvent>& trace) {
  SessionFlags f;
  for (const TraceEvent& e : trace) {
    if (e.type == TraceEvent::Type::IntakeTag) {
      if (e.untrusted) f.processes_untrusted = true;
      continue;
    }
    switch (e.hook) {
      case GateHook::H10:
        f.communicates_externally = true;
        break;
      case GateHook::H7:
      case GateHook::H8:
      case GateHook::H9:
        f.modifies_state = true;
        break;
      case GateHook::H6:
        if (is_mutating_h6_kind(e.kind)) f.modifies_state = true;
        break;
    }
  }
  return f;
}

Value GateDecision::to_json() const {
  Value v{{"verdict", allow ? "allow" : "deny"},
          {"reason", deny_reason_code(reason)},
          {"piAlpha", tag_set_to_json(pi_alpha)},
          {"digest", digest_hex.empty() ? Value(nullptr) : Value(digest_hex)},
          {"mode", mode},
          {"detail", detail}};
  if (!preimage_hex.empty()) v["preimage"] = preimage_hex;
  if (consumed_grant) v["grantNonce"] = consumed_grant->nonce_hex;
  return v;
}

namespace {

// Tag union over the causal set that tolerates unresolved ids — used only to
// give D0/D1 logs their best-effort observability fields.
TagSet loose_pi(const ArtifactStore& store, const std::vector<ArtifactId>& ids) {
  TagSet out;
  for (const ArtifactId& id : ids) {
    const Artifact* a = store.find(id);
    if (!a) continue;
    out.insert(a->at_source.begin(), a->at_source.end());
    out.insert(a->acquired.begin(), a->acquired.end());
  }
  return out;
}

std::string untrusted_tag_list(const TagSet& tags, const TrustSet& trust) {
  std::string out;
  for (const SourceTag& t : tags) {
    if (trust.contains(t)) continue;
    if (!out.empty()) out += ", ";
    out += t.str();
  }
  return out;
}

struct Denier {
  GateDecision& d;
  const Action& a;
  GateDecision deny(DenyReason reason, std::string detail,
                    bool surface_preimage) {
    d.allow = false;
    d.reason = reason;
    d.detail = std::move(detail);
    d.mode.clear();
    if (surface_preimage && a.causal) {
      try {
        d.preimage_hex = preimage_hex(a);
      } catch (...) {
        d.preimage_hex.clear();
      }
    }
    return d;
  }
};

DenyReason map_attest_failure(AttestFailure f) {
  switch (f) {
    case AttestFailure::DigestMismatch: return DenyReason::DigestMismatch;
    case AttestFailure::Expired: return DenyReason::ExpiredGrant;
    case AttestFailure::IssuerMismatch: return DenyReason::IssuerMismatch;
    case AttestFailure::Consumed: return DenyReason::ConsumedNonce;
    case AttestFailure::WriteFailure: return DenyReason::UntrustedProvenance;
  }
  return DenyReason::UntrustedProvenance;
}

GateDecision decide_impl(const GateContext& ctx, const Action& a) {
  GateDecision d;
  Denier denier{d, a};

  // Observability fields, best effort: these must never stop a D0 dispatch.
  if (a.causal) {
    try {
      d.digest_hex = action_digest_hex(a);
    } catch (...) {
      d.digest_hex.clear();
    }
    d.pi_alpha = loose_pi(*ctx.store, *a.causal);
  }

  if (ctx.tier == Tier::D0 || ctx.tier == Tier::D1) {
    // Ungated tiers: record, never refuse. (D1's tag rendering happens where
    // model context is assembled, not here.)
    d.allow = true;
    d.mode = "ungated";
    return d;
  }

  // ---- D2/D3 ----------------------------------------------------------
  if (!a.kind)
    return denier.deny(DenyReason::UnclassifiedKind,
                       "kind not in the closed set: " + a.kind_name, false);

  if (!a.causal)
    return denier.deny(DenyReason::EmptyCausal,
                       "causal set not enumerable", false);

  for (const ArtifactId& id : *a.causal)
    if (!ctx.store->find(id))
      return denier.deny(DenyReason::UnknownArtifact, "unresolved id: " + id,
                         false);

  for (const ArtifactId& id : *a.causal) {
    const Artifact& art = ctx.store->require(id);
    if (art.at_source.empty() && art.acquired.empty())
      return denier.deny(DenyReason::EmptyProvenance,
                         "contributor with no provenance: " + id, false);
  }

  d.pi_alpha = pi_union(*ctx.store, *a.causal);

  if (d.digest_hex.empty()) {
    // Classified and well-formed but undigestable (args with no canonical
    // form). Without a digest there is nothing to attest against or bind a
    // dispatch to, so the instance is refused as structurally malformed.
    return denier.deny(DenyReason::UnclassifiedKind,
                       "args have no canonical form", false);
  }

  if (*a.kind == ActionKind::ContactListRead) {
    if (!ctx.budget || !ctx.budget->would_allow(ctx.now))
      return denier.deny(DenyReason::ExceededBudget,
                         ctx.budget && ctx.budget->corrupted()
                             ? "budget history unreadable; treated as full"
                             : "contact-read window is full",
                         false);
  }

  const bool trusted = ctx.trust->covers(d.pi_alpha);

  bool manifest_ok = true;
  std::string manifest_detail;
  if (ctx.tier == Tier::D3 && a.initiating_skill && ctx.manifests) {
    if (const CapabilityManifest* m = ctx.manifests->find(*a.initiating_skill)) {
      if (!m->allowed.count(*a.kind)) {
        manifest_ok = false;
        manifest_detail = "kind " + a.kind_name + " outside manifest of skill " +
                          *a.initiating_skill;
      }
    }
  }
  const bool rot_blocked = ctx.tier == Tier::D3 && ctx.session_flags &&
                           ctx.session_flags->all();

  auto finish_allow = [&](const char* mode) -> GateDecision {
    d.allow = true;
    d.reason = DenyReason::None;
    d.mode = mode;
    if (*a.kind == ActionKind::ContactListRead && ctx.budget)
      ctx.budget->record(ctx.now);
    return d;
  };

  if (trusted && !rot_blocked) {
    if (!manifest_ok)
      return denier.deny(DenyReason::ManifestViolation, manifest_detail, false);
    return finish_allow("all-trusted");
  }

  // Attestation path: either the provenance is untrusted or the session has
  // tripped the two-of-three rule. Probe first so a doomed action never
  // spends a nonce.
  AttestResult probe;
  if (ctx.ledger) {
    probe = ctx.ledger->peek(d.digest_hex, a.owner_device, *ctx.trust, ctx.now);
  } else {
    probe.failure = AttestFailure::DigestMismatch;  // no ledger: no grants
  }

  if (probe.ok) {
    if (!manifest_ok)  // a grant does not override the manifest's kind cap
      return denier.deny(DenyReason::ManifestViolation, manifest_detail, false);
    AttestResult got =
        ctx.ledger->attest_and_consume(d.digest_hex, a.owner_device, *ctx.trust,
                                       ctx.now);
    if (got.ok) {
      d.consumed_grant = got.grant;
      return finish_allow("attested");
    }
    AttestFailure f = got.failure.value_or(AttestFailure::DigestMismatch);
    return denier.deny(map_attest_failure(f),
                       f == AttestFailure::WriteFailure
                           ? "ledger write failure; attestation unavailable"
                           : "grant became unusable before consumption",
                       true);
  }

  if (!trusted) {
    AttestFailure f = probe.failure.value_or(AttestFailure::DigestMismatch);
    if (f == AttestFailure::DigestMismatch) {
      const std::size_t live = ctx.ledger ? ctx.ledger->live_grant_count() : 0;
      if (live == 0)
        return denier.deny(DenyReason::UntrustedProvenance,
                           "untrusted tags: " +
                               untrusted_tag_list(d.pi_alpha, *ctx.trust),
                           true);
      return denier.deny(DenyReason::DigestMismatch,
                         "no live grant matches this instance digest", true);
    }
    return denier.deny(map_attest_failure(f),
                       "grant for this digest is unusable: " +
                           std::string(deny_reason_code(map_attest_failure(f))),
                       true);
  }

  // Trusted provenance but the session's two-of-three flags are all set and
  // no grant covers the action.
  return denier.deny(DenyReason::ManifestViolation,
                     "session has communicated externally, modified state and "
                     "processed untrusted content; a one-shot approval is "
                     "required",
                     true);
}

}  // namespace

GateDecision decide(const GateContext& ctx, const Action& a) {
  try {
    return decide_impl(ctx, a);
  } catch (const UnknownArtifact& e) {
    GateDecision d;
    d.allow = ctx.tier == Tier::D0 || ctx.tier == Tier::D1;
    if (d.allow) {
      d.mode = "ungated";
    } else {
      d.reason = DenyReason::UnknownArtifact;
      d.detail = e.what();
    }
    return d;
  } catch (const std::exception& e) {
    // Fail closed on anything unexpected: gating tiers deny, ungated tiers
    // still dispatch (they make no soundness claim).
    GateDecision d;
    d.allow = ctx.tier == Tier::D0 || ctx.tier == Tier::D1;
    if (d.allow) {
      d.mode = "ungated";
    } else {
      d.reason = DenyReason::UnclassifiedKind;
      d.detail = std::string("internal failure: ") + e.what();
    }
    return d;
  }
}

}  // namespace provgate
