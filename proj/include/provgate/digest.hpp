#pragma once

#include <string>

#include "provgate/action.hpp"

namespace provgate {

// Action-instance digest.
//
// The digest binds the approved instance, not the action family: kind,
// sorted causal artifact ids, canonical argument bytes, target, and the
// owner pairing all go into the preimage. Change any one of them — swap the
// webhook URL, resolve the args differently, slip another artifact into the
// causal set — and the digest changes, so a one-shot approval cannot be
// redirected after the fact.
//
// Preimage layout: five fields, each framed as
//     tag byte | 8-byte big-endian length | bytes
// with the causal-id list additionally carrying an 8-byte element count and
// per-element length prefixes. Field tags are distinct, every variable-
// length segment is length-prefixed, and the framing is fixed, so no two
// distinct field tuples can serialize to the same bytes (a target that
// "looks like" an args blob still frames differently).
//
//   0x01 kind name
//   0x02 causal ids (count, then each id length-prefixed; ids pre-sorted)
//   0x03 canonical args bytes
//   0x04 target
//   0x05 canonical ["principal","device"] owner pairing
//
// Requires an enumerable causal set; callers must have already refused
// unenumerable actions. Throws CanonicalError when args cannot be
// canonicalized — such an action has no digest and must not dispatch.
std::string build_preimage(const Action& a);

// Lowercase hex SHA-256 of the preimage.
std::string action_digest_hex(const Action& a);

std::string preimage_hex(const Action& a);

}  // namespace provgate
