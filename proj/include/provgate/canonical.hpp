#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "provgate/value.hpp"

namespace provgate {

// Raised when a value has no canonical byte form. Callers on the decision
// path must convert this into a deny; a value that cannot be canonicalized
// cannot be digested, and an undigestable action is never dispatched.
struct CanonicalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical byte encoding of a structured value.
//
// The encoding is injective over the supported value space so that equal
// bytes mean equal values and distinct values can never collide before
// hashing:
//   - object keys are sorted by raw UTF-8 byte order and emitted exactly
//     once; separators are `,` and `:` with no whitespace anywhere;
//   - strings escape `"` `\` and control bytes (the seven short escapes,
//     then lowercase `\u00xx`), and pass all other bytes through untouched;
//   - numbers must be integers representable in signed 64 bits; floats and
//     larger magnitudes are rejected rather than rounded, which removes
//     every float-formatting ambiguity from the digest preimage;
//   - null/true/false use their literal spellings.
//
// Parsing canonical bytes and re-encoding them is the identity.
std::string canonicalize(const Value& v);

// Strict parse helper for canonical byte strings (and scenario/event JSON).
// Throws CanonicalError on malformed input.
Value parse_json(std::string_view bytes);

}  // namespace provgate
