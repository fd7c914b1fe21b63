#pragma once

// Reference canonical-JSON encoder used only by tests.
//
// This is a from-scratch second implementation of the canonical byte rules:
// object keys sorted by raw UTF-8 byte order, no insignificant whitespace,
// the short escapes for quote/backslash/control shorthands, \u00xx for the
// remaining control bytes, raw UTF-8 passthrough otherwise, and integers
// only (any float-typed or out-of-signed-64-range number is rejected).
// It exists so the production encoder can be checked against an
// independently written one; do not fold the two together.

#include <optional>
#include <string>

#include <json.hpp>

namespace testsupport {

// Returns the canonical bytes for `v`, or std::nullopt when `v` contains a
// value with no canonical form (floats, out-of-range unsigned, binary).
std::optional<std::string> oracle_canonicalize(const nlohmann::json& v);

}  // namespace testsupport
