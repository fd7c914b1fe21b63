#pragma once

#include <json.hpp>

namespace provgate {

// Structured values flowing through action arguments, event records and
// scenario files. nlohmann::json's default object type is a std::map keyed
// by byte order, which keeps iteration deterministic; the canonical byte
// encoding itself lives in canonical.hpp and does its own sorting anyway.
using Value = nlohmann::json;

}  // namespace provgate
