#include "provgate/canonical.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace provgate {
namespace {

void append_escaped(std::string& out, const std::string& s) {
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case 0x08: out += "\\b"; break;
      case 0x09: out += "\\t"; break;
      case 0x0a: out += "\\n"; break;
      case 0x0c: out += "\\f"; break;
      case 0x0d: out += "\\r"; break;
      default:
        if (c < 0x20) {
          static const char* digits = "0123456789abcdef";
          out += "\\u00";
          out.push_back(digits[c >> 4]);
          out.push_back(digits[c & 0x0f]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

bool byte_less(const std::string& a, const std::string& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char x = static_cast<unsigned char>(a[i]);
    unsigned char y = static_cast<unsigned char>(b[i]);
    if (x != y) return x < y;
  }
  return a.size() < b.size();
}

void append_value(std::string& out, const Value& v) {
  switch (v.type()) {
    case Value::value_t::null:
      out += "null";
      break;
    case Value::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      break;
    case Value::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      break;
    case Value::value_t::number_unsigned: {
      const std::uint64_t u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        throw CanonicalError("canonicalize: integer out of signed 64-bit range");
      out += std::to_string(u);
      break;
    }
    case Value::value_t::number_float:
      throw CanonicalError("canonicalize: non-integer number has no canonical form");
    case Value::value_t::string:
      append_escaped(out, v.get_ref<const std::string&>());
      break;
    case Value::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const Value& item : v) {
        if (!first) out.push_back(',');
        first = false;
        append_value(out, item);
      }
      out.push_back(']');
      break;
    }
    case Value::value_t::object: {
      std::vector<std::string> keys;
      keys.reserve(v.size());
      for (auto it = v.begin(); it != v.end(); ++it) keys.push_back(it.key());
      std::sort(keys.begin(), keys.end(), byte_less);
      out.push_back('{');
      bool first = true;
      for (const std::string& k : keys) {
        if (!first) out.push_back(',');
        first = false;
        append_escaped(out, k);
        out.push_back(':');
        append_value(out, v.at(k));
      }
      out.push_back('}');
      break;
    }
    default:
      throw CanonicalError("canonicalize: value type has no canonical form");
  }
}

}  // namespace

std::string canonicalize(const Value& v) {
  std::string out;
  append_value(out, v);
  return out;
}

Value parse_json(std::string_view bytes) {
  Value v = Value::parse(bytes, nullptr, false);
  if (v.is_discarded()) throw CanonicalError("parse_json: malformed JSON");
  return v;
}

}  // namespace provgate
