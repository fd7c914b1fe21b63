#include "provgate/digest.hpp"

#include <stdexcept>

#include "provgate/canonical.hpp"
#include "provgate/hash.hpp"

namespace provgate {
namespace {

void append_be64(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void append_field(std::string& out, char tag, std::string_view bytes) {
  out.push_back(tag);
  append_be64(out, bytes.size());
  out.append(bytes.data(), bytes.size());
}

}  // namespace

std::string build_preimage(const Action& a) {
  if (!a.causal)
    throw std::invalid_argument("build_preimage: causal set not enumerable");
  std::string out;
  append_field(out, 0x01, a.kind_name);

  out.push_back(0x02);
  append_be64(out, a.causal->size());
  for (const ArtifactId& id : *a.causal) {
    append_be64(out, id.size());
    out.append(id);
  }

  append_field(out, 0x03, canonicalize(a.args));
  append_field(out, 0x04, a.target);
  append_field(out, 0x05,
               canonicalize(Value::array(
                   {a.owner_device.principal, a.owner_device.device})));
  return out;
}

std::string action_digest_hex(const Action& a) {
  return sha256_hex(build_preimage(a));
}

std::string preimage_hex(const Action& a) {
  const std::string p = build_preimage(a);
  return to_hex(reinterpret_cast<const std::uint8_t*>(p.data()), p.size());
}

}  // namespace provgate
