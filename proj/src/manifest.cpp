#include "provgate/manifest.hpp"

#include "provgate/canonical.hpp"
#include "provgate/hash.hpp"

namespace provgate {

std::string manifest_mac_hex(const std::string& key_hex, const std::string& skill_id,
                             const std::set<ActionKind>& allowed) {
  Value names = Value::array();
  for (ActionKind k : allowed) names.push_back(action_kind_name(k));
  // std::set orders by enum value; sort the names for a stable preimage.
  std::sort(names.begin(), names.end());
  auto key = from_hex(key_hex);
  if (!key) throw std::invalid_argument("manifest_mac_hex: key must be hex");
  std::string key_bytes(key->begin(), key->end());
  return hmac_sha256_hex(key_bytes,
                         skill_id + "\n" + canonicalize(names));
}

std::optional<std::string> ManifestStore::install(
    const CapabilityManifest& m,
    const std::map<PrincipalDevice, std::string>& signer_keys,
    const TrustSet& trust) {
  if (m.skill_id.empty()) return "manifest without a skill id";
  if (m.allowed.count(ActionKind::OutboundAttestIssue))
    return "outbound-attest-issue may never appear in a manifest";
  if (!trust.contains_pair(m.signer))
    return "manifest signer not trusted: " + m.signer.principal + "/" +
           m.signer.device;
  auto key = signer_keys.find(m.signer);
  if (key == signer_keys.end()) return "no key configured for manifest signer";
  if (manifest_mac_hex(key->second, m.skill_id, m.allowed) != m.mac_hex)
    return "manifest signature does not verify";
  rows_[m.skill_id] = m;
  return std::nullopt;
}

}  // namespace provgate
