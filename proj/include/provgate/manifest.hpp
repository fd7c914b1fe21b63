#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "provgate/action.hpp"
#include "provgate/source_tag.hpp"

namespace provgate {

// Capability manifest for a skill: the complete list of action kinds the
// skill's lowered effects may perform, signed at install time by a trusted
// principal. Outbound attestation issuance can never be granted this way —
// a skill must not be able to mint approvals for itself or anyone else.
struct CapabilityManifest {
  std::string skill_id;
  std::set<ActionKind> allowed;
  PrincipalDevice signer;
  std::string mac_hex;
};

// MAC over the skill id and the sorted kind-name list under the signer's key.
std::string manifest_mac_hex(const std::string& key_hex, const std::string& skill_id,
                             const std::set<ActionKind>& allowed);

class ManifestStore {
 public:
  // Verifies the signature under the signer's configured key, requires the
  // signer to be trusted, and rejects manifests listing outbound-attest-issue.
  // Returns an error string and stores nothing on failure.
  std::optional<std::string> install(
      const CapabilityManifest& m,
      const std::map<PrincipalDevice, std::string>& signer_keys,
      const TrustSet& trust);

  const CapabilityManifest* find(const std::string& skill_id) const {
    auto it = rows_.find(skill_id);
    return it == rows_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, CapabilityManifest> rows_;
};

}  // namespace provgate
