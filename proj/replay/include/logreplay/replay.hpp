#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

// Independent auditor for runtime event logs. This library deliberately
// shares no code with the runtime it audits: it carries its own SHA-256,
// its own canonical JSON encoder, and its own copy of the digest framing,
// so a bug in the runtime's crypto or serialization cannot hide itself by
// being replayed through the identical code path.
namespace logreplay {

using Json = nlohmann::json;

std::string sha256_hex(const std::string& bytes);

// Canonical reserialization: byte-sorted object keys, minimal separators,
// fixed escape policy, integers only. Returns nullopt for values with no
// canonical form (floats, integers beyond signed 64-bit, binary blobs).
std::optional<std::string> canonical_json(const Json& v);

// Recomputes an action-instance digest from a logged action object
// ({kind, causal, args, target, ownerDevice}). Returns nullopt when the
// causal set is "bottom" or a field fails to canonicalize.
std::optional<std::string> action_digest_hex(const Json& action);

enum class Verdict { Pass, Violations, Unverifiable };

const char* verdict_name(Verdict v);

struct Violation {
  std::size_t line;  // 0-based index into the log
  std::string code;
  std::string detail;
};

struct CheckResult {
  Verdict verdict = Verdict::Pass;
  std::vector<Violation> violations;
  std::size_t dispatches_checked = 0;
  std::size_t grants_seen = 0;
};

// Replays a JSON-lines event log and checks, for every dispatch event, that
// the run never released an effect the policy does not admit:
//   - the dispatch pairs 1:1 with an earlier allow decision for the same
//     instance digest;
//   - the digest reproduces from the logged action fields under this
//     library's own framing and hash;
//   - the accumulated provenance of the causal set, rebuilt from artifact
//     creation events alone, is covered by the given trusted pairings, OR a
//     grant event for exactly this digest from a trusted issuer matching the
//     action's owner pairing was consumed before the dispatch, unexpired at
//     the dispatch tick, with its nonce spent exactly once in the whole log.
// Anything the log does not let the auditor re-derive is Unverifiable.
CheckResult check(const std::vector<std::string>& lines,
                  const std::vector<std::pair<std::string, std::string>>& trust_pairs);

// Provenance view reconstructed from creation events, for log inspection.
struct ArtifactView {
  std::string id;
  std::string kind;
  std::set<std::array<std::string, 3>> tags;  // accumulated (channel, principal, device)
  std::size_t line = 0;                       // creation event index
};

std::map<std::string, ArtifactView> build_artifacts(
    const std::vector<std::string>& lines);

}  // namespace logreplay
