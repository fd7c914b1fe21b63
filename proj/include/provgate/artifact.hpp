#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "provgate/source_tag.hpp"

namespace provgate {

// Everything the agent can read or persist is an artifact of one of these
// kinds. The set is closed; hooks refuse to register anything else.
enum class ArtifactKind {
  MemoryFact,
  SkillManifest,
  SkillBody,
  File,
  ConfigBlob,
  EnvVar,
  CwdSnapshot,
  Clipboard,
  ContactEntry,
  ToolSchema,
  SystemPrompt,
  ConversationTurn,
  ToolResult,
  PlannerState,
  CompactionSummary,
  ToolCallText,
  OwnerRequest,
  Attachment,
};

const char* artifact_kind_name(ArtifactKind k);
std::optional<ArtifactKind> artifact_kind_from_name(std::string_view name);

using ArtifactId = std::string;

// An immutable byte string with provenance.
//
//   at_source : tags stamped when the bytes entered the system; written once
//               at registration and never again.
//   acquired  : tags accumulated from everything the bytes were derived
//               from. Derivation only ever unions, so influence survives
//               summarisation, paraphrase and any other transformation.
//
// `acquired` always contains `at_source`'s contribution indirectly via the
// union rule on derivation; for a fresh (non-derived) artifact it simply
// equals `at_source`.
struct Artifact {
  ArtifactId id;
  ArtifactKind kind;
  TagSet at_source;
  TagSet acquired;
  std::string content;
  std::string content_digest;  // sha256 hex of content
};

struct UnknownArtifact : std::runtime_error {
  explicit UnknownArtifact(const ArtifactId& id)
      : std::runtime_error("unknown artifact: " + id), id(id) {}
  ArtifactId id;
};

// Append-only artifact registry. Registration happens on the single runtime
// thread (hooks are the only writers); lookups hand out const references
// that stay valid for the store's lifetime.
class ArtifactStore {
 public:
  // Fresh intake: bytes entering through an ingress adapter. The tag set is
  // the adapter's word on where the bytes came from and must be non-empty.
  const Artifact& register_intake(ArtifactKind kind, std::string content,
                                  TagSet at_source);

  // Model-emitted bytes (tool-call text and assistant turns): no at-source
  // identity of their own, acquired tags supplied by the caller as the union
  // over the transcript the model saw. This is what makes paraphrase
  // laundering pointless — the emission inherits everything in context.
  const Artifact& register_model_emitted(ArtifactKind kind, std::string content,
                                         TagSet acquired);

  // Derivation: new bytes computed from existing artifacts. Acquired tags
  // are the union of (at_source ∪ acquired) over the inputs; an input that
  // does not resolve is a hard error, because dropping provenance silently
  // is exactly the failure mode this store exists to prevent.
  const Artifact& register_derived(ArtifactKind kind, std::string content,
                                   const std::vector<ArtifactId>& inputs);

  const Artifact* find(const ArtifactId& id) const;
  const Artifact& require(const ArtifactId& id) const;  // throws UnknownArtifact
  std::size_t size() const { return rows_.size(); }

 private:
  const Artifact& insert(ArtifactKind kind, std::string content, TagSet at_source,
                         TagSet acquired);

  std::deque<Artifact> rows_;
  std::map<ArtifactId, std::size_t> index_;
  std::size_t next_ = 1;
};

// Union of (at_source ∪ acquired) over a list of ids.
// Throws UnknownArtifact when an id does not resolve.
TagSet pi_union(const ArtifactStore& store, const std::vector<ArtifactId>& ids);

// Ordered set of artifacts whose content has been in a session's model
// context. Members whose full contents cannot be enumerated (harness-marked)
// poison causal-set computation into the "unenumerable" result, which the
// gate treats as deny.
class TranscriptSet {
 public:
  void append(const ArtifactId& id) { members_.push_back(id); }

  void mark_unenumerable(const ArtifactId& id) { unenumerable_.insert(id); }

  bool has(const ArtifactId& id) const;
  const std::vector<ArtifactId>& members() const { return members_; }
  bool any_unenumerable() const;

  // Context-window compaction: replaces the first `count` members with one
  // summary artifact derived from all of them, so the summary's acquired
  // tags carry everything the replaced members carried.
  ArtifactId compact(ArtifactStore& store, std::size_t count,
                     std::string summary_content);

 private:
  std::vector<ArtifactId> members_;
  std::set<ArtifactId> unenumerable_;
};

// Causal contributors to a model-emitted action: the transcript plus the
// resolved-args artifact plus (for direct model emissions) the tool-call
// text artifact. Returns std::nullopt — "unenumerable" — when any transcript
// member is flagged as not fully enumerable; callers must fail closed on that.
std::optional<std::vector<ArtifactId>> causal_set(
    const TranscriptSet& transcript, const ArtifactId& args_artifact,
    const std::optional<ArtifactId>& tool_call_text);

}  // namespace provgate
