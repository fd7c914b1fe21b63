#include "provgate/artifact.hpp"

#include <algorithm>
#include <cstdio>

#include "provgate/hash.hpp"

namespace provgate {

namespace {

struct KindRow {
  ArtifactKind kind;
  const char* name;
};

constexpr KindRow kKindRows[] = {
    {ArtifactKind::MemoryFact, "memory-fact"},
    {ArtifactKind::SkillManifest, "skill-manifest"},
    {ArtifactKind::SkillBody, "skill-body"},
    {ArtifactKind::File, "file"},
    {ArtifactKind::ConfigBlob, "config-blob"},
    {ArtifactKind::EnvVar, "env-var"},
    {ArtifactKind::CwdSnapshot, "cwd-snapshot"},
    {ArtifactKind::Clipboard, "clipboard"},
    {ArtifactKind::ContactEntry, "contact-entry"},
    {ArtifactKind::ToolSchema, "tool-schema"},
    {ArtifactKind::SystemPrompt, "system-prompt"},
    {ArtifactKind::ConversationTurn, "conversation-turn"},
    {ArtifactKind::ToolResult, "tool-result"},
    {ArtifactKind::PlannerState, "planner-state"},
    {ArtifactKind::CompactionSummary, "compaction-summary"},
    {ArtifactKind::ToolCallText, "tool-call-text"},
    {ArtifactKind::OwnerRequest, "owner-request"},
    {ArtifactKind::Attachment, "attachment"},
};

}  // namespace

const char* artifact_kind_name(ArtifactKind k) {
  for (const KindRow& row : kKindRows)
    if (row.kind == k) return row.name;
  return "unknown";
}

std::optional<ArtifactKind> artifact_kind_from_name(std::string_view name) {
  for (const KindRow& row : kKindRows)
    if (name == row.name) return row.kind;
  return std::nullopt;
}

const Artifact& ArtifactStore::insert(ArtifactKind kind, std::string content,
                                      TagSet at_source, TagSet acquired) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "art-%06zu", next_++);
  ArtifactId id(buf);
  if (index_.count(id))
    throw std::logic_error("artifact id collision: " + id);  // cannot happen
  Artifact a;
  a.id = id;
  a.kind = kind;
  a.at_source = std::move(at_source);
  a.acquired = std::move(acquired);
  a.content_digest = sha256_hex(content);
  a.content = std::move(content);
  rows_.push_back(std::move(a));
  index_[id] = rows_.size() - 1;
  return rows_.back();
}

const Artifact& ArtifactStore::register_intake(ArtifactKind kind,
                                               std::string content,
                                               TagSet at_source) {
  if (at_source.empty())
    throw std::invalid_argument("register_intake: at-source tags required");
  for (const SourceTag& t : at_source)
    if (!t.valid())
      throw std::invalid_argument("register_intake: tag fields must be non-empty");
  TagSet acquired = at_source;  // fresh intake: acquired == at-source
  return insert(kind, std::move(content), std::move(at_source), std::move(acquired));
}

const Artifact& ArtifactStore::register_model_emitted(ArtifactKind kind,
                                                      std::string content,
                                                      TagSet acquired) {
  if (kind != ArtifactKind::ToolCallText && kind != ArtifactKind::ConversationTurn)
    throw std::invalid_argument(
        "register_model_emitted: only tool-call text and assistant turns");
  return insert(kind, std::move(content), TagSet{}, std::move(acquired));
}

const Artifact& ArtifactStore::register_derived(
    ArtifactKind kind, std::string content, const std::vector<ArtifactId>& inputs) {
  TagSet acquired = pi_union(*this, inputs);  // throws on unresolved input
  return insert(kind, std::move(content), TagSet{}, std::move(acquired));
}

const Artifact* ArtifactStore::find(const ArtifactId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &rows_[it->second];
}

const Artifact& ArtifactStore::require(const ArtifactId& id) const {
  const Artifact* a = find(id);
  if (!a) throw UnknownArtifact(id);
  return *a;
}

TagSet pi_union(const ArtifactStore& store, const std::vector<ArtifactId>& ids) {
  TagSet out;
  for (const ArtifactId& id : ids) {
    const Artifact& a = store.require(id);
    out.insert(a.at_source.begin(), a.at_source.end());
    out.insert(a.acquired.begin(), a.acquired.end());
  }
  return out;
}

bool TranscriptSet::has(const ArtifactId& id) const {
  return std::find(members_.begin(), members_.end(), id) != members_.end();
}

bool TranscriptSet::any_unenumerable() const {
  for (const ArtifactId& id : members_)
    if (unenumerable_.count(id)) return true;
  return false;
}

ArtifactId TranscriptSet::compact(ArtifactStore& store, std::size_t count,
                                  std::string summary_content) {
  count = std::min(count, members_.size());
  if (count == 0) throw std::invalid_argument("compact: nothing to replace");
  std::vector<ArtifactId> replaced(members_.begin(),
                                   members_.begin() + static_cast<long>(count));
  const Artifact& summary = store.register_derived(
      ArtifactKind::CompactionSummary, std::move(summary_content), replaced);
  bool poisoned = false;
  for (const ArtifactId& id : replaced)
    if (unenumerable_.count(id)) poisoned = true;
  members_.erase(members_.begin(), members_.begin() + static_cast<long>(count));
  members_.insert(members_.begin(), summary.id);
  if (poisoned) unenumerable_.insert(summary.id);  // stay conservative
  return summary.id;
}

std::optional<std::vector<ArtifactId>> causal_set(
    const TranscriptSet& transcript, const ArtifactId& args_artifact,
    const std::optional<ArtifactId>& tool_call_text) {
  if (transcript.any_unenumerable()) return std::nullopt;
  std::vector<ArtifactId> out = transcript.members();
  out.push_back(args_artifact);
  if (tool_call_text) out.push_back(*tool_call_text);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace provgate
