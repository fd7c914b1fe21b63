#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "provgate/action.hpp"
#include "provgate/artifact.hpp"
#include "provgate/budget.hpp"
#include "provgate/clock.hpp"
#include "provgate/event_log.hpp"
#include "provgate/gate.hpp"
#include "provgate/grant.hpp"
#include "provgate/manifest.hpp"

namespace provgate {

// Fixed mock issuer secrets. This is a simulator: keys are constants so runs
// replay exactly; nothing here is a real credential.
inline constexpr char kOwnerIssuerKeyHex[] =
    "6fa02c5bb6f8181b8a343035f4e4ac06ab683592f64d1aafe35bca29dcb2e745";

struct RuntimeConfig {
  Profile profile = Profile::P1;
  Tier tier = Tier::D2;
  TrustSet trust = TrustSet::owner_only();
  PrincipalDevice owner_device{kOwnerTag.principal, kOwnerTag.device};
  std::map<PrincipalDevice, std::string> issuer_keys = {
      {PrincipalDevice{kOwnerTag.principal, kOwnerTag.device},
       kOwnerIssuerKeyHex}};
  std::string scratch_prefix = "/scratch/";
  Tick clock_start = 0;
  bool group_workspace_bridge = false;  // group sessions may reach host surfaces
  int contact_limit = kDefaultContactLimit;
  Tick contact_window = kDefaultContactWindowTicks;
  std::uint64_t seed = 1;
  std::string run_marker = "run";  // canary attribution for this run
  std::string journal_dir;         // empty: in-memory ledger and budget
};

struct EmittedCall {
  std::string tool;
  Value args = Value::object();
};

// One scripted behavior: when the rendered context of `session` (empty = any
// session) contains `when_contains`, either emit a tool call or reply with
// plain text. Entries fire at most once unless `once` is cleared.
struct ScriptEntry {
  std::string when_contains;
  std::string session;
  std::optional<EmittedCall> call;
  std::string reply;
  bool once = true;
  bool used = false;
};

// The model stub: an ordered list of (predicate, emission) pairs and nothing
// else. Its entire interface is "given context text, what comes out" — it
// holds no handle to the ledger, the approval channel, or any substrate, so
// no script can mint or spend grants except through the gated tool surface.
class ScriptedModel {
 public:
  void add(ScriptEntry e) { entries_.push_back(std::move(e)); }

  std::optional<ScriptEntry> next(const std::string& session,
                                  const std::string& context) {
    for (ScriptEntry& e : entries_) {
      if (e.used && e.once) continue;
      if (!e.session.empty() && e.session != session) continue;
      if (!e.when_contains.empty() &&
          context.find(e.when_contains) == std::string::npos)
        continue;
      e.used = true;
      return e;
    }
    return std::nullopt;
  }

  void reset() {
    for (ScriptEntry& e : entries_) e.used = false;
  }

 private:
  std::vector<ScriptEntry> entries_;
};

struct CanaryHit {
  std::string sink;  // webhook | mailbox | fs-marker | scheduler | contacts
  std::string marker;
  std::string target;
  Tick tick = 0;
};

struct SchedulerEntry {
  std::string job;
  Tick fire_tick = 0;
  std::string target;
  std::string marker;
  std::string payload;
  bool fired = false;
};

struct DeliveredMessage {
  std::string to;
  std::string body;
  std::string marker;
  Tick tick = 0;
};

struct SkillRecord {
  std::string id;
  ArtifactId manifest_artifact;
  ArtifactId body_artifact;
  std::vector<EmittedCall> effects;
};

struct Session {
  std::string name;
  bool group = false;
  TranscriptSet transcript;
  SessionFlags flags;
  std::vector<TraceEvent> trace;
};

// Outcome of normalizing a raw tool emission into an action.
struct NormalizedCall {
  bool ok = false;             // schema-valid under the tool's normalizer
  std::string error;
  std::string kind_name;
  std::optional<ActionKind> kind;  // profile/bridge-filtered classification
  Value args = Value::object();
  std::string target;
  bool scratch_bypass = false;
};

// Tool-name → kind mapping plus per-tool normalizers (defaults filled,
// aliases rewritten, destination schemas checked). Kind names themselves are
// accepted as tool names with passthrough args, which is what the fuzzer
// uses to reach every kind.
NormalizedCall normalize_tool_call(const std::string& tool, const Value& raw_args,
                                   const RuntimeConfig& cfg, bool group_session);

// Deterministic single-threaded agent-host simulator.
//
// Hook layout: H1 inbound intake, H2 memory write, H3 memory retrieval,
// H4 skill persistence, H5 skill load (all update hooks: they register
// artifacts and propagate tags, and can refuse nothing) — then every
// consequential action funnels through the decision hooks H6–H10 via
// h6_tool_call, which normalizes, digests, gates, and only then touches a
// substrate. All substrates are in-process fakes wired to canary sinks so an
// effect that escapes is attributable.
class MockRuntime {
 public:
  explicit MockRuntime(RuntimeConfig cfg);

  // --- sessions ---------------------------------------------------------
  Session& start_session(const std::string& name, bool group = false);
  Session& session(const std::string& name);
  bool has_session(const std::string& name) const;

  // --- update hooks -----------------------------------------------------
  const Artifact& h1_inbound(const std::string& session_name, ArtifactKind kind,
                             const SourceTag& tag, std::string content);
  const Artifact& owner_request(const std::string& session_name, std::string text);
  const Artifact& h2_memory_write(const std::vector<ArtifactId>& sources,
                                  std::string note);
  std::vector<ArtifactId> h3_memory_retrieve(const std::string& session_name,
                                             const std::string& query);
  void h5_skill_load(const std::string& session_name, const std::string& skill_id);
  bool skill_exists(const std::string& skill_id) const;

  // --- the decision funnel ---------------------------------------------
  GateDecision h6_tool_call(const std::string& session_name,
                            const std::string& tool, const Value& raw_args);

  // --- drivers ----------------------------------------------------------
  std::vector<GateDecision> model_turn(const std::string& session_name);
  void advance_clock(Tick n);
  void shell_startup(const std::string& rc_path);  // external-event trigger
  void compact_session(const std::string& session_name, std::size_t count);
  void mark_unenumerable(const std::string& session_name, const ArtifactId& id);
  std::string render_context(const std::string& session_name) const;

  // --- owner-side approval channel -------------------------------------
  // Signs with the owner pairing's configured key. Models never see this
  // object; scripts cannot reach it through any tool.
  IssueOutcome issue_grant(const std::string& digest_hex, Tick expiry);
  IssueOutcome issue_grant_with_key(const std::string& key_hex,
                                    const std::string& digest_hex, Tick expiry);
  IssueOutcome issue_grant_raw(const std::string& digest_hex,
                               const std::string& nonce_hex, Tick expiry,
                               const std::string& mac_hex);

  // --- state access -----------------------------------------------------
  const RuntimeConfig& config() const { return cfg_; }
  Tick now() const { return clock_.now(); }
  ScriptedModel& model() { return model_; }
  ArtifactStore& store() { return store_; }
  const ArtifactStore& store() const { return store_; }
  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }
  NonceLedger& ledger() { return *ledger_; }
  ManifestStore& manifests() { return manifests_; }
  ContactBudget& budget() { return budget_; }
  const std::vector<CanaryHit>& canaries() const { return canaries_; }
  const std::vector<GateDecision>& decisions() const { return decisions_; }
  const std::map<std::string, std::string>& fs() const { return fs_; }
  const std::vector<SchedulerEntry>& schedule() const { return schedule_; }
  const std::vector<DeliveredMessage>& mailbox() const { return mailbox_; }
  const std::map<std::string, SkillRecord>& skills() const { return skills_; }
  std::mt19937_64& rng() { return rng_; }

  // Test seam: make the next substrate execution fail after the gate has
  // decided, to show a late fault cannot rewrite a verdict.
  void fail_next_substrate() { fail_next_substrate_ = true; }

 private:
  void transcript_append(Session& s, const Artifact& a);
  GateDecision gate_and_dispatch(Session& s, Action a,
                                 const std::optional<ArtifactId>& text_artifact,
                                 const ArtifactId& args_artifact,
                                 const std::string& tool_name);
  GateDecision gate_and_dispatch(Session& s, Action a,
                                 const std::optional<ArtifactId>& text_artifact,
                                 const ArtifactId& args_artifact,
                                 const std::string& tool_name,
                                 const std::string& classify_error);
  std::string dispatch_effect(Session& s, const Action& a,
                              const GateDecision& decision);
  void lower_skill_effects(Session& s, const SkillRecord& skill);
  void record_canary(const std::string& sink, const std::string& marker,
                     const std::string& target,
                     std::optional<Tick> at = std::nullopt);
  void fire_due_scheduler_entries();
  TagSet transcript_pi(const Session& s) const;
  Value action_to_json(const Action& a) const;

  RuntimeConfig cfg_;
  LogicalClock clock_;
  std::mt19937_64 rng_;
  ArtifactStore store_;
  EventLog log_;
  std::unique_ptr<NonceLedger> ledger_;
  std::unique_ptr<CompanionChannel> channel_;
  ContactBudget budget_;
  ManifestStore manifests_;
  ScriptedModel model_;
  std::map<std::string, Session> sessions_;
  std::vector<ArtifactId> memory_;
  std::map<std::string, SkillRecord> skills_;
  std::map<std::string, std::string> fs_;
  std::map<std::string, std::string> config_store_;
  std::vector<std::string> shell_log_;
  std::vector<SchedulerEntry> schedule_;
  std::vector<DeliveredMessage> mailbox_;
  std::vector<CanaryHit> canaries_;
  std::vector<GateDecision> decisions_;
  bool fail_next_substrate_ = false;
  int lower_depth_ = 0;
};

// Extracts the attribution marker from a destination: the value of a
// trailing `m=` query parameter, a `wake-<marker>` token, or the whole
// string when neither is present.
std::string extract_marker(const std::string& target);

}  // namespace provgate
