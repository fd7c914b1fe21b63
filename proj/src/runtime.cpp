#include "provgate/runtime.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "provgate/canonical.hpp"
#include "provgate/digest.hpp"

namespace provgate {

namespace {

bool is_http_url(const std::string& s) {
  return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

std::optional<std::string> get_string(const Value& v, const char* key) {
  auto it = v.find(key);
  if (it == v.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

// Integer field accessor that refuses floats and values outside int64.
std::optional<Tick> get_int(const Value& v, const char* key) {
  auto it = v.find(key);
  if (it == v.end()) return std::nullopt;
  if (!it->is_number_integer()) return std::nullopt;
  if (it->is_number_unsigned() &&
      it->get<std::uint64_t>() >
          static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    return std::nullopt;
  return it->get<Tick>();
}

NormalizedCall schema_fail(std::string kind_name, std::string error) {
  NormalizedCall n;
  n.ok = false;
  n.kind_name = std::move(kind_name);
  n.error = std::move(error);
  return n;
}

std::string safe_canonical(const Value& v) {
  try {
    return canonicalize(v);
  } catch (const CanonicalError&) {
    return v.dump();
  }
}

// --- per-tool normalizers ------------------------------------------------

NormalizedCall normalize_cron_add(const Value& raw) {
  const char* kn = "schedule-create";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto job = get_string(raw, "job");
  if (!job || job->empty()) return schema_fail(kn, "job name required");

  Tick fire = 60;
  if (raw.contains("fireAtTick")) {
    auto f = get_int(raw, "fireAtTick");
    if (!f || *f < 0) return schema_fail(kn, "fireAtTick must be a non-negative integer");
    fire = *f;
  }

  std::string sched = "@daily";
  if (raw.contains("schedule")) {
    auto sv = get_string(raw, "schedule");
    if (!sv) return schema_fail(kn, "schedule must be a string");
    sched = *sv;
  }

  Value delivery = raw.contains("delivery") ? raw.at("delivery") : Value::object();
  if (!delivery.is_object()) return schema_fail(kn, "delivery must be an object");
  // `url` is an accepted alias for `to`, at either level.
  std::optional<std::string> to = get_string(delivery, "to");
  if (!to) to = get_string(delivery, "url");
  if (!to) to = get_string(raw, "to");
  if (!to) to = get_string(raw, "url");
  if (!to || !is_http_url(*to))
    return schema_fail(kn, "delivery destination must be an http(s) URL");
  std::string method = "webhook";
  if (delivery.contains("method")) {
    auto mv = get_string(delivery, "method");
    if (!mv) return schema_fail(kn, "delivery.method must be a string");
    method = *mv;
  }

  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"delivery", Value{{"method", method}, {"to", *to}}},
                 {"fireAtTick", fire},
                 {"job", *job},
                 {"schedule", sched}};
  n.target = *to;
  return n;
}

NormalizedCall normalize_cron_modify(const Value& raw) {
  const char* kn = "schedule-modify";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto job = get_string(raw, "job");
  if (!job || job->empty()) return schema_fail(kn, "job name required");
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"job", *job}};
  n.target = *job;
  if (raw.contains("fireAtTick")) {
    auto f = get_int(raw, "fireAtTick");
    if (!f || *f < 0) return schema_fail(kn, "fireAtTick must be a non-negative integer");
    n.args["fireAtTick"] = *f;
  }
  std::optional<std::string> to = get_string(raw, "to");
  if (!to) to = get_string(raw, "url");
  if (to) {
    if (!is_http_url(*to)) return schema_fail(kn, "delivery destination must be an http(s) URL");
    n.args["to"] = *to;
    n.target = *to;
  }
  return n;
}

NormalizedCall normalize_cron_remove(const Value& raw) {
  const char* kn = "schedule-remove";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto job = get_string(raw, "job");
  if (!job || job->empty()) return schema_fail(kn, "job name required");
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"job", *job}};
  n.target = *job;
  return n;
}

NormalizedCall normalize_message_send(const Value& raw) {
  const char* kn = "messaging-send";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto to = get_string(raw, "to");
  if (!to || to->empty()) return schema_fail(kn, "recipient required");
  std::string body;
  if (raw.contains("body")) {
    auto b = get_string(raw, "body");
    if (!b) return schema_fail(kn, "body must be a string");
    body = *b;
  }
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"body", body}, {"to", *to}};
  if (raw.contains("marker")) {
    auto m = get_string(raw, "marker");
    if (!m) return schema_fail(kn, "marker must be a string");
    n.args["marker"] = *m;
  }
  n.target = *to;
  return n;
}

NormalizedCall normalize_http_request(const Value& raw) {
  const char* kn = "network-egress";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto url = get_string(raw, "url");
  if (!url || !is_http_url(*url)) return schema_fail(kn, "url must be http(s)");
  std::string method = "GET";
  if (raw.contains("method")) {
    auto m = get_string(raw, "method");
    if (!m) return schema_fail(kn, "method must be a string");
    method = *m;
  }
  std::string body;
  if (raw.contains("body")) {
    auto b = get_string(raw, "body");
    if (!b) return schema_fail(kn, "body must be a string");
    body = *b;
  }
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"body", body}, {"method", method}, {"url", *url}};
  n.target = *url;
  return n;
}

NormalizedCall normalize_fs_write(const Value& raw) {
  const char* kn = "fs-write";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto path = get_string(raw, "path");
  if (!path || path->empty()) return schema_fail(kn, "path required");
  std::string content;
  if (raw.contains("content")) {
    auto c = get_string(raw, "content");
    if (!c) return schema_fail(kn, "content must be a string");
    content = *c;
  }
  bool append = false;
  if (raw.contains("append")) {
    if (!raw.at("append").is_boolean()) return schema_fail(kn, "append must be a boolean");
    append = raw.at("append").get<bool>();
  }
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"append", append}, {"content", content}, {"path", *path}};
  n.target = *path;
  return n;
}

NormalizedCall normalize_single_string(const char* kind_name, const Value& raw,
                                       const char* field, bool required,
                                       const std::string& fixed_target) {
  if (!raw.is_object()) return schema_fail(kind_name, "args must be an object");
  std::string value;
  auto v = get_string(raw, field);
  if (v) {
    value = *v;
  } else if (required || raw.contains(field)) {
    return schema_fail(kind_name, std::string(field) + " required");
  }
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kind_name;
  n.args = Value{{field, value}};
  n.target = fixed_target.empty() ? value : fixed_target;
  return n;
}

NormalizedCall normalize_skill(const char* kind_name, const Value& raw,
                               bool with_body) {
  if (!raw.is_object()) return schema_fail(kind_name, "args must be an object");
  auto skill = get_string(raw, "skill");
  if (!skill || skill->empty()) return schema_fail(kind_name, "skill id required");
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kind_name;
  n.args = Value{{"skill", *skill}};
  n.target = *skill;
  if (with_body) {
    std::string manifest;
    if (raw.contains("manifest")) {
      auto m = get_string(raw, "manifest");
      if (!m) return schema_fail(kind_name, "manifest must be a string");
      manifest = *m;
    }
    Value body = Value::object();
    if (raw.contains("body")) {
      if (!raw.at("body").is_object()) return schema_fail(kind_name, "body must be an object");
      body = raw.at("body");
    }
    n.args["manifest"] = manifest;
    n.args["body"] = body;
  }
  return n;
}

NormalizedCall normalize_config_write(const Value& raw) {
  const char* kn = "config-write";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto key = get_string(raw, "key");
  if (!key || key->empty()) return schema_fail(kn, "key required");
  std::string value;
  if (raw.contains("value")) {
    auto v = get_string(raw, "value");
    if (!v) return schema_fail(kn, "value must be a string");
    value = *v;
  }
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"key", *key}, {"value", value}};
  n.target = *key;
  return n;
}

NormalizedCall normalize_manifest_write(const Value& raw) {
  const char* kn = "manifest-write";
  if (!raw.is_object()) return schema_fail(kn, "args must be an object");
  auto skill = get_string(raw, "skill");
  if (!skill || skill->empty()) return schema_fail(kn, "skill id required");
  Value kinds = Value::array();
  if (raw.contains("kinds")) {
    if (!raw.at("kinds").is_array()) return schema_fail(kn, "kinds must be an array");
    for (const Value& k : raw.at("kinds")) {
      if (!k.is_string()) return schema_fail(kn, "kinds entries must be strings");
      kinds.push_back(k);
    }
  }
  NormalizedCall n;
  n.ok = true;
  n.kind_name = kn;
  n.args = Value{{"kinds", kinds}, {"skill", *skill}};
  n.target = *skill;
  return n;
}

// Kinds whose generic (kind-named) form requires a non-empty target.
bool requires_target(ActionKind k) {
  switch (k) {
    case ActionKind::MessagingSend:
    case ActionKind::NetworkEgress:
    case ActionKind::FsWrite:
    case ActionKind::ScheduleCreate:
    case ActionKind::ScheduleModify:
    case ActionKind::ScheduleRemove:
      return true;
    default:
      return false;
  }
}

NormalizedCall normalize_generic(const std::string& kind_name, const Value& raw) {
  if (!raw.is_object()) return schema_fail(kind_name, "args must be an object");
  NormalizedCall n;
  n.kind_name = kind_name;
  n.args = raw;
  if (raw.contains("target")) {
    auto t = get_string(raw, "target");
    if (!t) return schema_fail(kind_name, "target must be a string");
    n.target = *t;
  }
  auto k = action_kind_from_name(kind_name);
  if (k && requires_target(*k) && n.target.empty())
    return schema_fail(kind_name, "target required");
  n.ok = true;
  return n;
}

NormalizedCall normalize_impl(const std::string& tool, const Value& raw) {
  if (tool == "cron.add") return normalize_cron_add(raw);
  if (tool == "cron.modify") return normalize_cron_modify(raw);
  if (tool == "cron.remove") return normalize_cron_remove(raw);
  if (tool == "message.send") return normalize_message_send(raw);
  if (tool == "http.request") return normalize_http_request(raw);
  if (tool == "fs.write") return normalize_fs_write(raw);
  if (tool == "shell.exec")
    return normalize_single_string("host-shell-exec", raw, "command", true, "host-shell");
  if (tool == "contacts.list")
    return normalize_single_string("contact-list-read", raw, "query", false, "contact-store");
  if (tool == "skill.create") return normalize_skill("skill-create", raw, true);
  if (tool == "skill.modify") return normalize_skill("skill-modify", raw, true);
  if (tool == "skill.load") return normalize_skill("skill-load", raw, false);
  if (tool == "skill.exec") return normalize_skill("skill-exec", raw, false);
  if (tool == "config.write") return normalize_config_write(raw);
  if (tool == "manifest.write") return normalize_manifest_write(raw);
  if (action_kind_from_name(tool)) return normalize_generic(tool, raw);

  // Unrecognised surface: nothing to check, nothing to classify. Gating
  // tiers will refuse it as unclassified; the baseline tier dispatches it
  // into a void (there is no substrate for it).
  NormalizedCall n;
  n.ok = true;
  n.kind_name = tool;
  n.args = raw;
  return n;
}

}  // namespace

NormalizedCall normalize_tool_call(const std::string& tool, const Value& raw_args,
                                   const RuntimeConfig& cfg, bool group_session) {
  NormalizedCall n = normalize_impl(tool, raw_args);
  if (!n.ok) return n;
  auto k = action_kind_from_name(n.kind_name);
  n.kind = k;
  if (!k) return n;
  if (!kind_enabled(cfg.profile, *k)) {
    n.kind = std::nullopt;
    n.error = "kind '" + n.kind_name + "' is not enabled under profile " +
              std::string(profile_name(cfg.profile));
    return n;
  }
  if (group_session && !cfg.group_workspace_bridge &&
      *k != ActionKind::MessagingSend && *k != ActionKind::ContactListRead) {
    n.kind = std::nullopt;
    n.error = "group sessions cannot reach surface '" + n.kind_name +
              "' without the workspace bridge";
    return n;
  }
  if (*k == ActionKind::FsWrite && !cfg.scratch_prefix.empty() &&
      n.target.rfind(cfg.scratch_prefix, 0) == 0)
    n.scratch_bypass = true;
  return n;
}

std::string extract_marker(const std::string& target) {
  std::size_t m = target.rfind("m=");
  if (m != std::string::npos &&
      (m == 0 || target[m - 1] == '?' || target[m - 1] == '&')) {
    std::size_t end = target.find('&', m);
    return target.substr(m + 2, end == std::string::npos ? std::string::npos
                                                         : end - (m + 2));
  }
  std::size_t w = target.find("wake-");
  if (w != std::string::npos) {
    std::size_t end = target.find_first_of(" \t\n\"'", w);
    return target.substr(w + 5, end == std::string::npos ? std::string::npos
                                                         : end - (w + 5));
  }
  return target;
}

MockRuntime::MockRuntime(RuntimeConfig cfg)
    : cfg_(std::move(cfg)),
      clock_(cfg_.clock_start),
      rng_(cfg_.seed),
      budget_(cfg_.contact_limit, cfg_.contact_window,
              cfg_.journal_dir.empty()
                  ? nullptr
                  : std::make_unique<FileJournal>(cfg_.journal_dir +
                                                  "/budget.journal")) {
  ledger_ = cfg_.journal_dir.empty() ? NonceLedger::in_memory()
                                     : NonceLedger::at_directory(cfg_.journal_dir);
  channel_ = std::make_unique<CompanionChannel>(cfg_.issuer_keys, &cfg_.trust,
                                                ledger_.get());
  // Grants still live from a previous process show up at the head of this
  // run's log, so a log verifier sees every approval it will later see spent.
  for (const Grant& g : ledger_->live_grants()) {
    log_.append(Value{{"type", "grant-issued"},
                      {"tick", now()},
                      {"digest", g.digest_hex},
                      {"nonce", g.nonce_hex},
                      {"expiry", g.expiry},
                      {"issuer", g.issuer.to_json()},
                      {"loadedFromJournal", true}});
  }
}

Session& MockRuntime::start_session(const std::string& name, bool group) {
  auto [it, inserted] = sessions_.try_emplace(name);
  if (inserted) {
    it->second.name = name;
    it->second.group = group;
  }
  return it->second;
}

Session& MockRuntime::session(const std::string& name) {
  auto it = sessions_.find(name);
  if (it == sessions_.end()) throw std::runtime_error("unknown session: " + name);
  return it->second;
}

bool MockRuntime::has_session(const std::string& name) const {
  return sessions_.count(name) != 0;
}

TagSet MockRuntime::transcript_pi(const Session& s) const {
  return pi_union(store_, s.transcript.members());
}

void MockRuntime::transcript_append(Session& s, const Artifact& a) {
  s.transcript.append(a.id);
  bool untrusted = false;
  for (const SourceTag& t : a.at_source)
    if (!cfg_.trust.contains(t)) untrusted = true;
  for (const SourceTag& t : a.acquired)
    if (!cfg_.trust.contains(t)) untrusted = true;
  TraceEvent ev;
  ev.type = TraceEvent::Type::IntakeTag;
  ev.untrusted = untrusted;
  s.trace.push_back(ev);
  s.flags = rule_of_two_flags(s.trace);
}

const Artifact& MockRuntime::h1_inbound(const std::string& session_name,
                                        ArtifactKind kind, const SourceTag& tag,
                                        std::string content) {
  if (!tag.valid())
    throw std::invalid_argument("inbound artifact with incomplete source tag");
  const Artifact& a = store_.register_intake(kind, std::move(content), TagSet{tag});
  log_.append(Value{{"type", "intake"},
                    {"tick", now()},
                    {"session", session_name.empty() ? Value(nullptr)
                                                     : Value(session_name)},
                    {"artifact", a.id},
                    {"kind", artifact_kind_name(kind)},
                    {"tag", tag.to_json()},
                    {"contentDigest", a.content_digest}});
  if (!session_name.empty()) transcript_append(session(session_name), a);
  return a;
}

const Artifact& MockRuntime::owner_request(const std::string& session_name,
                                           std::string text) {
  return h1_inbound(session_name, ArtifactKind::OwnerRequest, kOwnerTag,
                    std::move(text));
}

const Artifact& MockRuntime::h2_memory_write(const std::vector<ArtifactId>& sources,
                                             std::string note) {
  const Artifact& a =
      store_.register_derived(ArtifactKind::MemoryFact, std::move(note), sources);
  memory_.push_back(a.id);
  log_.append(Value{{"type", "memory-write"},
                    {"tick", now()},
                    {"artifact", a.id},
                    {"kind", artifact_kind_name(a.kind)},
                    {"inputs", Value(sources)},
                    {"contentDigest", a.content_digest}});
  return a;
}

std::vector<ArtifactId> MockRuntime::h3_memory_retrieve(
    const std::string& session_name, const std::string& query) {
  Session& s = session(session_name);
  std::vector<ArtifactId> out;
  for (const ArtifactId& id : memory_)
    if (store_.require(id).content.find(query) != std::string::npos)
      out.push_back(id);
  log_.append(Value{{"type", "memory-retrieve"},
                    {"tick", now()},
                    {"session", s.name},
                    {"query", query},
                    {"artifacts", Value(out)}});
  for (const ArtifactId& id : out) transcript_append(s, store_.require(id));
  return out;
}

void MockRuntime::h5_skill_load(const std::string& session_name,
                                const std::string& skill_id) {
  auto it = skills_.find(skill_id);
  if (it == skills_.end()) throw std::runtime_error("unknown skill: " + skill_id);
  Session& s = session(session_name);
  const SkillRecord& sk = it->second;
  transcript_append(s, store_.require(sk.manifest_artifact));
  transcript_append(s, store_.require(sk.body_artifact));
  log_.append(Value{{"type", "skill-load"},
                    {"tick", now()},
                    {"session", s.name},
                    {"skill", sk.id},
                    {"manifestArtifact", sk.manifest_artifact},
                    {"bodyArtifact", sk.body_artifact}});
}

bool MockRuntime::skill_exists(const std::string& skill_id) const {
  return skills_.count(skill_id) != 0;
}

Value MockRuntime::action_to_json(const Action& a) const {
  Value v{{"kind", a.kind_name},
          {"args", a.args},
          {"target", a.target},
          {"ownerDevice", a.owner_device.to_json()}};
  v["causal"] = a.causal ? Value(*a.causal) : Value("bottom");
  v["initiatingSkill"] =
      a.initiating_skill ? Value(*a.initiating_skill) : Value(nullptr);
  return v;
}

GateDecision MockRuntime::h6_tool_call(const std::string& session_name,
                                       const std::string& tool,
                                       const Value& raw_args) {
  Session& s = session(session_name);
  NormalizedCall norm = normalize_tool_call(tool, raw_args, cfg_, s.group);

  TagSet ctx = transcript_pi(s);
  const Artifact& text_art = store_.register_model_emitted(
      ArtifactKind::ToolCallText, tool + " " + raw_args.dump(), ctx);
  const Artifact& args_art = store_.register_model_emitted(
      ArtifactKind::ToolCallText, safe_canonical(norm.ok ? norm.args : raw_args),
      ctx);

  log_.append(Value{{"type", "tool-call"},
                    {"tick", now()},
                    {"session", s.name},
                    {"tool", tool},
                    {"kind", norm.kind_name},
                    {"textArtifact", text_art.id},
                    {"argsArtifact", args_art.id},
                    {"transcript", Value(s.transcript.members())},
                    {"lowered", false}});

  if (norm.ok && norm.scratch_bypass) {
    // Agent-private scratch space: no consequential surface, no gate. The
    // write happens and only the tool-call registration above is recorded.
    std::string path = norm.args.at("path").get<std::string>();
    std::string content = norm.args.at("content").get<std::string>();
    if (norm.args.at("append").get<bool>())
      fs_[path] += content;
    else
      fs_[path] = content;
    transcript_append(s, text_art);
    transcript_append(s, args_art);
    GateDecision d;
    d.allow = true;
    d.mode = "scratch";
    decisions_.push_back(d);
    return d;
  }

  Action a;
  a.kind_name = norm.kind_name;
  a.kind = norm.kind;
  a.causal = causal_set(s.transcript, args_art.id, text_art.id);
  a.args = norm.ok ? norm.args : raw_args;
  a.target = norm.target;
  a.owner_device = cfg_.owner_device;
  return gate_and_dispatch(s, std::move(a), text_art.id, args_art.id, tool,
                           norm.error);
}

GateDecision MockRuntime::gate_and_dispatch(
    Session& s, Action a, const std::optional<ArtifactId>& text_artifact,
    const ArtifactId& args_artifact, const std::string& tool_name) {
  return gate_and_dispatch(s, std::move(a), text_artifact, args_artifact,
                           tool_name, std::string());
}

GateDecision MockRuntime::gate_and_dispatch(
    Session& s, Action a, const std::optional<ArtifactId>& text_artifact,
    const ArtifactId& args_artifact, const std::string& tool_name,
    const std::string& classify_error) {
  GateContext ctx;
  ctx.store = &store_;
  ctx.trust = &cfg_.trust;
  ctx.ledger = ledger_.get();
  ctx.budget = &budget_;
  ctx.manifests = &manifests_;
  ctx.session_flags = &s.flags;
  ctx.tier = cfg_.tier;
  ctx.now = now();

  GateDecision d = decide(ctx, a);
  if (!d.allow && d.reason == DenyReason::UnclassifiedKind &&
      !classify_error.empty())
    d.detail = classify_error;

  GateHook hook = a.kind ? gate_hook_for(*a.kind) : GateHook::H6;
  Value gev = d.to_json();
  gev["type"] = "gate-decision";
  gev["tick"] = now();
  gev["session"] = s.name;
  gev["hook"] = gate_hook_name(hook);
  gev["tool"] = tool_name;
  gev["action"] = action_to_json(a);
  log_.append(std::move(gev));
  decisions_.push_back(d);

  if (!d.allow) return d;

  if (d.consumed_grant)
    log_.append(Value{{"type", "nonce-consumed"},
                      {"tick", now()},
                      {"nonce", d.consumed_grant->nonce_hex},
                      {"digest", d.consumed_grant->digest_hex}});

  std::string effect = dispatch_effect(s, a, d);
  log_.append(Value{{"type", "dispatch"},
                    {"tick", now()},
                    {"session", s.name},
                    {"hook", gate_hook_name(hook)},
                    {"digest", d.digest_hex.empty() ? Value(nullptr)
                                                    : Value(d.digest_hex)},
                    {"action", action_to_json(a)},
                    {"effect", effect},
                    {"grantNonce", d.consumed_grant
                                       ? Value(d.consumed_grant->nonce_hex)
                                       : Value(nullptr)}});

  // Dispatched emissions become part of what the model can see next; denied
  // ones do not, so a later grant-and-retry re-digests identically.
  if (text_artifact) transcript_append(s, store_.require(*text_artifact));
  transcript_append(s, store_.require(args_artifact));
  if (a.kind) {
    TraceEvent ev;
    ev.type = TraceEvent::Type::AllowedAction;
    ev.hook = gate_hook_for(*a.kind);
    ev.kind = *a.kind;
    s.trace.push_back(ev);
    s.flags = rule_of_two_flags(s.trace);
  }

  if (a.kind && *a.kind == ActionKind::SkillExec && effect == "skill-executed") {
    auto it = skills_.find(a.target);
    if (it != skills_.end()) lower_skill_effects(s, it->second);
  }
  return d;
}

std::string MockRuntime::dispatch_effect(Session& s, const Action& a,
                                         const GateDecision& d) {
  (void)d;
  if (fail_next_substrate_) {
    fail_next_substrate_ = false;
    return "substrate-error";
  }
  if (!a.kind) return "no-substrate";
  const Value& args = a.args;

  switch (*a.kind) {
    case ActionKind::MessagingSend: {
      std::string body = args.is_object() && args.contains("body") &&
                                 args.at("body").is_string()
                             ? args.at("body").get<std::string>()
                             : std::string();
      std::string marker;
      if (args.is_object() && args.contains("marker") &&
          args.at("marker").is_string())
        marker = args.at("marker").get<std::string>();
      else if (!cfg_.run_marker.empty() &&
               body.find(cfg_.run_marker) != std::string::npos)
        marker = cfg_.run_marker;
      else
        marker = extract_marker(a.target);
      mailbox_.push_back({a.target, body, marker, now()});
      record_canary("mailbox", marker, a.target);
      return "message-delivered";
    }
    case ActionKind::NetworkEgress: {
      std::string marker = extract_marker(a.target);
      if (marker == a.target && !cfg_.run_marker.empty() &&
          a.target.find(cfg_.run_marker) != std::string::npos)
        marker = cfg_.run_marker;
      record_canary("webhook", marker, a.target);
      return "request-sent";
    }
    case ActionKind::OutboundAttestIssue:
      return "attestation-issued-outbound";
    case ActionKind::ScheduleCreate: {
      // fireAtTick is an absolute logical tick; entries with no explicit tick
      // fire an hour from now.
      Tick fire = now() + 60;
      if (args.is_object() && args.contains("fireAtTick") &&
          args.at("fireAtTick").is_number_integer())
        fire = args.at("fireAtTick").get<Tick>();
      SchedulerEntry e;
      e.job = args.is_object() && args.contains("job") && args.at("job").is_string()
                  ? args.at("job").get<std::string>()
                  : a.target;
      e.fire_tick = fire;
      e.target = a.target;
      e.marker = extract_marker(a.target);
      e.payload = safe_canonical(args);
      schedule_.push_back(e);
      record_canary("scheduler", e.marker, e.target);
      return "scheduler-entry-stored";
    }
    case ActionKind::ScheduleModify: {
      std::string job = args.is_object() && args.contains("job") &&
                                args.at("job").is_string()
                            ? args.at("job").get<std::string>()
                            : a.target;
      for (SchedulerEntry& e : schedule_) {
        if (e.job != job) continue;
        if (args.is_object() && args.contains("fireAtTick") &&
            args.at("fireAtTick").is_number_integer())
          e.fire_tick = args.at("fireAtTick").get<Tick>();
        if (args.is_object() && args.contains("to") && args.at("to").is_string()) {
          e.target = args.at("to").get<std::string>();
          e.marker = extract_marker(e.target);
        }
        return "scheduler-entry-updated";
      }
      return "no-such-entry";
    }
    case ActionKind::ScheduleRemove: {
      std::string job = args.is_object() && args.contains("job") &&
                                args.at("job").is_string()
                            ? args.at("job").get<std::string>()
                            : a.target;
      auto before = schedule_.size();
      schedule_.erase(std::remove_if(schedule_.begin(), schedule_.end(),
                                     [&](const SchedulerEntry& e) {
                                       return e.job == job;
                                     }),
                      schedule_.end());
      return schedule_.size() < before ? "scheduler-entry-removed"
                                       : "no-such-entry";
    }
    case ActionKind::FsWrite: {
      std::string content = args.is_object() && args.contains("content") &&
                                    args.at("content").is_string()
                                ? args.at("content").get<std::string>()
                                : std::string();
      bool append = args.is_object() && args.contains("append") &&
                    args.at("append").is_boolean() && args.at("append").get<bool>();
      if (append)
        fs_[a.target] += content;
      else
        fs_[a.target] = content;
      return "fs-written";
    }
    case ActionKind::ConfigWrite:
    case ActionKind::ModelRouterWrite:
    case ActionKind::SystemPromptWrite:
    case ActionKind::AgentBootstrapWrite: {
      std::string value = args.is_object() && args.contains("value") &&
                                  args.at("value").is_string()
                              ? args.at("value").get<std::string>()
                              : safe_canonical(args);
      config_store_[a.target.empty() ? a.kind_name : a.target] = value;
      return "config-written";
    }
    case ActionKind::HostShellExec: {
      std::string cmd = args.is_object() && args.contains("command") &&
                                args.at("command").is_string()
                            ? args.at("command").get<std::string>()
                            : std::string();
      shell_log_.push_back(cmd);
      return "shell-executed";
    }
    case ActionKind::ContactListRead:
      record_canary("contacts", cfg_.run_marker, "contact-store");
      return "contact-list-read";
    case ActionKind::SkillCreate:
    case ActionKind::SkillModify: {
      std::string skill_id = args.is_object() && args.contains("skill") &&
                                     args.at("skill").is_string()
                                 ? args.at("skill").get<std::string>()
                                 : a.target;
      std::string manifest_text;
      if (args.is_object() && args.contains("manifest") &&
          args.at("manifest").is_string())
        manifest_text = args.at("manifest").get<std::string>();
      Value body = args.is_object() && args.contains("body") &&
                           args.at("body").is_object()
                       ? args.at("body")
                       : Value::object();
      std::vector<ArtifactId> inputs =
          a.causal ? *a.causal : std::vector<ArtifactId>{};
      const Artifact& man = store_.register_derived(ArtifactKind::SkillManifest,
                                                    manifest_text, inputs);
      const Artifact& bod = store_.register_derived(ArtifactKind::SkillBody,
                                                    safe_canonical(body), inputs);
      SkillRecord rec;
      rec.id = skill_id;
      rec.manifest_artifact = man.id;
      rec.body_artifact = bod.id;
      if (body.contains("effects") && body.at("effects").is_array()) {
        for (const Value& e : body.at("effects")) {
          if (!e.is_object() || !e.contains("tool") || !e.at("tool").is_string())
            continue;
          EmittedCall call;
          call.tool = e.at("tool").get<std::string>();
          if (e.contains("args")) call.args = e.at("args");
          rec.effects.push_back(std::move(call));
        }
      }
      skills_[skill_id] = std::move(rec);
      log_.append(Value{{"type", "skill-write"},
                        {"tick", now()},
                        {"session", s.name},
                        {"skill", skill_id},
                        {"manifestArtifact", man.id},
                        {"bodyArtifact", bod.id},
                        {"inputs", Value(inputs)}});
      return "skill-stored";
    }
    case ActionKind::SkillLoad: {
      if (!skills_.count(a.target)) return "no-such-skill";
      h5_skill_load(s.name, a.target);
      return "skill-loaded";
    }
    case ActionKind::SkillExec:
      return skills_.count(a.target) ? "skill-executed" : "no-such-skill";
    case ActionKind::PluginInstall:
    case ActionKind::PluginModify:
    case ActionKind::PluginLoad:
    case ActionKind::PluginExec:
    case ActionKind::McpServerInstall:
    case ActionKind::McpServerModify:
    case ActionKind::McpServerLoad:
    case ActionKind::McpToolCall:
      return "recorded";
    case ActionKind::ManifestWrite:
      config_store_["manifest:" + a.target] = safe_canonical(args);
      return "manifest-recorded";
  }
  return "no-substrate";
}

void MockRuntime::lower_skill_effects(Session& s, const SkillRecord& skill) {
  if (lower_depth_ >= 4) return;  // a skill body cannot recurse unboundedly
  ++lower_depth_;
  for (const EmittedCall& call : skill.effects) {
    NormalizedCall norm = normalize_tool_call(call.tool, call.args, cfg_, s.group);
    TagSet ctx = transcript_pi(s);
    const Artifact& args_art = store_.register_model_emitted(
        ArtifactKind::ToolCallText,
        safe_canonical(norm.ok ? norm.args : call.args), ctx);
    log_.append(Value{{"type", "tool-call"},
                      {"tick", now()},
                      {"session", s.name},
                      {"tool", call.tool},
                      {"kind", norm.kind_name},
                      {"textArtifact", Value(nullptr)},
                      {"argsArtifact", args_art.id},
                      {"transcript", Value(s.transcript.members())},
                      {"lowered", true}});

    Action a;
    a.kind_name = norm.kind_name;
    a.kind = norm.kind;
    a.causal = causal_set(s.transcript, args_art.id, std::nullopt);
    if (a.causal) {
      a.causal->push_back(skill.manifest_artifact);
      a.causal->push_back(skill.body_artifact);
      std::sort(a.causal->begin(), a.causal->end());
      a.causal->erase(std::unique(a.causal->begin(), a.causal->end()),
                      a.causal->end());
    }
    a.args = norm.ok ? norm.args : call.args;
    a.target = norm.target;
    a.owner_device = cfg_.owner_device;
    a.initiating_skill = skill.id;

    if (norm.ok && norm.scratch_bypass) {
      fs_[norm.args.at("path").get<std::string>()] =
          norm.args.at("content").get<std::string>();
      transcript_append(s, args_art);
      continue;
    }
    gate_and_dispatch(s, std::move(a), std::nullopt, args_art.id, call.tool,
                      norm.error);
  }
  --lower_depth_;
}

void MockRuntime::record_canary(const std::string& sink, const std::string& marker,
                                const std::string& target,
                                std::optional<Tick> at) {
  Tick t = at.value_or(now());
  canaries_.push_back({sink, marker, target, t});
  log_.append(Value{{"type", "canary-hit"},
                    {"tick", t},
                    {"sink", sink},
                    {"marker", marker},
                    {"target", target}});
}

void MockRuntime::fire_due_scheduler_entries() {
  std::vector<std::size_t> due;
  for (std::size_t i = 0; i < schedule_.size(); ++i)
    if (!schedule_[i].fired && schedule_[i].fire_tick <= now()) due.push_back(i);
  std::sort(due.begin(), due.end(), [&](std::size_t x, std::size_t y) {
    if (schedule_[x].fire_tick != schedule_[y].fire_tick)
      return schedule_[x].fire_tick < schedule_[y].fire_tick;
    return schedule_[x].job < schedule_[y].job;
  });
  for (std::size_t i : due) {
    SchedulerEntry& e = schedule_[i];
    e.fired = true;
    log_.append(Value{{"type", "scheduler-fire"},
                      {"tick", now()},
                      {"job", e.job},
                      {"target", e.target},
                      {"scheduledFor", e.fire_tick}});
    // The hit is stamped with the tick the trigger was due, not the tick the
    // clock jump was processed at: the delivery belongs to the stored entry.
    record_canary("webhook", e.marker, e.target, e.fire_tick);
  }
}

void MockRuntime::advance_clock(Tick n) {
  if (n <= 0) return;
  clock_.advance(n);
  log_.append(Value{{"type", "clock-advance"}, {"tick", now()}, {"advanced", n}});
  fire_due_scheduler_entries();
}

void MockRuntime::shell_startup(const std::string& rc_path) {
  auto it = fs_.find(rc_path);
  if (it == fs_.end()) return;
  const std::string& content = it->second;
  std::size_t pos = 0;
  while ((pos = content.find("wake-", pos)) != std::string::npos) {
    std::size_t end = content.find_first_of(" \t\n\"'", pos);
    std::string marker =
        content.substr(pos + 5, end == std::string::npos ? std::string::npos
                                                         : end - (pos + 5));
    record_canary("fs-marker", marker, rc_path);
    pos = end == std::string::npos ? content.size() : end;
  }
}

void MockRuntime::compact_session(const std::string& session_name,
                                  std::size_t count) {
  Session& s = session(session_name);
  const auto& members = s.transcript.members();
  std::vector<ArtifactId> replaced(
      members.begin(), members.begin() + std::min(count, members.size()));
  ArtifactId id = s.transcript.compact(
      store_, count, "compacted summary of " + std::to_string(replaced.size()) +
                         " earlier turns");
  log_.append(Value{{"type", "memory-write"},
                    {"tick", now()},
                    {"session", s.name},
                    {"artifact", id},
                    {"kind", artifact_kind_name(ArtifactKind::CompactionSummary)},
                    {"inputs", Value(replaced)},
                    {"contentDigest", store_.require(id).content_digest}});
}

void MockRuntime::mark_unenumerable(const std::string& session_name,
                                    const ArtifactId& id) {
  session(session_name).transcript.mark_unenumerable(id);
}

std::string MockRuntime::render_context(const std::string& session_name) const {
  auto it = sessions_.find(session_name);
  if (it == sessions_.end())
    throw std::runtime_error("unknown session: " + session_name);
  const Session& s = it->second;
  std::string out;
  for (const ArtifactId& id : s.transcript.members()) {
    const Artifact& a = store_.require(id);
    if (cfg_.tier == Tier::D1) {
      TagSet all = a.at_source;
      all.insert(a.acquired.begin(), a.acquired.end());
      out += "[[source:";
      bool first = true;
      for (const SourceTag& t : all) {
        out += first ? " " : "; ";
        out += t.str();
        first = false;
      }
      out += "]] ";
    }
    out += a.content;
    out += "\n";
  }
  return out;
}

std::vector<GateDecision> MockRuntime::model_turn(const std::string& session_name) {
  Session& s = session(session_name);
  std::vector<GateDecision> out;
  auto entry = model_.next(s.name, render_context(session_name));
  if (!entry) return out;
  if (entry->call) {
    out.push_back(h6_tool_call(s.name, entry->call->tool, entry->call->args));
  }
  // A plain reply adds no provenance the transcript does not already carry
  // (its acquired set is exactly the union over current members), so it is
  // not appended; only emissions that dispatch become future context.
  return out;
}

IssueOutcome MockRuntime::issue_grant(const std::string& digest_hex, Tick expiry) {
  auto it = cfg_.issuer_keys.find(cfg_.owner_device);
  if (it == cfg_.issuer_keys.end()) {
    IssueOutcome out;
    out.error = "no issuer key configured for the owner pairing";
    return out;
  }
  return issue_grant_with_key(it->second, digest_hex, expiry);
}

IssueOutcome MockRuntime::issue_grant_with_key(const std::string& key_hex,
                                               const std::string& digest_hex,
                                               Tick expiry) {
  std::string nonce = random_nonce_hex(rng_);
  std::string mac = grant_mac_hex(key_hex, digest_hex, nonce, expiry);
  return issue_grant_raw(digest_hex, nonce, expiry, mac);
}

IssueOutcome MockRuntime::issue_grant_raw(const std::string& digest_hex,
                                          const std::string& nonce_hex,
                                          Tick expiry,
                                          const std::string& mac_hex) {
  IssueOutcome out = channel_->issue(digest_hex, nonce_hex, expiry, mac_hex);
  if (out.accepted) {
    log_.append(Value{{"type", "grant-issued"},
                      {"tick", now()},
                      {"digest", digest_hex},
                      {"nonce", nonce_hex},
                      {"expiry", expiry},
                      {"issuer", out.issuer->to_json()},
                      {"loadedFromJournal", false}});
  }
  return out;
}

}  // namespace provgate
