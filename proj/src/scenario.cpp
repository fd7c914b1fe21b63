#include "provgate/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "provgate/canonical.hpp"

namespace provgate {

namespace {

// Row-major cell table, rows M1..M5, columns C0..C4.
constexpr char kCellTable[5][6] = {
    "PVOOO",  // M1
    "VPIOO",  // M2
    "VOIOO",  // M3
    "VOOOI",  // M4
    "VOOOI",  // M5
};

// Substrate rows are numbered M1..M5; separation columns start at C0 (an
// effect landing in the very session that took the content in).
int axis_index(const std::string& s, char prefix) {
  const char lo = prefix == 'C' ? '0' : '1';
  if (s.size() != 2 || s[0] != prefix || s[1] < lo || s[1] > lo + 4) return -1;
  return s[1] - lo;
}

void substitute_marker(Value& v, const std::string& marker) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::size_t pos;
    while ((pos = s.find("{{marker}}")) != std::string::npos)
      s.replace(pos, 10, marker);
    v = s;
  } else if (v.is_object() || v.is_array()) {
    for (Value& child : v) substitute_marker(child, marker);
  }
}

std::string step_name(const Value& step) {
  if (!step.is_object() || !step.contains("step") || !step.at("step").is_string())
    throw ScenarioInvalid("every step needs a string 'step' field");
  return step.at("step").get<std::string>();
}

SourceTag step_tag(const Value& step) {
  if (step.contains("tag") && step.at("tag").is_array() &&
      step.at("tag").size() == 3) {
    const Value& t = step.at("tag");
    return SourceTag{t.at(0).get<std::string>(), t.at(1).get<std::string>(),
                     t.at(2).get<std::string>()};
  }
  return SourceTag{step.value("channel", ""), step.value("principal", ""),
                   step.value("device", "")};
}

struct StepRunner {
  MockRuntime& rt;
  std::map<std::string, ArtifactId> names;

  ArtifactId resolve(const std::string& ref) const {
    auto it = names.find(ref);
    return it == names.end() ? ref : it->second;
  }

  void run(const Value& step) {
    std::string kind = step_name(step);
    if (kind == "session-start") {
      rt.start_session(step.value("session", "main"), step.value("group", false));
    } else if (kind == "h1-inbound") {
      auto ak = artifact_kind_from_name(step.value("kind", "conversation-turn"));
      if (!ak) throw ScenarioInvalid("h1-inbound: unknown artifact kind");
      const Artifact& a = rt.h1_inbound(step.value("session", ""), *ak,
                                        step_tag(step), step.value("content", ""));
      if (step.contains("saveAs")) names[step.at("saveAs").get<std::string>()] = a.id;
    } else if (kind == "owner-request") {
      const Artifact& a =
          rt.owner_request(step.value("session", "main"), step.value("text", ""));
      if (step.contains("saveAs")) names[step.at("saveAs").get<std::string>()] = a.id;
    } else if (kind == "h2-memory-write") {
      std::vector<ArtifactId> sources;
      if (step.contains("sources"))
        for (const Value& s : step.at("sources"))
          sources.push_back(resolve(s.get<std::string>()));
      const Artifact& a = rt.h2_memory_write(sources, step.value("note", ""));
      if (step.contains("saveAs")) names[step.at("saveAs").get<std::string>()] = a.id;
    } else if (kind == "h3-memory-retrieve") {
      rt.h3_memory_retrieve(step.value("session", "main"), step.value("query", ""));
    } else if (kind == "h5-skill-load") {
      std::string skill = step.value("skill", "");
      if (step.value("ifPresent", false) && !rt.skill_exists(skill)) return;
      rt.h5_skill_load(step.value("session", "main"), skill);
    } else if (kind == "model-turn") {
      int times = step.value("times", 1);
      for (int i = 0; i < times; ++i)
        rt.model_turn(step.value("session", "main"));
    } else if (kind == "advance-clock") {
      rt.advance_clock(step.value("ticks", Tick{1}));
    } else if (kind == "shell-startup") {
      rt.shell_startup(step.value("rcPath", ""));
    } else if (kind == "issue-grant") {
      Tick delta = step.value("expiryDelta", kDefaultGrantTtlTicks);
      std::string digest = step.value("digest", "");
      if (step.value("fromLastDeny", false)) {
        for (auto it = rt.decisions().rbegin(); it != rt.decisions().rend(); ++it) {
          if (!it->allow && !it->digest_hex.empty()) {
            digest = it->digest_hex;
            break;
          }
        }
      }
      if (digest.empty())
        throw ScenarioInvalid("issue-grant: no digest available");
      rt.issue_grant(digest, rt.now() + delta);
    } else if (kind == "compact") {
      rt.compact_session(step.value("session", "main"),
                         step.value("count", std::size_t{1}));
    } else if (kind == "mark-unenumerable") {
      rt.mark_unenumerable(step.value("session", "main"),
                           resolve(step.value("artifact", "")));
    } else {
      throw ScenarioInvalid("unknown step: " + kind);
    }
  }
};

ScriptEntry parse_script_entry(const Value& e) {
  ScriptEntry out;
  out.when_contains = e.value("whenContains", "");
  out.session = e.value("session", "");
  out.once = e.value("once", true);
  if (e.contains("tool")) {
    EmittedCall call;
    call.tool = e.at("tool").get<std::string>();
    if (e.contains("args")) call.args = e.at("args");
    out.call = std::move(call);
  } else {
    out.reply = e.value("reply", "");
  }
  return out;
}

int count_sink(const std::vector<CanaryHit>& hits, const std::string& sink) {
  int n = 0;
  for (const CanaryHit& h : hits)
    if (h.sink == sink) ++n;
  return n;
}

}  // namespace

char cell_class(const std::string& substrate, const std::string& separation) {
  int r = axis_index(substrate, 'M');
  int c = axis_index(separation, 'C');
  if (r < 0 || c < 0) return '\0';
  return kCellTable[r][c];
}

std::string scenario_marker(const std::string& id, std::uint64_t seed) {
  return id + "-" + std::to_string(seed);
}

Scenario parse_scenario(const Value& doc, std::uint64_t seed) {
  if (!doc.is_object()) throw ScenarioInvalid("scenario document must be an object");
  Scenario sc;
  sc.raw = doc;
  if (!doc.contains("id") || !doc.at("id").is_string())
    throw ScenarioInvalid("scenario needs a string id");
  sc.id = doc.at("id").get<std::string>();

  Value body = doc;
  substitute_marker(body, scenario_marker(sc.id, seed));

  sc.title = body.value("title", sc.id);
  if (!body.contains("cell") || !body.at("cell").is_object())
    throw ScenarioInvalid("scenario needs a cell{substrate,separation} object");
  sc.substrate = body.at("cell").value("substrate", "");
  sc.separation = body.at("cell").value("separation", "");
  char cls = cell_class(sc.substrate, sc.separation);
  if (cls == '\0')
    throw ScenarioInvalid("unknown cell coordinates " + sc.substrate + "x" +
                          sc.separation);
  if (cls == 'V')
    throw ScenarioVacuous("cell " + sc.substrate + "x" + sc.separation +
                          " is vacuous: nothing coherent can run there");

  auto prof = profile_from_name(body.value("profile", ""));
  if (!prof) throw ScenarioInvalid("scenario needs a profile (p0|p1|p2)");
  sc.profile = *prof;
  sc.group_workspace_bridge = body.value("groupWorkspaceBridge", false);
  sc.dwell_ticks = body.value("dwellTicks", Tick{0});
  if (sc.dwell_ticks < 0) throw ScenarioInvalid("dwellTicks must be >= 0");
  sc.trigger = body.value("trigger", "");

  if (body.contains("trust"))
    for (const Value& p : body.at("trust")) {
      if (!p.is_array() || p.size() != 2)
        throw ScenarioInvalid("trust entries are [principal, device] pairs");
      sc.extra_trust.emplace_back(p.at(0).get<std::string>(),
                                  p.at(1).get<std::string>());
    }

  for (const Value& s : body.value("intakeSteps", Value::array()))
    sc.intake_steps.push_back(s);
  for (const Value& s : body.value("triggerSteps", Value::array()))
    sc.trigger_steps.push_back(s);
  for (const Value& s : body.value("modelScript", Value::array()))
    sc.model_script.push_back(s);
  if (body.contains("expected")) {
    if (!body.at("expected").is_object())
      throw ScenarioInvalid("expected must map tier names to blocks");
    for (auto it = body.at("expected").begin(); it != body.at("expected").end(); ++it)
      sc.expected[it.key()] = it.value();
  }

  // Dormancy discipline: with a declared dwell gap, the trigger phase must
  // not smuggle in fresh untrusted input — the whole point is that the
  // payload already sits in durable state when the trigger lands.
  if (sc.dwell_ticks > 0) {
    TrustSet trust = TrustSet::owner_only();
    for (const auto& [p, d] : sc.extra_trust) trust.add(PrincipalDevice{p, d});
    for (const Value& s : sc.trigger_steps) {
      if (step_name(s) != "h1-inbound") continue;
      if (!trust.contains(step_tag(s)))
        throw ScenarioInvalid(
            "dormancy broken: untrusted intake inside the trigger phase");
    }
  }
  return sc;
}

Scenario load_scenario(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioInvalid("cannot read scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  Value doc;
  try {
    doc = parse_json(buf.str());
  } catch (const CanonicalError& e) {
    throw ScenarioInvalid("scenario file is not valid JSON: " +
                          std::string(e.what()));
  }
  return parse_scenario(doc, seed);
}

RunOutcome run_scenario(const Scenario& sc, Tier tier, std::uint64_t seed,
                        const std::string& journal_dir, bool check_expectations) {
  RuntimeConfig cfg;
  cfg.profile = sc.profile;
  cfg.tier = tier;
  cfg.seed = seed;
  cfg.group_workspace_bridge = sc.group_workspace_bridge;
  cfg.run_marker = scenario_marker(sc.id, seed);
  cfg.journal_dir = journal_dir;
  for (const auto& [p, d] : sc.extra_trust) cfg.trust.add(PrincipalDevice{p, d});

  MockRuntime rt(cfg);
  for (const Value& e : sc.model_script) rt.model().add(parse_script_entry(e));

  StepRunner runner{rt, {}};
  for (const Value& s : sc.intake_steps) runner.run(s);
  if (sc.dwell_ticks > 0) rt.advance_clock(sc.dwell_ticks);
  for (const Value& s : sc.trigger_steps) runner.run(s);

  RunOutcome out;
  out.marker = cfg.run_marker;
  out.canaries = rt.canaries();
  out.decisions = rt.decisions();
  out.log_lines = rt.log().lines();
  out.trust = rt.config().trust.to_json();

  int allows = 0, denies = 0, dispatches = 0;
  std::map<std::string, int> deny_reasons;
  for (const GateDecision& d : rt.decisions()) {
    if (d.allow)
      ++allows;
    else {
      ++denies;
      ++deny_reasons[deny_reason_code(d.reason)];
    }
  }
  for (const Value& e : rt.log().events())
    if (e.value("type", "") == "dispatch") ++dispatches;

  std::string tname = tier_name(tier);
  auto exp_it = sc.expected.find(tname);
  if (check_expectations && exp_it != sc.expected.end()) {
    out.expectations_checked = true;
    const Value& exp = exp_it->second;

    if (exp.contains("canaries") && exp.at("canaries").is_object()) {
      for (auto it = exp.at("canaries").begin(); it != exp.at("canaries").end();
           ++it) {
        int want = it.value().get<int>();
        int got = count_sink(out.canaries, it.key());
        if (got != want)
          out.failures.push_back("sink '" + it.key() + "': expected " +
                                 std::to_string(want) + " hits, saw " +
                                 std::to_string(got));
      }
    }
    if (exp.contains("totalCanaries")) {
      int want = exp.at("totalCanaries").get<int>();
      if (static_cast<int>(out.canaries.size()) != want)
        out.failures.push_back("total canary hits: expected " +
                               std::to_string(want) + ", saw " +
                               std::to_string(out.canaries.size()));
    }
    if (exp.contains("markerHits")) {
      int want = exp.at("markerHits").get<int>();
      int got = 0;
      for (const CanaryHit& h : out.canaries)
        if (h.marker == out.marker) ++got;
      if (got != want)
        out.failures.push_back("marker-attributed hits: expected " +
                               std::to_string(want) + ", saw " +
                               std::to_string(got));
    }
    if (exp.contains("denyReasons")) {
      for (const Value& r : exp.at("denyReasons")) {
        std::string code = r.get<std::string>();
        if (!deny_reasons.count(code))
          out.failures.push_back("expected a deny with reason '" + code + "'");
      }
    }
    if (exp.contains("denyTagsInclude")) {
      for (const Value& t : exp.at("denyTagsInclude")) {
        std::string needle = t.get<std::string>();
        bool found = false;
        for (const GateDecision& d : rt.decisions())
          if (!d.allow && d.detail.find(needle) != std::string::npos) found = true;
        if (!found)
          out.failures.push_back("no deny detail mentions '" + needle + "'");
      }
    }
    if (exp.contains("dispatches")) {
      int want = exp.at("dispatches").get<int>();
      if (dispatches != want)
        out.failures.push_back("dispatch count: expected " +
                               std::to_string(want) + ", saw " +
                               std::to_string(dispatches));
    }
    if (exp.contains("deniesAtLeast")) {
      int want = exp.at("deniesAtLeast").get<int>();
      if (denies < want)
        out.failures.push_back("deny count: expected at least " +
                               std::to_string(want) + ", saw " +
                               std::to_string(denies));
    }
    if (exp.contains("contextContains")) {
      for (const Value& c : exp.at("contextContains")) {
        std::string needle = c.get<std::string>();
        bool found = false;
        for (const std::string& name : {std::string("main"), std::string("group")})
          if (rt.has_session(name) &&
              rt.render_context(name).find(needle) != std::string::npos)
            found = true;
        if (!found)
          out.failures.push_back("no session context contains '" + needle + "'");
      }
    }
    out.expectations_ok = out.failures.empty();
  }

  Value reasons = Value::object();
  for (const auto& [code, n] : deny_reasons) reasons[code] = n;
  Value deny_details = Value::array();
  for (const GateDecision& d : rt.decisions())
    if (!d.allow)
      deny_details.push_back(Value{{"reason", deny_reason_code(d.reason)},
                                   {"detail", d.detail},
                                   {"digest", d.digest_hex.empty()
                                                  ? Value(nullptr)
                                                  : Value(d.digest_hex)}});
  Value canaries = Value::array();
  for (const CanaryHit& h : out.canaries)
    canaries.push_back(Value{{"sink", h.sink},
                             {"marker", h.marker},
                             {"target", h.target},
                             {"tick", h.tick}});
  Value failures = Value::array();
  for (const std::string& f : out.failures) failures.push_back(f);

  out.report = Value{
      {"scenario", sc.id},
      {"title", sc.title},
      {"cell",
       Value{{"substrate", sc.substrate},
             {"separation", sc.separation},
             {"class", std::string(1, cell_class(sc.substrate, sc.separation))}}},
      {"tier", tname},
      {"profile", profile_name(sc.profile)},
      {"seed", seed},
      {"marker", out.marker},
      {"trust", out.trust},
      {"counts", Value{{"events", rt.log().events().size()},
                       {"allows", allows},
                       {"denies", denies},
                       {"dispatches", dispatches},
                       {"canaries", out.canaries.size()}}},
      {"denyReasons", reasons},
      {"denies", deny_details},
      {"canaryHits", canaries},
      {"expectations", Value{{"checked", out.expectations_checked},
                             {"ok", out.expectations_ok},
                             {"failures", failures}}}};
  return out;
}

ProbeOutcome run_probe(const std::string& fixture_path, Tier tier,
                       std::uint64_t seed) {
  std::ifstream in(fixture_path, std::ios::binary);
  if (!in) throw ScenarioInvalid("cannot read probe fixture: " + fixture_path);
  std::stringstream buf;
  buf << in.rdbuf();
  Value doc = parse_json(buf.str());
  if (!doc.is_object() || !doc.contains("emissions"))
    throw ScenarioInvalid("probe fixture needs an emissions array");

  RuntimeConfig cfg;
  cfg.profile = Profile::P2;
  cfg.tier = tier;
  cfg.seed = seed;
  cfg.run_marker = doc.value("id", "probe") + "-" + std::to_string(seed);
  MockRuntime rt(cfg);
  rt.start_session("main");
  if (doc.contains("intake") && doc.at("intake").is_object()) {
    const Value& i = doc.at("intake");
    auto ak = artifact_kind_from_name(i.value("kind", "conversation-turn"));
    rt.h1_inbound("main", ak.value_or(ArtifactKind::ConversationTurn),
                  SourceTag{i.value("channel", "email-inbound"),
                            i.value("principal", "attacker"),
                            i.value("device", "unknown-device")},
                  i.value("content", "probe instruction"));
  }

  ProbeOutcome out;
  out.id = doc.value("id", "probe");
  for (const Value& e : doc.at("emissions")) {
    ++out.total;
    std::string type = e.value("type", "");
    if (type == "attacker-call") {
      ++out.attacker_calls;
      GateDecision d = rt.h6_tool_call("main", e.value("tool", ""),
                                       e.value("args", Value::object()));
      if (d.allow)
        ++out.dispatched;
      else
        ++out.denied;
    } else {
      // Refusals and degenerate emissions ("{}", prose) never become
      // actions: nothing reaches the funnel, nothing dispatches.
      ++out.non_actions;
    }
  }
  return out;
}

bool canary_subset(const std::vector<CanaryHit>& stronger,
                   const std::vector<CanaryHit>& weaker) {
  std::multiset<std::tuple<std::string, std::string, std::string>> pool;
  for (const CanaryHit& h : weaker) pool.insert({h.sink, h.marker, h.target});
  for (const CanaryHit& h : stronger) {
    auto it = pool.find({h.sink, h.marker, h.target});
    if (it == pool.end()) return false;
    pool.erase(it);
  }
  return true;
}

}  // namespace provgate
