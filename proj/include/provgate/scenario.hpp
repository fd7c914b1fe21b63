#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "provgate/runtime.hpp"

namespace provgate {

// Substrate rows (M1 conversation context, M2 memory store, M3 skill/plugin
// store, M4 host config, M5 scheduler state) crossed with separation columns
// (C0 same session, C1 a later session, C2 another channel, C3 another
// actor, C4 another execution context). Each cell is one of:
//   'P' accepted, primary coverage
//   'I' accepted, in scope
//   'O' runnable but flagged as outside the primary threat cut
//   'V' vacuous: the combination is internally contradictory, refuse to run
// Unknown coordinates return '\0'.
char cell_class(const std::string& substrate, const std::string& separation);

struct ScenarioVacuous : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScenarioInvalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A declarative sleeper-channel exercise: plant phase steps, a dormancy gap,
// trigger phase steps, a scripted model, and per-tier expectations.
struct Scenario {
  std::string id;
  std::string title;
  std::string substrate;    // "M1".."M5"
  std::string separation;   // "C0".."C4"
  Profile profile = Profile::P1;
  bool group_workspace_bridge = false;
  Tick dwell_ticks = 0;
  std::string trigger;
  std::vector<std::pair<std::string, std::string>> extra_trust;  // principal, device
  std::vector<Value> intake_steps;
  std::vector<Value> trigger_steps;
  std::vector<Value> model_script;
  std::map<std::string, Value> expected;  // tier name -> expectation block
  Value raw;
};

// The attribution marker substituted for {{marker}} throughout a scenario.
std::string scenario_marker(const std::string& id, std::uint64_t seed);

Scenario parse_scenario(const Value& doc, std::uint64_t seed);
Scenario load_scenario(const std::string& path, std::uint64_t seed);

struct RunOutcome {
  bool expectations_checked = false;
  bool expectations_ok = true;
  std::vector<std::string> failures;
  std::string marker;
  std::vector<CanaryHit> canaries;
  std::vector<GateDecision> decisions;
  std::vector<std::string> log_lines;
  Value trust;   // the trust set the run used (verifier input)
  Value report;  // deterministic summary document
};

RunOutcome run_scenario(const Scenario& sc, Tier tier, std::uint64_t seed,
                        const std::string& journal_dir = std::string(),
                        bool check_expectations = true);

// Refusal-probe fixtures: a fixed list of model emissions replayed through
// the funnel to measure how little the dispatch boundary cares about model
// cooperation.
struct ProbeOutcome {
  std::string id;
  int total = 0;
  int attacker_calls = 0;   // well-formed hostile emissions
  int non_actions = 0;      // refusals and degenerate text
  int dispatched = 0;
  int denied = 0;
};

ProbeOutcome run_probe(const std::string& fixture_path, Tier tier,
                       std::uint64_t seed);

// Containment comparator on canary identity (sink, marker, target):
// true when every hit in `stronger` also appears in `weaker`.
bool canary_subset(const std::vector<CanaryHit>& stronger,
                   const std::vector<CanaryHit>& weaker);

}  // namespace provgate
