// provgate — provenance-gated mock agent runtime driver.
//
// Subcommands:
//   run         replay a scenario under a tier, write the event log/report
//   issue-grant sign and store a one-shot approval for an instance digest
//   inspect     reconstruct artifact provenance from an event log
//   matrix      show the substrate/separation cell table and local coverage
//   verify-log  audit an event log with the independent replayer
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "logreplay/replay.hpp"
#include "provgate/canonical.hpp"
#include "provgate/digest.hpp"
#include "provgate/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitVacuous = 3;
constexpr int kExitProfileMismatch = 4;
constexpr int kExitExpectationFailure = 5;
constexpr int kExitVerifyFailed = 6;
constexpr int kExitUntrustedIssuer = 7;
constexpr int kExitDeclined = 8;

std::string journal_from(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("PROVGATE_JOURNAL");
  return env ? env : "";
}

std::vector<std::pair<std::string, std::string>> parse_trust_pairs(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& s : raw) {
    auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
      throw CLI::ValidationError("--trust-pair", "expected principal:device");
    out.emplace_back(s.substr(0, colon), s.substr(colon + 1));
  }
  if (out.empty())
    out.emplace_back(provgate::kOwnerTag.principal, provgate::kOwnerTag.device);
  return out;
}

std::vector<std::pair<std::string, std::string>> trust_pairs_from_json(
    const provgate::Value& trust) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const provgate::Value& p : trust)
    out.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  return out;
}

// Runs one tier of a loaded scenario; prints a one-line verdict row and
// returns the exit status for that tier.
int run_one_tier(const provgate::Scenario& sc, provgate::Tier tier,
                 std::uint64_t seed, const std::string& out_path,
                 const std::string& report_path, const std::string& journal,
                 bool no_expect) {
  provgate::RunOutcome outcome;
  try {
    outcome = provgate::run_scenario(sc, tier, seed, journal, !no_expect);
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitUsage;
  }

  auto replay = logreplay::check(outcome.log_lines,
                                 trust_pairs_from_json(outcome.trust));
  outcome.report["replay"] =
      provgate::Value{{"verdict", logreplay::verdict_name(replay.verdict)},
                      {"dispatchesChecked", replay.dispatches_checked},
                      {"violations", replay.violations.size()}};

  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    for (const std::string& line : outcome.log_lines) f << line << "\n";
    if (!f) {
      std::cerr << "cannot write log: " << out_path << "\n";
      return kExitUsage;
    }
  }
  if (!report_path.empty()) {
    std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
    f << outcome.report.dump(2) << "\n";
    if (!f) {
      std::cerr << "cannot write report: " << report_path << "\n";
      return kExitUsage;
    }
  }

  int denies = 0;
  std::string first_reason;
  for (const auto& d : outcome.decisions) {
    if (d.allow) continue;
    ++denies;
    if (first_reason.empty()) first_reason = provgate::deny_reason_code(d.reason);
  }
  std::cout << "  " << provgate::tier_name(tier) << "   canaries "
            << outcome.canaries.size() << "   denies " << denies;
  if (!first_reason.empty()) std::cout << " (" << first_reason << ")";
  std::cout << "   replay " << logreplay::verdict_name(replay.verdict);
  if (outcome.expectations_checked)
    std::cout << "   expected "
              << (outcome.expectations_ok ? "ok" : "MISMATCH");
  std::cout << "\n";
  for (const std::string& fmsg : outcome.failures)
    std::cout << "      expectation failed: " << fmsg << "\n";

  if (outcome.expectations_checked && !outcome.expectations_ok)
    return kExitExpectationFailure;
  return kExitOk;
}

int cmd_run(const std::string& scenario_path, const std::string& tier_name_arg,
            const std::string& profile_arg, std::uint64_t seed,
            const std::string& out_path, const std::string& report_path,
            const std::string& journal, bool no_expect) {
  provgate::Scenario sc;
  try {
    sc = provgate::load_scenario(scenario_path, seed);
  } catch (const provgate::ScenarioVacuous& e) {
    std::cerr << "vacuous cell: " << e.what() << "\n";
    return kExitVacuous;
  } catch (const std::exception& e) {
    std::cerr << "cannot load scenario: " << e.what() << "\n";
    return kExitUsage;
  }

  if (!profile_arg.empty()) {
    auto prof = provgate::profile_from_name(profile_arg);
    if (!prof) {
      std::cerr << "unknown profile: " << profile_arg << "\n";
      return kExitUsage;
    }
    if (*prof != sc.profile) {
      std::cerr << "profile mismatch: scenario '" << sc.id << "' requires "
                << provgate::profile_name(sc.profile) << ", runner asked for "
                << provgate::profile_name(*prof) << "\n";
      return kExitProfileMismatch;
    }
  }

  std::vector<provgate::Tier> tiers;
  if (tier_name_arg.empty()) {
    tiers = {provgate::Tier::D0, provgate::Tier::D1, provgate::Tier::D2};
  } else {
    auto tier = provgate::tier_from_name(tier_name_arg);
    if (!tier) {
      std::cerr << "unknown tier: " << tier_name_arg << "\n";
      return kExitUsage;
    }
    tiers = {*tier};
  }
  const bool multi = tiers.size() > 1;

  std::cout << "scenario " << sc.id << " (" << sc.substrate << "x"
            << sc.separation << ", profile "
            << provgate::profile_name(sc.profile) << ") seed " << seed << "\n";
  int rc = kExitOk;
  for (provgate::Tier tier : tiers) {
    std::string out = out_path;
    std::string report = report_path;
    if (multi) {
      // One file per tier so a full-table run keeps every log.
      if (!out.empty()) out += std::string(".") + provgate::tier_name(tier);
      if (!report.empty())
        report += std::string(".") + provgate::tier_name(tier);
    }
    int tier_rc =
        run_one_tier(sc, tier, seed, out, report, journal, no_expect);
    if (rc == kExitOk) rc = tier_rc;
  }
  return rc;
}

int cmd_issue_grant(const std::string& digest_arg, const std::string& from_deny,
                    std::int64_t expiry_arg, std::int64_t now_arg,
                    const std::string& issuer_key_path,
                    const std::string& journal_arg, std::uint64_t seed,
                    const std::vector<std::string>& trust_pair_args,
                    bool assume_yes) {
  std::string journal = journal_from(journal_arg);
  if (journal.empty()) {
    std::cerr << "issue-grant needs --journal (or PROVGATE_JOURNAL): grants "
                 "must outlive this process to be consumable\n";
    return kExitUsage;
  }
  std::filesystem::create_directories(journal);

  std::string digest = digest_arg;
  std::int64_t now = now_arg;
  provgate::Value deny_event;
  if (!from_deny.empty()) {
    auto colon = from_deny.rfind(':');
    if (colon == std::string::npos) {
      std::cerr << "--from-deny wants LOGPATH:LINE\n";
      return kExitUsage;
    }
    std::string path = from_deny.substr(0, colon);
    std::size_t index = 0;
    try {
      index = std::stoull(from_deny.substr(colon + 1));
    } catch (...) {
      std::cerr << "--from-deny wants LOGPATH:LINE\n";
      return kExitUsage;
    }
    auto lines = provgate::EventLog::read_lines(path);
    if (index >= lines.size()) {
      std::cerr << "log has only " << lines.size() << " line(s)\n";
      return kExitUsage;
    }
    provgate::Value e;
    try {
      e = provgate::parse_json(lines[index]);
    } catch (const std::exception& ex) {
      std::cerr << "line " << index << " is not JSON: " << ex.what() << "\n";
      return kExitUsage;
    }
    if (e.value("type", "") != "gate-decision" || e.value("verdict", "") != "deny" ||
        !e.contains("digest") || !e.at("digest").is_string()) {
      std::cerr << "line " << index
                << " is not a deny decision with an instance digest\n";
      return kExitUsage;
    }
    digest = e.at("digest").get<std::string>();
    if (now_arg < 0) now = e.value("tick", std::int64_t{0});
    deny_event = e;
  }
  if (now < 0) now = 0;
  if (digest.empty()) {
    std::cerr << "nothing to approve: give --digest or --from-deny\n";
    return kExitUsage;
  }
  std::int64_t expiry =
      expiry_arg >= 0 ? expiry_arg : now + provgate::kDefaultGrantTtlTicks;

  if (!deny_event.is_null()) {
    // What gets signed is the exact instance the gate refused. Show the whole
    // preimage so the approver reviews the real bytes, not a summary that an
    // injected instruction could have shaped.
    std::cout << "about to approve one dispatch of this exact instance:\n";
    if (deny_event.contains("action"))
      std::cout << "  action: " << deny_event.at("action").dump() << "\n";
    std::cout << "  reason at deny: " << deny_event.value("reason", "") << "\n";
    if (deny_event.contains("detail"))
      std::cout << "  detail: " << deny_event.value("detail", "") << "\n";
    if (deny_event.contains("preimage"))
      std::cout << "  preimage: " << deny_event.value("preimage", "") << "\n";
    std::cout << "  digest: " << digest << "\n  expires at tick: " << expiry
              << "\n";
    if (!assume_yes) {
      std::cout << "issue this one-shot grant? [y/N] " << std::flush;
      std::string answer;
      std::getline(std::cin, answer);
      if (answer != "y" && answer != "Y" && answer != "yes") {
        std::cerr << "declined; nothing was issued\n";
        return kExitDeclined;
      }
    }
  }

  provgate::PrincipalDevice issuer{provgate::kOwnerTag.principal,
                                   provgate::kOwnerTag.device};
  std::string key_hex = provgate::kOwnerIssuerKeyHex;
  if (!issuer_key_path.empty()) {
    std::ifstream f(issuer_key_path, std::ios::binary);
    if (!f) {
      std::cerr << "cannot read issuer key file: " << issuer_key_path << "\n";
      return kExitUsage;
    }
    std::stringstream buf;
    buf << f.rdbuf();
    try {
      provgate::Value k = provgate::parse_json(buf.str());
      issuer = provgate::PrincipalDevice{k.at("principal").get<std::string>(),
                                         k.at("device").get<std::string>()};
      key_hex = k.at("keyHex").get<std::string>();
    } catch (const std::exception& e) {
      std::cerr << "issuer key file is malformed: " << e.what() << "\n";
      return kExitUsage;
    }
  }

  provgate::TrustSet trust = provgate::TrustSet::owner_only();
  for (const auto& [p, d] : parse_trust_pairs(trust_pair_args))
    trust.add(provgate::PrincipalDevice{p, d});

  auto ledger = provgate::NonceLedger::at_directory(journal);
  std::map<provgate::PrincipalDevice, std::string> keys{{issuer, key_hex}};
  provgate::CompanionChannel channel(keys, &trust, ledger.get());

  std::mt19937_64 rng(seed);
  std::string nonce = provgate::random_nonce_hex(rng);
  std::string mac = provgate::grant_mac_hex(key_hex, digest, nonce, expiry);
  provgate::IssueOutcome out = channel.issue(digest, nonce, expiry, mac);
  if (!out.accepted) {
    std::cerr << "grant refused: " << out.error << "\n";
    if (out.error.find("not trusted") != std::string::npos)
      return kExitUntrustedIssuer;
    return kExitUsage;
  }
  provgate::Grant g{digest, nonce, expiry, *out.issuer, mac};
  std::cout << g.to_json().dump(2) << "\n";
  return kExitOk;
}

int cmd_inspect(const std::string& log_path, const std::string& artifact_id) {
  std::vector<std::string> lines;
  try {
    lines = provgate::EventLog::read_lines(log_path);
  } catch (const std::exception& e) {
    std::cerr << "cannot read log: " << e.what() << "\n";
    return kExitUsage;
  }
  auto artifacts = logreplay::build_artifacts(lines);
  if (!artifact_id.empty()) {
    auto it = artifacts.find(artifact_id);
    if (it == artifacts.end()) {
      std::cerr << "no creation event for artifact '" << artifact_id << "'\n";
      return kExitUsage;
    }
    const auto& a = it->second;
    std::cout << a.id << " kind=" << a.kind << " created-at-line=" << a.line
              << "\n";
    for (const auto& t : a.tags)
      std::cout << "  tag " << t[0] << "/" << t[1] << "/" << t[2] << "\n";
    return kExitOk;
  }
  for (const auto& [id, a] : artifacts) {
    std::cout << id << " kind=" << a.kind << " tags=";
    bool first = true;
    for (const auto& t : a.tags) {
      if (!first) std::cout << ",";
      first = false;
      std::cout << t[0] << "/" << t[1] << "/" << t[2];
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_matrix(const std::string& scenario_dir, std::uint64_t seed) {
  const char* subs[5] = {"M1 conversation", "M2 memory store",
                         "M3 skill/plugin store", "M4 host config",
                         "M5 scheduler state"};
  std::cout << "cell classes: P primary, I in-scope, O out-of-scope (runnable), "
               "V vacuous (refused)\n\n        C0   C1   C2   C3   C4\n";
  for (int r = 0; r < 5; ++r) {
    std::cout << "  M" << (r + 1) << "   ";
    for (int c = 0; c < 5; ++c) {
      std::string m = "M" + std::to_string(r + 1);
      std::string cc = "C" + std::to_string(c);
      std::cout << "  " << provgate::cell_class(m, cc) << "  ";
    }
    std::cout << "  " << subs[r] << "\n";
  }
  std::cout << "\n";
  if (!scenario_dir.empty() && std::filesystem::is_directory(scenario_dir)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(scenario_dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        provgate::Scenario sc = provgate::load_scenario(f.string(), seed);
        std::cout << "  " << sc.id << "  " << sc.substrate << "x" << sc.separation
                  << " (" << provgate::cell_class(sc.substrate, sc.separation)
                  << ")  profile " << provgate::profile_name(sc.profile) << "  "
                  << sc.title << "\n";
      } catch (const std::exception& e) {
        std::cout << "  " << f.filename().string() << "  unloadable: " << e.what()
                  << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_verify_log(const std::string& log_path,
                   const std::vector<std::string>& trust_pair_args) {
  std::vector<std::string> lines;
  try {
    lines = provgate::EventLog::read_lines(log_path);
  } catch (const std::exception& e) {
    std::cerr << "cannot read log: " << e.what() << "\n";
    return kExitUsage;
  }
  auto pairs = parse_trust_pairs(trust_pair_args);
  auto res = logreplay::check(lines, pairs);
  std::cout << "verdict: " << logreplay::verdict_name(res.verdict) << " ("
            << res.dispatches_checked << " dispatch(es) checked, "
            << res.grants_seen << " grant(s) seen)\n";
  for (const auto& v : res.violations)
    std::cout << "  line " << v.line << " [" << v.code << "] " << v.detail
              << "\n";
  return res.verdict == logreplay::Verdict::Pass ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"provenance-gated mock agent runtime"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "replay a scenario under a tier");
  std::string scenario_path, tier, profile, out_path, report_path, journal;
  std::uint64_t seed = 1;
  bool no_expect = false;
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--tier", tier,
                  "d0|d1|d2|d3 (omit to run d0, d1 and d2 as a table)");
  run->add_option("--profile", profile, "require this runtime profile");
  run->add_option("--seed", seed, "deterministic seed");
  run->add_option("--out", out_path, "write the event log here");
  run->add_option("--report", report_path, "write the run report here");
  run->add_option("--journal", journal, "grant/budget journal directory");
  run->add_flag("--no-expect", no_expect, "skip expectation assertions");

  // issue-grant
  auto* ig = app.add_subcommand("issue-grant",
                                "sign and store a one-shot approval");
  std::string digest, from_deny, issuer_key, ig_journal;
  std::int64_t expiry = -1, now = -1;
  std::uint64_t ig_seed = 1;
  std::vector<std::string> ig_trust;
  ig->add_option("--digest", digest, "instance digest (64 hex chars)");
  ig->add_option("--from-deny", from_deny,
                 "LOGPATH:LINE of a deny decision to approve");
  ig->add_option("--expiry", expiry, "absolute expiry tick");
  ig->add_option("--now", now, "current tick (defaults to the deny's tick)");
  ig->add_option("--issuer-key", issuer_key,
                 "JSON file {principal,device,keyHex}");
  ig->add_option("--journal", ig_journal,
                 "journal directory (or PROVGATE_JOURNAL)");
  ig->add_option("--seed", ig_seed, "nonce RNG seed");
  ig->add_option("--trust-pair", ig_trust, "trusted principal:device pairing");
  bool ig_yes = false;
  ig->add_flag("--yes", ig_yes, "skip the interactive review confirmation");

  // inspect
  auto* ins = app.add_subcommand("inspect", "reconstruct artifact provenance");
  std::string ins_log, ins_artifact;
  ins->add_option("--log", ins_log, "event log file")->required();
  ins->add_option("--artifact", ins_artifact, "show one artifact");

  // matrix
  auto* mx = app.add_subcommand("matrix", "cell table and scenario coverage");
  std::string mx_dir = "scenarios";
  std::uint64_t mx_seed = 1;
  mx->add_option("--scenario-dir", mx_dir, "directory of scenario files");
  mx->add_option("--seed", mx_seed, "seed used when loading scenarios");

  // verify-log
  auto* vf = app.add_subcommand("verify-log", "audit a run log independently");
  std::string vf_log;
  std::vector<std::string> vf_trust;
  vf->add_option("--log", vf_log, "event log file")->required();
  vf->add_option("--trust-pair", vf_trust,
                 "trusted principal:device pairing (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed())
      return cmd_run(scenario_path, tier, profile, seed, out_path, report_path,
                     journal_from(journal), no_expect);
    if (ig->parsed())
      return cmd_issue_grant(digest, from_deny, expiry, now, issuer_key,
                             ig_journal, ig_seed, ig_trust, ig_yes);
    if (ins->parsed()) return cmd_inspect(ins_log, ins_artifact);
    if (mx->parsed()) return cmd_matrix(mx_dir, mx_seed);
    if (vf->parsed()) return cmd_verify_log(vf_log, vf_trust);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
