#pragma once

#include <set>
#include <string>
#include <vector>

namespace testsupport {

// One named decision-procedure exercise. `deny_codes` collects the reason
// codes the case asserted on, so callers can verify the suite as a whole
// touches every reason the gate can produce.
struct GateCaseResult {
  std::string name;
  bool passed = false;
  std::string message;  // first failed expectation, empty when passed
  std::set<std::string> deny_codes;
};

// Runs the whole table against fresh in-memory worlds. Never throws; an
// escaped exception inside a case is reported as that case failing.
std::vector<GateCaseResult> run_gate_cases();

}  // namespace testsupport
