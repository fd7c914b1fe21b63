#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace testsupport {

// Aggregate over a batch of randomized end-to-end runs, each of which is
// executed twice: once bare, once with one-shot approvals injected for a
// random subset of the denials the first pass produced (random expiry,
// including already-expired). Both passes' event logs are audited by the
// standalone replayer; any verdict other than a clean pass is a failure.
struct FuzzSummary {
  int runs = 0;
  int failed = 0;
  std::vector<std::string> failures;  // capped at 20 entries
  long long dispatches_checked = 0;
  long long grants_seen = 0;
  long long attested_allows = 0;
  long long denies = 0;
  int negative_controls = 0;           // deliberately corrupted logs audited
  int negative_controls_detected = 0;  // of those, how many were flagged
};

// Runs `runs` randomized programs starting at seed0 (seed0, seed0+1, ...).
// When negative_every > 0, every negative_every-th run additionally tampers
// with its own log and requires the auditor to notice.
FuzzSummary fuzz_soundness(int runs, std::uint64_t seed0, int negative_every = 0);

}  // namespace testsupport
