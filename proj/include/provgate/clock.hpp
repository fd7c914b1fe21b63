#pragma once

#include <cstdint>

namespace provgate {

// Logical time. One tick is one logical minute; nothing in the runtime ever
// consults wall-clock time, so replays are exact.
using Tick = std::int64_t;

class LogicalClock {
 public:
  explicit LogicalClock(Tick start = 0) : now_(start) {}

  Tick now() const { return now_; }

  void advance(Tick n) {
    if (n > 0) now_ += n;
  }

 private:
  Tick now_;
};

// Defaults shared by the grant ledger and the contact-read budget.
inline constexpr Tick kDefaultGrantTtlTicks = 15;          // 15 logical minutes
inline constexpr Tick kDefaultContactWindowTicks = 24 * 60;  // 24 hours
inline constexpr int kDefaultContactLimit = 10;

}  // namespace provgate
