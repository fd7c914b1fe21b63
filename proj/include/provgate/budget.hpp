#pragma once

#include <memory>
#include <vector>

#include "provgate/clock.hpp"
#include "provgate/grant.hpp"  // Journal

namespace provgate {

// Rate bound on contact-list reads: at most `limit` allowed reads whose
// timestamps fall in any half-open window (now - window, now]. The check is
// fail-closed: a history that cannot be read back intact counts as full and
// denies until repaired.
class ContactBudget {
 public:
  ContactBudget(int limit, Tick window, std::unique_ptr<Journal> journal = nullptr)
      : limit_(limit), window_(window), journal_(std::move(journal)) {
    if (journal_) load();
  }

  bool would_allow(Tick now) const {
    if (corrupted_) return false;
    int in_window = 0;
    for (Tick t : history_)
      if (t > now - window_ && t <= now) ++in_window;
    return in_window < limit_;
  }

  // Called only after the gate settles on allow.
  void record(Tick now) {
    if (journal_ && !journal_->append(std::to_string(now))) {
      corrupted_ = true;  // cannot persist: stop admitting reads
      return;
    }
    history_.push_back(now);
  }

  bool corrupted() const { return corrupted_; }
  int limit() const { return limit_; }
  Tick window() const { return window_; }

 private:
  void load() {
    for (const std::string& line : journal_->read_all()) {
      try {
        std::size_t used = 0;
        Tick t = std::stoll(line, &used);
        if (used != line.size()) throw std::invalid_argument(line);
        history_.push_back(t);
      } catch (...) {
        corrupted_ = true;
        return;
      }
    }
  }

  int limit_;
  Tick window_;
  std::vector<Tick> history_;
  bool corrupted_ = false;
  std::unique_ptr<Journal> journal_;
};

}  // namespace provgate
