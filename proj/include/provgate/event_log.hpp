#pragma once

#include <string>
#include <vector>

#include "provgate/value.hpp"

namespace provgate {

// Append-only JSON-lines event record of a run. Events are emitted in the
// exact order the single-threaded loop produced them; serialization is
// key-sorted, so identical runs yield byte-identical logs.
//
// Event types: intake, memory-write, memory-retrieve, skill-write,
// skill-load, tool-call, gate-decision, dispatch, scheduler-fire,
// canary-hit, grant-issued, nonce-consumed, clock-advance.
class EventLog {
 public:
  void append(Value event) { events_.push_back(std::move(event)); }

  const std::vector<Value>& events() const { return events_; }

  std::vector<std::string> lines() const;
  std::string dump() const;  // newline-joined, trailing newline
  bool write_file(const std::string& path) const;

  static std::vector<std::string> read_lines(const std::string& path);

 private:
  std::vector<Value> events_;
};

}  // namespace provgate
