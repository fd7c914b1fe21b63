#include "provgate/event_log.hpp"

#include <fstream>

namespace provgate {

std::vector<std::string> EventLog::lines() const {
  std::vector<std::string> out;
  out.reserve(events_.size());
  for (const Value& e : events_) out.push_back(e.dump());
  return out;
}

std::string EventLog::dump() const {
  std::string out;
  for (const Value& e : events_) {
    out += e.dump();
    out += '\n';
  }
  return out;
}

bool EventLog::write_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) return false;
  f << dump();
  f.flush();
  return static_cast<bool>(f);
}

std::vector<std::string> EventLog::read_lines(const std::string& path) {
  std::vector<std::string> out;
  std::ifstream f(path, std::ios::binary);
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace provgate
