#pragma once

#include <compare>
#include <set>
#include <string>

#include "provgate/value.hpp"

namespace provgate {

// Identity of where a byte string entered the system: the ingress channel,
// the sending principal, and the device the principal used. Tags are minted
// by ingress adapters from transport metadata, never from message content,
// so a payload claiming to be from the owner still carries its real origin.
struct SourceTag {
  std::string channel;
  std::string principal;
  std::string device;

  auto operator<=>(const SourceTag&) const = default;

  bool valid() const {
    return !channel.empty() && !principal.empty() && !device.empty();
  }

  std::string str() const { return channel + "/" + principal + "/" + device; }

  Value to_json() const {
    return Value{{"channel", channel}, {"principal", principal}, {"device", device}};
  }

  static SourceTag from_json(const Value& v) {
    return SourceTag{v.at("channel").get<std::string>(),
                     v.at("principal").get<std::string>(),
                     v.at("device").get<std::string>()};
  }
};

using TagSet = std::set<SourceTag>;

// The distinguished tag the owner's paired device writes with.
inline const SourceTag kOwnerTag{"owner-direct", "owner", "owner-device"};

// A (principal, device) pair as configured by the owner.
struct PrincipalDevice {
  std::string principal;
  std::string device;

  auto operator<=>(const PrincipalDevice&) const = default;

  Value to_json() const { return Value::array({principal, device}); }

  static PrincipalDevice from_json(const Value& v) {
    return PrincipalDevice{v.at(0).get<std::string>(), v.at(1).get<std::string>()};
  }
};

// Owner-configured trusted identities. Trust is granted to (principal,
// device) pairs and lifted over every channel: the same sender is trusted —
// or not — no matter which transport carried the bytes, so re-routing a
// message through a different channel never changes its standing.
class TrustSet {
 public:
  TrustSet() = default;

  void add(PrincipalDevice pair) { pairs_.insert(std::move(pair)); }

  bool contains(const SourceTag& tag) const {
    return pairs_.count(PrincipalDevice{tag.principal, tag.device}) > 0;
  }

  bool contains_pair(const PrincipalDevice& pair) const {
    return pairs_.count(pair) > 0;
  }

  bool covers(const TagSet& tags) const {
    for (const SourceTag& t : tags)
      if (!contains(t)) return false;
    return true;
  }

  const std::set<PrincipalDevice>& pairs() const { return pairs_; }

  Value to_json() const {
    Value arr = Value::array();
    for (const PrincipalDevice& p : pairs_) arr.push_back(p.to_json());
    return arr;
  }

  static TrustSet owner_only() {
    TrustSet t;
    t.add(PrincipalDevice{kOwnerTag.principal, kOwnerTag.device});
    return t;
  }

 private:
  std::set<PrincipalDevice> pairs_;
};

// Sorted JSON array form used in event records and deny reports.
Value tag_set_to_json(const TagSet& tags);
TagSet tag_set_from_json(const Value& v);

}  // namespace provgate
