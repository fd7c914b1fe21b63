#include "logreplay/replay.hpp"

#include <algorithm>
#include <cstring>

namespace logreplay {

namespace {

// --- SHA-256, self-contained -------------------------------------------

constexpr std::uint32_t kInit[8] = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u,
                                    0xa54ff53au, 0x510e527fu, 0x9b05688cu,
                                    0x1f83d9abu, 0x5be0cd19u};

constexpr std::uint32_t kRound[64] = {
    0x428a2f98u, 0x71374491u, 0xb5c0fbcfu, 0xe9b5dba5u, 0x3956c25bu,
    0x59f111f1u, 0x923f82a4u, 0xab1c5ed5u, 0xd807aa98u, 0x12835b01u,
    0x243185beu, 0x550c7dc3u, 0x72be5d74u, 0x80deb1feu, 0x9bdc06a7u,
    0xc19bf174u, 0xe49b69c1u, 0xefbe4786u, 0x0fc19dc6u, 0x240ca1ccu,
    0x2de92c6fu, 0x4a7484aau, 0x5cb0a9dcu, 0x76f988dau, 0x983e5152u,
    0xa831c66du, 0xb00327c8u, 0xbf597fc7u, 0xc6e00bf3u, 0xd5a79147u,
    0x06ca6351u, 0x14292967u, 0x27b70a85u, 0x2e1b2138u, 0x4d2c6dfcu,
    0x53380d13u, 0x650a7354u, 0x766a0abbu, 0x81c2c92eu, 0x92722c85u,
    0xa2bfe8a1u, 0xa81a664bu, 0xc24b8b70u, 0xc76c51a3u, 0xd192e819u,
    0xd6990624u, 0xf40e3585u, 0x106aa070u, 0x19a4c116u, 0x1e376c08u,
    0x2748774cu, 0x34b0bcb5u, 0x391c0cb3u, 0x4ed8aa4au, 0x5b9cca4fu,
    0x682e6ff3u, 0x748f82eeu, 0x78a5636fu, 0x84c87814u, 0x8cc70208u,
    0x90befffau, 0xa4506cebu, 0xbef9a3f7u, 0xc67178f2u};

inline std::uint32_t rotr(std::uint32_t x, int n) {
  return (x >> n) | (x << (32 - n));
}

struct Sha256 {
  std::uint32_t h[8];
  std::uint8_t buf[64];
  std::size_t buflen = 0;
  std::uint64_t total = 0;

  Sha256() { std::memcpy(h, kInit, sizeof h); }

  void block(const std::uint8_t* p) {
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5],
                  g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      std::uint32_t ch = (e & f) ^ (~e & g);
      std::uint32_t t1 = hh + s1 + ch + kRound[i] + w[i];
      std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      std::uint32_t t2 = s0 + maj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d;
    h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
  }

  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    total += n;
    while (n > 0) {
      std::size_t take = std::min(n, sizeof buf - buflen);
      std::memcpy(buf + buflen, p, take);
      buflen += take;
      p += take;
      n -= take;
      if (buflen == sizeof buf) {
        block(buf);
        buflen = 0;
      }
    }
  }

  void finish(std::uint8_t out[32]) {
    std::uint64_t bits = total * 8;
    std::uint8_t pad = 0x80;
    update(&pad, 1);
    std::uint8_t zero = 0;
    while (buflen != 56) update(&zero, 1);
    std::uint8_t lenbuf[8];
    for (int i = 0; i < 8; ++i)
      lenbuf[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    update(lenbuf, 8);
    for (int i = 0; i < 8; ++i) {
      out[4 * i] = static_cast<std::uint8_t>(h[i] >> 24);
      out[4 * i + 1] = static_cast<std::uint8_t>(h[i] >> 16);
      out[4 * i + 2] = static_cast<std::uint8_t>(h[i] >> 8);
      out[4 * i + 3] = static_cast<std::uint8_t>(h[i]);
    }
  }
};

// --- canonical serialization --------------------------------------------

bool byte_less(const std::string& a, const std::string& b) {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(),
      [](char x, char y) {
        return static_cast<unsigned char>(x) < static_cast<unsigned char>(y);
      });
}

bool append_escaped(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\f': out += "\\f"; break;
      case '\r': out += "\\r"; break;
      default:
        if (u < 0x20) {
          char hex[8];
          std::snprintf(hex, sizeof hex, "\\u%04x", u);
          out += hex;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
  return true;
}

bool encode(std::string& out, const Json& v) {
  switch (v.type()) {
    case Json::value_t::null:
      out += "null";
      return true;
    case Json::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      return true;
    case Json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      return true;
    case Json::value_t::number_unsigned: {
      std::uint64_t u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        return false;
      out += std::to_string(u);
      return true;
    }
    case Json::value_t::string:
      return append_escaped(out, v.get<std::string>());
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const Json& e : v) {
        if (!first) out.push_back(',');
        first = false;
        if (!encode(out, e)) return false;
      }
      out.push_back(']');
      return true;
    }
    case Json::value_t::object: {
      std::vector<std::string> keys;
      for (auto it = v.begin(); it != v.end(); ++it) keys.push_back(it.key());
      std::sort(keys.begin(), keys.end(), byte_less);
      out.push_back('{');
      bool first = true;
      for (const std::string& k : keys) {
        if (!first) out.push_back(',');
        first = false;
        append_escaped(out, k);
        out.push_back(':');
        if (!encode(out, v.at(k))) return false;
      }
      out.push_back('}');
      return true;
    }
    default:  // float, binary, discarded
      return false;
  }
}

void append_be64(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void append_field(std::string& out, char tag, const std::string& bytes) {
  out.push_back(tag);
  append_be64(out, bytes.size());
  out += bytes;
}

using Tag = std::array<std::string, 3>;

struct GrantRow {
  std::string digest;
  std::string nonce;
  std::int64_t expiry = 0;
  std::string issuer_principal;
  std::string issuer_device;
  std::size_t line = 0;
};

struct ConsumeRow {
  std::string nonce;
  std::string digest;
  std::size_t line = 0;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 state;
  state.update(bytes.data(), bytes.size());
  std::uint8_t out[32];
  state.finish(out);
  static const char* hex = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : out) {
    s.push_back(hex[b >> 4]);
    s.push_back(hex[b & 0xf]);
  }
  return s;
}

std::optional<std::string> canonical_json(const Json& v) {
  std::string out;
  if (!encode(out, v)) return std::nullopt;
  return out;
}

std::optional<std::string> action_digest_hex(const Json& action) {
  if (!action.is_object()) return std::nullopt;
  if (!action.contains("kind") || !action.at("kind").is_string()) return std::nullopt;
  if (!action.contains("causal") || !action.at("causal").is_array())
    return std::nullopt;  // includes the "bottom" sentinel string
  if (!action.contains("ownerDevice") || !action.at("ownerDevice").is_array() ||
      action.at("ownerDevice").size() != 2)
    return std::nullopt;

  std::string preimage;
  append_field(preimage, 0x01, action.at("kind").get<std::string>());

  preimage.push_back(0x02);
  const Json& causal = action.at("causal");
  append_be64(preimage, causal.size());
  for (const Json& id : causal) {
    if (!id.is_string()) return std::nullopt;
    std::string s = id.get<std::string>();
    append_be64(preimage, s.size());
    preimage += s;
  }

  auto args = canonical_json(action.value("args", Json::object()));
  if (!args) return std::nullopt;
  append_field(preimage, 0x03, *args);
  append_field(preimage, 0x04, action.value("target", ""));
  auto owner = canonical_json(action.at("ownerDevice"));
  if (!owner) return std::nullopt;
  append_field(preimage, 0x05, *owner);
  return sha256_hex(preimage);
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Violations: return "violations";
    case Verdict::Unverifiable: return "unverifiable";
  }
  return "unverifiable";
}

namespace {

std::optional<Tag> tag_from_json(const Json& t) {
  if (t.is_object() && t.contains("channel") && t.contains("principal") &&
      t.contains("device"))
    return Tag{t.at("channel").get<std::string>(),
               t.at("principal").get<std::string>(),
               t.at("device").get<std::string>()};
  return std::nullopt;
}

struct LogModel {
  std::vector<Json> events;
  std::map<std::string, ArtifactView> artifacts;
  std::vector<GrantRow> grants;
  std::vector<ConsumeRow> consumes;
  std::vector<Violation> violations;
  bool unverifiable = false;

  void flag(std::size_t line, std::string code, std::string detail,
            bool fatal = false) {
    violations.push_back({line, std::move(code), std::move(detail)});
    if (fatal) unverifiable = true;
  }

  bool union_tags(std::size_t line, const Json& ids, std::set<Tag>* out) {
    bool ok = true;
    for (const Json& idv : ids) {
      if (!idv.is_string()) {
        flag(line, "malformed-reference", "artifact id is not a string", true);
        ok = false;
        continue;
      }
      auto it = artifacts.find(idv.get<std::string>());
      if (it == artifacts.end()) {
        flag(line, "unresolved-artifact",
             "no creation event for artifact '" + idv.get<std::string>() + "'",
             true);
        ok = false;
        continue;
      }
      out->insert(it->second.tags.begin(), it->second.tags.end());
    }
    return ok;
  }

  void register_artifact(std::size_t line, const std::string& id,
                         const std::string& kind, std::set<Tag> tags) {
    ArtifactView v;
    v.id = id;
    v.kind = kind;
    v.tags = std::move(tags);
    v.line = line;
    artifacts[id] = std::move(v);
  }

  void absorb_creation(std::size_t line, const Json& e) {
    std::string type = e.value("type", "");
    if (type == "intake") {
      auto tag = tag_from_json(e.value("tag", Json::object()));
      if (!e.contains("artifact") || !tag) {
        flag(line, "malformed-intake", "intake event missing artifact or tag",
             true);
        return;
      }
      register_artifact(line, e.at("artifact").get<std::string>(),
                        e.value("kind", ""), {*tag});
    } else if (type == "memory-write") {
      if (!e.contains("artifact")) {
        flag(line, "malformed-derivation", "memory-write missing artifact", true);
        return;
      }
      std::set<Tag> tags;
      union_tags(line, e.value("inputs", Json::array()), &tags);
      register_artifact(line, e.at("artifact").get<std::string>(),
                        e.value("kind", ""), std::move(tags));
    } else if (type == "skill-write") {
      std::set<Tag> tags;
      union_tags(line, e.value("inputs", Json::array()), &tags);
      if (e.contains("manifestArtifact"))
        register_artifact(line, e.at("manifestArtifact").get<std::string>(),
                          "skill-manifest", tags);
      if (e.contains("bodyArtifact"))
        register_artifact(line, e.at("bodyArtifact").get<std::string>(),
                          "skill-body", tags);
    } else if (type == "tool-call") {
      std::set<Tag> tags;
      union_tags(line, e.value("transcript", Json::array()), &tags);
      if (e.contains("textArtifact") && e.at("textArtifact").is_string())
        register_artifact(line, e.at("textArtifact").get<std::string>(),
                          "tool-call-text", tags);
      if (e.contains("argsArtifact") && e.at("argsArtifact").is_string())
        register_artifact(line, e.at("argsArtifact").get<std::string>(),
                          "tool-call-text", tags);
    } else if (type == "grant-issued") {
      GrantRow g;
      g.digest = e.value("digest", "");
      g.nonce = e.value("nonce", "");
      g.expiry = e.value("expiry", std::int64_t{0});
      const Json& issuer = e.value("issuer", Json::array());
      if (issuer.is_array() && issuer.size() == 2) {
        g.issuer_principal = issuer.at(0).get<std::string>();
        g.issuer_device = issuer.at(1).get<std::string>();
      }
      g.line = line;
      grants.push_back(std::move(g));
    } else if (type == "nonce-consumed") {
      consumes.push_back(
          {e.value("nonce", ""), e.value("digest", ""), line});
    }
  }
};

}  // namespace

CheckResult check(
    const std::vector<std::string>& lines,
    const std::vector<std::pair<std::string, std::string>>& trust_pairs) {
  CheckResult res;
  LogModel m;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      m.events.push_back(Json());
      continue;
    }
    Json e = Json::parse(lines[i], nullptr, false);
    if (e.is_discarded() || !e.is_object()) {
      m.flag(i, "unparseable-line", "event line is not a JSON object", true);
      m.events.push_back(Json());
      continue;
    }
    m.events.push_back(std::move(e));
  }

  // First pass: artifact provenance, grants, consumes.
  for (std::size_t i = 0; i < m.events.size(); ++i)
    if (m.events[i].is_object()) m.absorb_creation(i, m.events[i]);
  res.grants_seen = m.grants.size();

  // Nonce hygiene, log-wide.
  std::map<std::string, std::size_t> nonce_consume_count;
  std::map<std::string, const GrantRow*> grant_by_nonce;
  for (const GrantRow& g : m.grants) {
    if (grant_by_nonce.count(g.nonce))
      m.flag(g.line, "nonce-reissued",
             "nonce '" + g.nonce + "' appears on more than one grant");
    else
      grant_by_nonce[g.nonce] = &g;
  }
  for (const ConsumeRow& c : m.consumes) {
    ++nonce_consume_count[c.nonce];
    auto it = grant_by_nonce.find(c.nonce);
    if (it == grant_by_nonce.end())
      m.flag(c.line, "unknown-nonce",
             "consumption of a nonce no grant event carries");
    else if (it->second->digest != c.digest)
      m.flag(c.line, "consume-digest-mismatch",
             "nonce consumed against a different digest than granted");
    if (nonce_consume_count[c.nonce] > 1)
      m.flag(c.line, "nonce-reused",
             "nonce '" + c.nonce + "' consumed more than once");
  }

  auto trusted_pair = [&](const std::string& p, const std::string& d) {
    for (const auto& [tp, td] : trust_pairs)
      if (tp == p && td == d) return true;
    return false;
  };

  // Allow decisions available for pairing, digest -> event indices in order.
  std::map<std::string, std::vector<std::size_t>> open_allows;
  for (std::size_t i = 0; i < m.events.size(); ++i) {
    const Json& e = m.events[i];
    if (!e.is_object() || e.value("type", "") != "gate-decision") continue;
    if (e.value("verdict", "") != "allow") continue;
    if (e.contains("digest") && e.at("digest").is_string())
      open_allows[e.at("digest").get<std::string>()].push_back(i);
  }

  // Second pass: every dispatch re-derived.
  for (std::size_t i = 0; i < m.events.size(); ++i) {
    const Json& e = m.events[i];
    if (!e.is_object() || e.value("type", "") != "dispatch") continue;
    ++res.dispatches_checked;
    std::int64_t tick = e.value("tick", std::int64_t{0});

    if (!e.contains("digest") || !e.at("digest").is_string()) {
      m.flag(i, "undigested-dispatch",
             "dispatch carries no instance digest (ungated release)");
      continue;
    }
    std::string digest = e.at("digest").get<std::string>();

    // 1:1 pairing with a prior allow for the same digest.
    auto oa = open_allows.find(digest);
    bool paired = false;
    if (oa != open_allows.end()) {
      for (auto it = oa->second.begin(); it != oa->second.end(); ++it) {
        if (*it < i) {
          oa->second.erase(it);
          paired = true;
          break;
        }
      }
    }
    if (!paired)
      m.flag(i, "unmatched-dispatch",
             "no unconsumed prior allow decision for digest " + digest);

    const Json& action = e.value("action", Json::object());
    if (action.value("causal", Json()) == Json("bottom")) {
      m.flag(i, "unenumerable-dispatch",
             "dispatched action admits no enumerable causal set");
      continue;
    }

    auto recomputed = action_digest_hex(action);
    if (!recomputed) {
      m.flag(i, "undigestable-action",
             "logged action fields admit no canonical digest", true);
      continue;
    }
    if (*recomputed != digest) {
      m.flag(i, "digest-mismatch",
             "logged digest " + digest + " != recomputed " + *recomputed);
      continue;
    }

    // Accumulated provenance over the causal set, from creation events only.
    std::set<Tag> pi;
    if (!m.union_tags(i, action.at("causal"), &pi)) continue;
    if (pi.empty()) {
      m.flag(i, "empty-provenance-dispatch",
             "dispatched action has no provenance at all");
      continue;
    }
    bool trusted = true;
    std::string first_untrusted;
    for (const Tag& t : pi) {
      if (!trusted_pair(t[1], t[2])) {
        trusted = false;
        first_untrusted = t[0] + "/" + t[1] + "/" + t[2];
        break;
      }
    }
    if (trusted) continue;

    // Untrusted provenance: a qualifying consumed grant must cover it.
    const Json& owner = action.value("ownerDevice", Json::array());
    std::string op, od;
    if (owner.is_array() && owner.size() == 2) {
      op = owner.at(0).get<std::string>();
      od = owner.at(1).get<std::string>();
    }
    if (!e.contains("grantNonce") || !e.at("grantNonce").is_string()) {
      m.flag(i, "unattested-untrusted-dispatch",
             "untrusted provenance (" + first_untrusted +
                 ") dispatched with no grant");
      continue;
    }
    std::string nonce = e.at("grantNonce").get<std::string>();
    auto git = grant_by_nonce.find(nonce);
    if (git == grant_by_nonce.end()) {
      m.flag(i, "unattested-untrusted-dispatch",
             "claimed grant nonce has no grant event");
      continue;
    }
    const GrantRow& g = *git->second;
    if (g.digest != digest)
      m.flag(i, "grant-digest-mismatch",
             "consumed grant was approved for a different instance digest");
    if (!(g.expiry > tick))
      m.flag(i, "expired-grant-dispatch",
             "grant expired at tick " + std::to_string(g.expiry) +
                 " but dispatch happened at " + std::to_string(tick));
    if (g.issuer_principal != op || g.issuer_device != od ||
        !trusted_pair(g.issuer_principal, g.issuer_device))
      m.flag(i, "untrusted-issuer",
             "grant issuer is not the trusted owner pairing of this action");
    bool consumed_before = false;
    for (const ConsumeRow& c : m.consumes)
      if (c.nonce == nonce && c.line < i) consumed_before = true;
    if (!consumed_before)
      m.flag(i, "unconsumed-grant",
             "dispatch precedes any consumption record for its grant nonce");
    if (nonce_consume_count[nonce] != 1)
      m.flag(i, "nonce-reused",
             "grant nonce consumed " + std::to_string(nonce_consume_count[nonce]) +
                 " times across the log");
  }

  res.violations = std::move(m.violations);
  if (m.unverifiable)
    res.verdict = Verdict::Unverifiable;
  else if (!res.violations.empty())
    res.verdict = Verdict::Violations;
  else
    res.verdict = Verdict::Pass;
  return res;
}

std::map<std::string, ArtifactView> build_artifacts(
    const std::vector<std::string>& lines) {
  LogModel m;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Json e = Json::parse(lines[i], nullptr, false);
    m.events.push_back(e.is_discarded() ? Json() : e);
  }
  for (std::size_t i = 0; i < m.events.size(); ++i)
    if (m.events[i].is_object()) m.absorb_creation(i, m.events[i]);
  return m.artifacts;
}

}  // namespace logreplay
