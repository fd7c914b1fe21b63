#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "provgate/clock.hpp"
#include "provgate/source_tag.hpp"

namespace provgate {

// A one-shot approval for a single action instance: bound to the instance
// digest, carrying a fresh 128-bit nonce, an expiry tick, the issuer pairing
// derived from its authenticator, and the authenticator itself (a keyed MAC
// over digest|nonce|expiry under the issuer's key).
struct Grant {
  std::string digest_hex;
  std::string nonce_hex;  // 32 hex chars
  Tick expiry = 0;        // valid strictly before this tick
  PrincipalDevice issuer;
  std::string authenticator_hex;

  Value to_json() const;
  static std::optional<Grant> from_json(const Value& v);
};

// Append-only line storage behind the ledger and the contact budget.
// Appends report success; a failed append must make the caller fail closed.
class Journal {
 public:
  virtual ~Journal() = default;
  virtual bool append(const std::string& line) = 0;
  virtual std::vector<std::string> read_all() = 0;
};

class MemoryJournal final : public Journal {
 public:
  bool append(const std::string& line) override {
    if (fail_writes) return false;
    lines_.push_back(line);
    return true;
  }
  std::vector<std::string> read_all() override { return lines_; }

  bool fail_writes = false;  // test seam: simulate a dead disk

 private:
  std::vector<std::string> lines_;
};

class FileJournal final : public Journal {
 public:
  explicit FileJournal(std::string path) : path_(std::move(path)) {}
  bool append(const std::string& line) override;
  std::vector<std::string> read_all() override;

 private:
  std::string path_;
};

enum class AttestFailure {
  DigestMismatch,   // no live grant carries this instance digest
  Expired,          // matching grant past its expiry
  IssuerMismatch,   // matching grant not issued by the action's trusted pairing
  Consumed,         // matching grant's nonce already spent
  WriteFailure,     // consume could not be made durable; treated as no grant
};

struct AttestResult {
  bool ok = false;
  std::optional<Grant> grant;
  std::optional<AttestFailure> failure;
};

// Durable one-shot grant ledger.
//
// Issuance and consumption both write through their journals before they
// report success, so a crash-and-reload never resurrects a spent nonce
// (reload() rebuilds exactly the journaled state). Consumption is
// mutex-serialized: however many dispatch attempts race on the same grant,
// exactly one wins.
class NonceLedger {
 public:
  NonceLedger(std::unique_ptr<Journal> grants, std::unique_ptr<Journal> consumed);

  static std::unique_ptr<NonceLedger> in_memory();
  // Journal files under `dir`: grants.journal / consumed.journal.
  static std::unique_ptr<NonceLedger> at_directory(const std::string& dir);

  // Store an already-authenticated grant. Returns an error string (and
  // stores nothing) on a duplicate nonce, malformed fields, or a journal
  // write failure.
  std::optional<std::string> issue(const Grant& g);

  // Read-only probe: would a consume for this digest/pairing succeed now?
  // Never spends the nonce; used by the gate to avoid burning a grant on an
  // action some later check is about to deny.
  AttestResult peek(const std::string& digest_hex, const PrincipalDevice& owner,
                    const TrustSet& trust, Tick now) const;

  // The real thing: atomically re-checks and spends the nonce, journaling
  // the consumption before reporting success.
  AttestResult attest_and_consume(const std::string& digest_hex,
                                  const PrincipalDevice& owner,
                                  const TrustSet& trust, Tick now);

  // Drop in-memory state and rebuild from the journals (crash simulation /
  // process restart). An optional key map re-verifies grant authenticators
  // on the way in; lines that fail verification are dropped.
  void reload(const std::map<PrincipalDevice, std::string>* issuer_keys = nullptr);

  std::size_t live_grant_count() const;  // issued, nonce not yet consumed
  std::vector<Grant> live_grants() const;
  bool nonce_consumed(const std::string& nonce_hex) const;
  struct ConsumeRecord {
    std::string nonce_hex;
    std::string digest_hex;
    Tick tick;
  };
  std::vector<ConsumeRecord> consume_records() const;

 private:
  AttestResult evaluate_locked(const std::string& digest_hex,
                               const PrincipalDevice& owner, const TrustSet& trust,
                               Tick now, const Grant** winner) const;

  mutable std::mutex mu_;
  std::vector<Grant> grants_;
  std::set<std::string> nonces_seen_;
  std::set<std::string> consumed_;
  std::vector<ConsumeRecord> consume_records_;
  std::unique_ptr<Journal> grants_journal_;
  std::unique_ptr<Journal> consumed_journal_;
};

// MAC construction shared by issuers (the harness / CLI) and the verifying
// channel. `key_hex` is a hex-encoded secret.
std::string grant_mac_hex(const std::string& key_hex, const std::string& digest_hex,
                          const std::string& nonce_hex, Tick expiry);

std::string random_nonce_hex(std::mt19937_64& rng);

struct IssueOutcome {
  bool accepted = false;
  std::optional<PrincipalDevice> issuer;  // derived from the authenticator
  std::string error;
};

// The owner-side approval channel. Models run with no handle to this object:
// nothing a model emits reaches it, and issuance requires an authenticator
// under a configured issuer key the model never holds.
//
// The issuer identity recorded on a grant comes from *which key verified the
// authenticator*, never from any claimed-issuer field in the request.
class CompanionChannel {
 public:
  CompanionChannel(std::map<PrincipalDevice, std::string> issuer_keys,
                   const TrustSet* trust, NonceLedger* ledger)
      : issuer_keys_(std::move(issuer_keys)), trust_(trust), ledger_(ledger) {}

  IssueOutcome issue(const std::string& digest_hex, const std::string& nonce_hex,
                     Tick expiry, const std::string& authenticator_hex);

  const std::map<PrincipalDevice, std::string>& issuer_keys() const {
    return issuer_keys_;
  }

 private:
  std::map<PrincipalDevice, std::string> issuer_keys_;
  const TrustSet* trust_;
  NonceLedger* ledger_;
};

}  // namespace provgate
