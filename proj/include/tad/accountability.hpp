#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tad/common.hpp"

namespace tad {

/// Minimized record of one delegation: no prompt text unless the session
/// opted into retention.
struct AccountabilityEntry {
  std::uint64_t entry_id = 0;
  std::string timestamp;
  int cluster = -1;
  bool overridden = false;
  std::string primary_model;
  std::optional<std::string> auditor_model;
  std::optional<double> risk_value;  // absent when the cluster had no tie evidence
  std::vector<std::string> safeguards;
  std::string status;  // EXECUTED or REPAIRED
  std::optional<std::string> repair_or_handoff_note;
  std::optional<std::string> prompt_text;  // only with retention

  bool operator==(const AccountabilityEntry&) const = default;
};

struct Tombstone {
  std::uint64_t entry_id = 0;
  std::string deleted_at;

  bool operator==(const Tombstone&) const = default;
};

Json ToJson(const AccountabilityEntry& e);
AccountabilityEntry EntryFromJson(const Json& j);
Json ToJson(const Tombstone& t);

using LogItem = std::variant<AccountabilityEntry, Tombstone>;

std::uint64_t ItemId(const LogItem& item);
Json ToJson(const LogItem& item);

/// Append-only on-disk log. Each record is a 4-byte little-endian length
/// followed by that many bytes of JSON ({"type": "entry" | "tombstone", ...}).
/// Forget rewrites the file with the entry replaced by its tombstone.
/// All methods are thread-safe; ids are assigned in append order.
class AccountabilityStore {
 public:
  using Clock = std::function<std::string()>;

  /// Opens (creating if absent) and replays `path`. Throws kCorrupted on a
  /// malformed file, kUnavailable when it cannot be created.
  explicit AccountabilityStore(std::string path, Clock clock = {});

  /// Assigns entry_id and timestamp, persists, and returns the stored entry.
  AccountabilityEntry Append(AccountabilityEntry draft);

  /// kNotFound for unknown ids; for forgotten ids the error details carry
  /// the tombstone.
  AccountabilityEntry Get(std::uint64_t id) const;

  Tombstone Forget(std::uint64_t id);

  /// Items with id > cursor in id order, at most `limit` (0 = no limit).
  std::vector<LogItem> List(std::uint64_t cursor = 0, std::size_t limit = 0) const;

  /// Live entries only.
  std::vector<AccountabilityEntry> Export() const;
  std::string ExportJsonl() const;

  /// Exact entry count per cluster over live entries.
  std::map<int, std::int64_t> ClusterCounts() const;

  std::size_t size() const;
  const std::string& path() const { return path_; }
  void Flush();

 private:
  void WriteAll() const;

  std::string path_;
  Clock clock_;
  mutable std::mutex mu_;
  std::vector<LogItem> items_;  // id order
  std::uint64_t next_id_ = 1;
};

/// Serialized record bytes (length prefix + JSON) for one item.
std::string EncodeLogRecord(const LogItem& item);
/// Parses a whole log file image.
std::vector<LogItem> DecodeLogRecords(std::string_view bytes);

/// Two-sided geometric draw: difference of two geometric variables with
/// success probability 1 - exp(-epsilon).
std::int64_t TwoSidedGeometric(double epsilon, std::mt19937_64& rng);

/// Counts for clusters [0, cluster_count): sensitive clusters receive
/// two-sided geometric noise (drawn in ascending cluster order from `seed`),
/// clamped at zero; others are exact. An empty log releases all zeros.
std::map<int, std::int64_t> NoisyClusterCounts(const std::map<int, std::int64_t>& exact,
                                               int cluster_count,
                                               const std::set<int>& sensitive, double epsilon,
                                               std::uint64_t seed);

}  // namespace tad
