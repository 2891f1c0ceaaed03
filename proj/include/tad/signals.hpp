#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tad/ingest.hpp"
#include "tad/kernels.hpp"

namespace tad {

inline constexpr int kSignalSchemaVersion = 1;

struct SignalConfig {
  // INVALID comparisons add to a model's comparison count (never its wins).
  bool invalid_in_win_support = false;
  // INVALID comparisons add to a cluster's comparison count (never its ties).
  bool invalid_in_tie_support = false;

  bool operator==(const SignalConfig&) const = default;
};

struct WinCount {
  std::int64_t wins = 0;
  std::int64_t support = 0;
  double rate() const { return static_cast<double>(wins) / static_cast<double>(support); }
  bool operator==(const WinCount&) const = default;
};

struct TieCount {
  std::int64_t ties = 0;
  std::int64_t support = 0;
  double rate() const { return static_cast<double>(ties) / static_cast<double>(support); }
  bool operator==(const TieCount&) const = default;
};

using ModelCluster = std::pair<std::string, int>;

/// Capability profile, risk cue and global baseline, stored as counts. Pairs
/// or clusters with zero support have no entry.
struct SignalArtifact {
  std::map<ModelCluster, WinCount> win;
  std::map<int, TieCount> tie;
  std::map<std::string, WinCount> global;
  std::string task_model_version;
  std::string created_at;
  SignalConfig config;

  std::map<ModelCluster, double> WinRates() const;
  std::map<int, double> TieRates() const;
  std::map<std::string, double> GlobalWinRates() const;

  std::optional<WinCount> Win(const std::string& model, int cluster) const;
  std::optional<TieCount> Tie(int cluster) const;
  std::vector<std::string> Models() const;

  bool operator==(const SignalArtifact&) const = default;
};

struct WinRateTable {
  std::map<ModelCluster, WinCount> counts;
  std::map<ModelCluster, double> rates;
};

struct TieRateTable {
  std::map<int, TieCount> counts;
  std::map<int, double> rates;
};

/// w_{m,c}: wins of m over comparisons involving m in cluster c. Ties,
/// both-bad ties, and (when flagged) invalid votes count only in the
/// denominator. `clusters` must align with `records`.
WinRateTable ComputeWinRates(const std::vector<ComparisonRecord>& records,
                             const std::vector<int>& clusters, const SignalConfig& config = {});

/// d_c: (TIE + TIE_BOTH_BAD) / comparisons in cluster c.
TieRateTable ComputeTieRates(const std::vector<ComparisonRecord>& records,
                             const std::vector<int>& clusters, const SignalConfig& config = {});

/// Win rate with the cluster condition removed.
std::map<std::string, WinCount> ComputeGlobalWinCounts(const std::vector<ComparisonRecord>& records,
                                                       const SignalConfig& config = {});
std::map<std::string, double> ComputeGlobalWinRates(const std::vector<ComparisonRecord>& records,
                                                    const SignalConfig& config = {});

/// Dense counts for the records (OpenMP kernel unless `parallel` is false).
/// `model_ids` is the sorted contestant index.
kernels::CountTables CountSignals(const std::vector<ComparisonRecord>& records,
                                  const std::vector<int>& clusters,
                                  const std::vector<std::string>& model_ids, int cluster_count,
                                  const SignalConfig& config, bool parallel = true);

/// Sparse artifact from dense tables.
SignalArtifact ArtifactFromCounts(const kernels::CountTables& counts,
                                  const std::vector<std::string>& model_ids,
                                  const SignalConfig& config, std::string task_model_version,
                                  std::string created_at);

SignalArtifact BuildSignalArtifact(const std::vector<ComparisonRecord>& records,
                                   const std::vector<int>& clusters, const SignalConfig& config,
                                   std::string task_model_version, std::string created_at);

Json SignalArtifactToJson(const SignalArtifact& artifact);
SignalArtifact SignalArtifactFromJson(const Json& j);
void SaveSignalArtifact(const SignalArtifact& artifact, const std::string& path);
SignalArtifact LoadSignalArtifact(const std::string& path);

}  // namespace tad
