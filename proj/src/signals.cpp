#include "tad/signals.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace tad {

std::map<ModelCluster, double> SignalArtifact::WinRates() const {
  std::map<ModelCluster, double> out;
  for (const auto& [key, c] : win) out[key] = c.rate();
  return out;
}

std::map<int, double> SignalArtifact::TieRates() const {
  std::map<int, double> out;
  for (const auto& [key, c] : tie) out[key] = c.rate();
  return out;
}

std::map<std::string, double> SignalArtifact::GlobalWinRates() const {
  std::map<std::string, double> out;
  for (const auto& [key, c] : global) out[key] = c.rate();
  return out;
}

std::optional<WinCount> SignalArtifact::Win(const std::string& model, int cluster) const {
  auto it = win.find({model, cluster});
  if (it == win.end()) return std::nullopt;
  return it->second;
}

std::optional<TieCount> SignalArtifact::Tie(int cluster) const {
  auto it = tie.find(cluster);
  if (it == tie.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> SignalArtifact::Models() const {
  std::vector<std::string> out;
  for (const auto& [m, c] : global) out.push_back(m);
  return out;
}

namespace {

void CheckAligned(const std::vector<ComparisonRecord>& records, const std::vector<int>& clusters) {
  if (records.size() != clusters.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "cluster labels (" + std::to_string(clusters.size()) +
                    ") are not aligned with records (" + std::to_string(records.size()) + ")");
  }
  for (int c : clusters) {
    if (c < 0) throw Error(ErrorKind::kInvalidArgument, "negative cluster label");
  }
}

int ClusterCount(const std::vector<int>& clusters) {
  int k = 0;
  for (int c : clusters) k = std::max(k, c + 1);
  return k;
}

}  // namespace

kernels::CountTables CountSignals(const std::vector<ComparisonRecord>& records,
                                  const std::vector<int>& clusters,
                                  const std::vector<std::string>& model_ids, int cluster_count,
                                  const SignalConfig& config, bool parallel) {
  CheckAligned(records, clusters);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < model_ids.size(); ++i) index[model_ids[i]] = static_cast<int>(i);
  std::vector<kernels::EncodedComparison> rows;
  rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto a = index.find(r.model_a);
    auto b = index.find(r.model_b);
    if (a == index.end() || b == index.end()) {
      throw Error(ErrorKind::kInvalidArgument, "record '" + r.record_id + "' names an unindexed model");
    }
    rows.push_back({a->second, b->second, clusters[i], static_cast<int>(r.outcome)});
  }
  const kernels::CountFlags flags{config.invalid_in_win_support, config.invalid_in_tie_support};
  const int m = static_cast<int>(model_ids.size());
  return parallel ? kernels::CountComparisons(rows, m, cluster_count, flags)
                  : kernels::CountComparisonsSerial(rows, m, cluster_count, flags);
}

SignalArtifact ArtifactFromCounts(const kernels::CountTables& t,
                                  const std::vector<std::string>& model_ids,
                                  const SignalConfig& config, std::string task_model_version,
                                  std::string created_at) {
  SignalArtifact a;
  a.config = config;
  a.task_model_version = std::move(task_model_version);
  a.created_at = std::move(created_at);
  const std::size_t k = static_cast<std::size_t>(t.clusters);
  for (std::size_t m = 0; m < model_ids.size(); ++m) {
    for (std::size_t c = 0; c < k; ++c) {
      const auto support = t.support[m * k + c];
      if (support > 0) {
        a.win[{model_ids[m], static_cast<int>(c)}] = {t.wins[m * k + c], support};
      }
    }
    if (t.global_support[m] > 0) {
      a.global[model_ids[m]] = {t.global_wins[m], t.global_support[m]};
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (t.tie_support[c] > 0) a.tie[static_cast<int>(c)] = {t.ties[c], t.tie_support[c]};
  }
  return a;
}

SignalArtifact BuildSignalArtifact(const std::vector<ComparisonRecord>& records,
                                   const std::vector<int>& clusters, const SignalConfig& config,
                                   std::string task_model_version, std::string created_at) {
  CheckAligned(records, clusters);
  const auto ids = CollectModelIds(records);
  const auto counts = CountSignals(records, clusters, ids, ClusterCount(clusters), config);
  return ArtifactFromCounts(counts, ids, config, std::move(task_model_version),
                            std::move(created_at));
}

WinRateTable ComputeWinRates(const std::vector<ComparisonRecord>& records,
                             const std::vector<int>& clusters, const SignalConfig& config) {
  const auto a = BuildSignalArtifact(records, clusters, config, "", "");
  return {a.win, a.WinRates()};
}

TieRateTable ComputeTieRates(const std::vector<ComparisonRecord>& records,
                             const std::vector<int>& clusters, const SignalConfig& config) {
  const auto a = BuildSignalArtifact(records, clusters, config, "", "");
  return {a.tie, a.TieRates()};
}

std::map<std::string, WinCount> ComputeGlobalWinCounts(const std::vector<ComparisonRecord>& records,
                                                       const SignalConfig& config) {
  const std::vector<int> zeros(records.size(), 0);
  return BuildSignalArtifact(records, zeros, config, "", "").global;
}

std::map<std::string, double> ComputeGlobalWinRates(const std::vector<ComparisonRecord>& records,
                                                    const SignalConfig& config) {
  std::map<std::string, double> out;
  for (const auto& [m, c] : ComputeGlobalWinCounts(records, config)) out[m] = c.rate();
  return out;
}

Json SignalArtifactToJson(const SignalArtifact& a) {
  Json win = Json::array();
  for (const auto& [key, c] : a.win) {
    win.push_back({{"model", key.first}, {"cluster", key.second}, {"wins", c.wins},
                   {"support", c.support}});
  }
  Json tie = Json::array();
  for (const auto& [cluster, c] : a.tie) {
    tie.push_back({{"cluster", cluster}, {"ties", c.ties}, {"support", c.support}});
  }
  Json global = Json::array();
  for (const auto& [model, c] : a.global) {
    global.push_back({{"model", model}, {"wins", c.wins}, {"support", c.support}});
  }
  return {{"schema_version", std::to_string(kSignalSchemaVersion)},
          {"task_model_version", a.task_model_version},
          {"created_at", a.created_at},
          {"win", win},
          {"tie", tie},
          {"global", global},
          {"config_flags",
           {{"invalid_in_win_support", a.config.invalid_in_win_support},
            {"invalid_in_tie_support", a.config.invalid_in_tie_support}}}};
}

namespace {

std::int64_t Count(const Json& j, const char* key) {
  const auto v = j.at(key).get<std::int64_t>();
  if (v < 0) throw Error(ErrorKind::kCorrupted, std::string("negative count '") + key + "'");
  return v;
}

}  // namespace

SignalArtifact SignalArtifactFromJson(const Json& j) {
  try {
    if (!j.is_object() || !j.contains("schema_version")) {
      throw Error(ErrorKind::kCorrupted, "signal artifact lacks schema_version");
    }
    const Json& version = j.at("schema_version");
    if (!version.is_string() || version.get<std::string>() != std::to_string(kSignalSchemaVersion)) {
      throw Error(ErrorKind::kVersionMismatch, "signal artifact schema_version " + version.dump() +
                                                   " is not supported (expected \"" +
                                                   std::to_string(kSignalSchemaVersion) + "\")");
    }
    SignalArtifact a;
    a.task_model_version = j.at("task_model_version").get<std::string>();
    a.created_at = j.value("created_at", std::string());
    const Json& flags = j.at("config_flags");
    a.config.invalid_in_win_support = flags.value("invalid_in_win_support", false);
    a.config.invalid_in_tie_support = flags.value("invalid_in_tie_support", false);
    for (const auto& e : j.at("win")) {
      WinCount c{Count(e, "wins"), Count(e, "support")};
      if (c.wins > c.support || c.support == 0) {
        throw Error(ErrorKind::kCorrupted, "win entry with wins > support or zero support");
      }
      a.win[{e.at("model").get<std::string>(), e.at("cluster").get<int>()}] = c;
    }
    for (const auto& e : j.at("tie")) {
      TieCount c{Count(e, "ties"), Count(e, "support")};
      if (c.ties > c.support || c.support == 0) {
        throw Error(ErrorKind::kCorrupted, "tie entry with ties > support or zero support");
      }
      a.tie[e.at("cluster").get<int>()] = c;
    }
    for (const auto& e : j.at("global")) {
      WinCount c{Count(e, "wins"), Count(e, "support")};
      if (c.wins > c.support || c.support == 0) {
        throw Error(ErrorKind::kCorrupted, "global entry with wins > support or zero support");
      }
      a.global[e.at("model").get<std::string>()] = c;
    }
    return a;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kCorrupted, std::string("malformed signal artifact: ") + e.what());
  }
}

void SaveSignalArtifact(const SignalArtifact& artifact, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kUnavailable, "cannot write '" + path + "'");
  out << SignalArtifactToJson(artifact).dump(1) << '\n';
}

SignalArtifact LoadSignalArtifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kUnavailable, "cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kCorrupted, "'" + path + "' is corrupted: " + e.what());
  }
  return SignalArtifactFromJson(j);
}

}  // namespace tad
