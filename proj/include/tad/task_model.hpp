#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tad/embedding.hpp"
#include "tad/ingest.hpp"
#include "tad/kmeans.hpp"
#include "tad/reducer.hpp"

namespace tad {

inline constexpr int kTaskModelSchemaVersion = 1;

/// Fitted task typer: reducer, K centroids, keyword labels, and the map from
/// retired (small) clusters to the surviving cluster that absorbed them.
struct TaskTypeModel {
  EmbeddingProviderConfig embedder;
  LinearReducer reducer;
  Matrix centroids;  // K x d'
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> keywords;
  std::map<int, int> reassignment_map;
  int min_cluster_size = 1;
  std::uint64_t fit_seed = 0;

  int cluster_count() const { return static_cast<int>(centroids.rows()); }
  bool IsSurviving(int cluster) const;
  std::vector<int> SurvivingClusters() const;
  std::vector<char> ActiveMask() const;

  /// Content fingerprint; signal artifacts record it to pin compatibility.
  std::string Version() const;

  bool operator==(const TaskTypeModel& o) const;
};

Json TaskModelToJson(const TaskTypeModel& model);
TaskTypeModel TaskModelFromJson(const Json& j);
void SaveTaskModel(const TaskTypeModel& model, const std::string& path);
TaskTypeModel LoadTaskModel(const std::string& path);

/// Default small-cluster threshold max(10, ceil(0.005 n)).
int DefaultMinClusterSize(std::size_t n);

/// Relabels members of clusters smaller than `min_size` to the surviving
/// cluster whose centroid is nearest the retired centroid (ties to the lower
/// index). Surviving centroids are not refit. Throws when no cluster reaches
/// `min_size`.
void ReassignSmallClusters(TaskTypeModel& model, std::vector<int>& assignments, int min_size);

/// Stop words dropped before keyword counting.
const std::vector<std::string>& StopWords();

/// Lowercased, punctuation-stripped, stop-word-free tokens of `text`.
std::vector<std::string> KeywordTokens(const std::string& text);

struct ClusterLabel {
  std::vector<std::string> keywords;  // up to 5, by frequency then lexicographic
  std::string label;                  // keywords joined by " / ", or "unlabeled"
};

inline constexpr int kKeywordsPerCluster = 5;

/// One label per group of prompts. Each group must be nonempty.
std::vector<ClusterLabel> LabelClusters(const std::vector<std::vector<std::string>>& prompts);

struct TypeAssignment {
  int cluster = -1;
  double confidence = 0.0;
  double distance_to_centroid = 0.0;
  std::optional<int> runner_up_cluster;
  double runner_up_distance = 0.0;
  std::vector<std::string> keywords;

  bool operator==(const TypeAssignment&) const = default;
};

Json ToJson(const TypeAssignment& a);

/// Nearest surviving centroid of an already reduced point. Confidence is
/// d2 / (d1 + d2) over the nearest and runner-up Euclidean distances (1 when
/// only one cluster survives or both distances are zero).
TypeAssignment AssignPoint(const TaskTypeModel& model, const Eigen::Ref<const Vector>& point);

TypeAssignment Assign(const TaskTypeModel& model, const std::string& prompt,
                      const EmbeddingProvider& provider);

/// Cluster index of every record, via embed -> reduce -> nearest surviving.
/// With `use_ingested_embeddings`, each record's prompt_embedding is used
/// instead of the provider (and must be present).
std::vector<int> AssignRecords(const TaskTypeModel& model,
                               const std::vector<ComparisonRecord>& records,
                               const EmbeddingProvider& provider,
                               bool use_ingested_embeddings = false);

struct TaskTypingConfig {
  EmbeddingProviderConfig embedder;
  int reduced_dim = 10;
  int cluster_count = 30;
  std::optional<int> min_cluster_size;  // default DefaultMinClusterSize(n)
  std::uint64_t seed = 0;
  int max_iters = 300;
  // Use the records' prompt_embedding instead of the provider.
  bool use_ingested_embeddings = false;
};

struct TaskTypingFit {
  TaskTypeModel model;
  std::vector<int> assignments;  // training labels after reassignment
  Matrix reduced;                // N x d' training points
  KMeansResult kmeans;
  ReducerFit reducer_fit;
};

/// Embeds prompts, fits the reducer and k-means, retires small clusters, and
/// labels the survivors.
TaskTypingFit FitTaskTyping(const std::vector<ComparisonRecord>& records,
                            const TaskTypingConfig& config);

/// Prompt-embedding matrix for the records under the config's embedding rule.
Matrix EmbedRecords(const std::vector<ComparisonRecord>& records, const TaskTypingConfig& config,
                    const EmbeddingProvider& provider);

}  // namespace tad
