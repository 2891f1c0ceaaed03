#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tad/embedding.hpp"
#include "tad/ingest.hpp"
#include "tad/linear_models.hpp"
#include "tad/task_model.hpp"

namespace tad {

enum class ProbeTask { kWinner, kDifficulty };

std::string_view ToString(ProbeTask task);

struct ProbeConfig {
  int folds = 5;
  int inner_folds = 2;
  std::vector<double> lambda_grid = {0.01, 0.1, 1.0, 10.0};
  std::vector<Regularizer> families = {Regularizer::kNone, Regularizer::kL2, Regularizer::kL1};
  // Winner probe: drop INVALID rows instead of keeping them as a fourth class.
  bool exclude_invalid = false;
  std::uint64_t seed = 0;
  int max_iters = 500;
  double tolerance = 1e-6;
  // Run outer folds concurrently; results do not depend on this flag.
  bool parallel = true;
};

Json ToJson(const ProbeConfig& config);

struct FamilyResult {
  Regularizer family = Regularizer::kNone;
  std::vector<double> fold_metrics;
  std::vector<double> selected_lambda;  // 0 for the unregularized family
  double mean = 0.0;
};

struct AblationResult {
  Regularizer family = Regularizer::kNone;
  double with_cluster = 0.0;
  double without_cluster = 0.0;
  double delta = 0.0;  // with - without
  std::vector<double> fold_without;
  std::vector<double> selected_lambda_without;
};

struct ProbeReport {
  ProbeTask task = ProbeTask::kWinner;
  std::string metric;  // "accuracy" or "mse"
  std::vector<FamilyResult> families;
  Regularizer best_family = Regularizer::kNone;
  AblationResult ablation;
  ProbeConfig config;
  std::size_t rows = 0;
  int cluster_count = 0;
  int feature_width = 0;
  std::vector<int> classes;  // labels present (winner probe)
  // Largest ridge normal-equation residual over every regression fit.
  double max_normal_residual = 0.0;

  const FamilyResult& Family(Regularizer reg) const;
};

Json ProbeReportToJson(const ProbeReport& report);

/// Winner classification (A wins / B wins / tie / invalid) from model
/// one-hots, cluster one-hot, and response-embedding diff.
ProbeReport RunWinnerProbe(const std::vector<ComparisonRecord>& records,
                           const std::vector<int>& clusters, int cluster_count,
                           const ProbeConfig& config);
ProbeReport RunWinnerProbe(const std::vector<ComparisonRecord>& records,
                           const TaskTypeModel& model, const EmbeddingProvider& provider,
                           const ProbeConfig& config);

/// Difficulty regression from cluster one-hot, outcome indicators, and prompt
/// length. Records without a difficulty label are skipped; none at all is an
/// error.
ProbeReport RunDifficultyProbe(const std::vector<ComparisonRecord>& records,
                               const std::vector<int>& clusters, int cluster_count,
                               const ProbeConfig& config);
ProbeReport RunDifficultyProbe(const std::vector<ComparisonRecord>& records,
                               const TaskTypeModel& model, const EmbeddingProvider& provider,
                               const ProbeConfig& config);

/// Fixed-layout table: None / Ridge / Lasso, With / Without cluster, delta.
std::string RenderProbeTable(const std::vector<ProbeReport>& reports);

/// task,series,family,fold,lambda,metric rows for plotting.
std::string ProbeFoldsCsv(const std::vector<ProbeReport>& reports);

}  // namespace tad
