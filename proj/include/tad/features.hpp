#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tad/ingest.hpp"

namespace tad {

/// Winner-classification layout:
/// [model_a one-hot | model_b one-hot | cluster one-hot | response diff].
/// Model slots follow sorted model ids.
struct FeatureSpecA {
  std::vector<std::string> models;
  int clusters = 0;
  int diff_dim = static_cast<int>(kResponseDiffDim);
  bool include_cluster = true;

  int width() const {
    return 2 * static_cast<int>(models.size()) + (include_cluster ? clusters : 0) + diff_dim;
  }
};

/// Difficulty-regression layout:
/// [cluster one-hot | outcome indicators (A_WINS, B_WINS, TIE, TIE_BOTH_BAD,
/// INVALID) | prompt length in characters].
struct FeatureSpecB {
  int clusters = 0;
  bool include_cluster = true;

  int width() const { return (include_cluster ? clusters : 0) + kOutcomeCount + 1; }
};

std::vector<double> BuildFeaturesA(const ComparisonRecord& record, const FeatureSpecA& spec,
                                   int cluster);
std::vector<double> BuildFeaturesB(const ComparisonRecord& record, const FeatureSpecB& spec,
                                   int cluster);

/// Feature rows for the listed record indices.
Matrix BuildMatrixA(const std::vector<ComparisonRecord>& records, const std::vector<int>& clusters,
                    const std::vector<std::size_t>& rows, const FeatureSpecA& spec);
Matrix BuildMatrixB(const std::vector<ComparisonRecord>& records, const std::vector<int>& clusters,
                    const std::vector<std::size_t>& rows, const FeatureSpecB& spec);

/// Winner-classification label: A wins 0, B wins 1, tie (either kind) 2,
/// invalid 3; nullopt for invalid when `exclude_invalid`.
std::optional<int> TaskALabel(Outcome outcome, bool exclude_invalid);
inline constexpr int kTaskAClasses = 4;

}  // namespace tad
