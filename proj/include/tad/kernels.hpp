#pragma once

// Data-parallel inner loops. Every kernel has a straightforward serial
// reference (`*Serial`) kept for tests and benchmarks; the OpenMP versions
// produce results independent of the thread count.

#include <cstdint>
#include <span>
#include <vector>

#include "tad/common.hpp"

namespace tad::kernels {

/// For each row of `points`, the index of the nearest active centroid
/// (squared Euclidean; ties go to the lower index) and that squared distance.
/// When `sticky` is set, `labels` holds a previous assignment which is kept
/// whenever it is already at the minimum distance.
void NearestCentroidSerial(const Matrix& points, const Matrix& centroids,
                           std::span<const char> active, std::span<int> labels,
                           std::span<double> dist2, bool sticky = false);
void NearestCentroid(const Matrix& points, const Matrix& centroids,
                     std::span<const char> active, std::span<int> labels,
                     std::span<double> dist2, bool sticky = false);

/// dist2[i] = min(dist2[i], |points[i] - center|^2).
void UpdateMinDistanceSerial(const Matrix& points, const Eigen::Ref<const Vector>& center,
                             std::span<double> dist2);
void UpdateMinDistance(const Matrix& points, const Eigen::Ref<const Vector>& center,
                       std::span<double> dist2);

/// Index-encoded comparison used by the count kernels. `outcome` follows the
/// Outcome enum order (0 = A wins ... 4 = invalid).
struct EncodedComparison {
  int model_a;
  int model_b;
  int cluster;
  int outcome;
};

struct CountFlags {
  bool invalid_in_win_support = false;
  bool invalid_in_tie_support = false;
};

/// Dense count tables; model-by-cluster arrays are row-major (model major).
struct CountTables {
  int models = 0;
  int clusters = 0;
  std::vector<std::int64_t> wins;          // models * clusters
  std::vector<std::int64_t> support;       // models * clusters
  std::vector<std::int64_t> ties;          // clusters
  std::vector<std::int64_t> tie_support;   // clusters
  std::vector<std::int64_t> global_wins;   // models
  std::vector<std::int64_t> global_support;

  CountTables() = default;
  CountTables(int m, int k);
  void Merge(const CountTables& other);
  bool operator==(const CountTables&) const = default;
};

CountTables CountComparisonsSerial(std::span<const EncodedComparison> rows, int models,
                                   int clusters, const CountFlags& flags);
CountTables CountComparisons(std::span<const EncodedComparison> rows, int models, int clusters,
                             const CountFlags& flags);

/// Mean softmax cross-entropy over rows and its gradient with respect to the
/// weights (classes x features) and intercepts. Classes with active[c] == 0
/// are excluded from the softmax. Returns the loss.
double SoftmaxLossGradSerial(const Matrix& x, std::span<const int> y, const Matrix& weights,
                             const Vector& intercepts, std::span<const char> active,
                             Matrix* grad_weights, Vector* grad_intercepts);
double SoftmaxLossGrad(const Matrix& x, std::span<const int> y, const Matrix& weights,
                       const Vector& intercepts, std::span<const char> active,
                       Matrix* grad_weights, Vector* grad_intercepts);

/// Rows per block in SoftmaxLossGrad; partial sums are reduced in block order.
inline constexpr Eigen::Index kSoftmaxBlockRows = 256;

}  // namespace tad::kernels
