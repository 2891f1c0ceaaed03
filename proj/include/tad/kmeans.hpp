#pragma once

#include <cstdint>
#include <vector>

#include "tad/common.hpp"

namespace tad {

struct KMeansOptions {
  int max_iters = 300;
  // Run the OpenMP assignment kernel; the serial kernel gives identical labels.
  bool parallel = true;
};

/// A cluster emptied by a Lloyd step and refilled by splitting the largest
/// cluster at its farthest member.
struct EmptyClusterRepair {
  int iteration;
  int empty_cluster;
  int donor_cluster;
  int moved_point;
};

struct KMeansResult {
  Matrix centroids;                 // K x dims
  std::vector<int> assignments;     // one per point
  std::vector<double> objective;    // within-cluster sum of squares after each step
  int iterations = 0;
  bool converged = false;
  std::vector<EmptyClusterRepair> repairs;
};

/// Lloyd's algorithm from k-means++ seeding. Deterministic for a given
/// (points, k, seed). Requires 1 <= k <= rows and at least k distinct rows.
KMeansResult FitKMeans(const Matrix& points, int k, std::uint64_t seed,
                       const KMeansOptions& options = {});

/// Sum of squared distances from each point to its assigned centroid.
double KMeansObjective(const Matrix& points, const Matrix& centroids,
                       const std::vector<int>& assignments);

}  // namespace tad
