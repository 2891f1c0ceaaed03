#include "tad/kmeans.hpp"

#include <limits>
#include <random>

#include "tad/kernels.hpp"

namespace tad {

double KMeansObjective(const Matrix& points, const Matrix& centroids,
                       const std::vector<int>& assignments) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centroids.row(assignments[i])).squaredNorm();
  }
  return total;
}

namespace {

Matrix SeedPlusPlus(const Matrix& points, int k, std::mt19937_64& rng, bool parallel) {
  const Eigen::Index n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto update = [&](Eigen::Index c) {
    const Vector center = points.row(c).transpose();
    if (parallel) {
      kernels::UpdateMinDistance(points, center, d2);
    } else {
      kernels::UpdateMinDistanceSerial(points, center, d2);
    }
  };
  Eigen::Index first = static_cast<Eigen::Index>(UniformIndex(rng, n));
  centroids.row(0) = points.row(first);
  update(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (!(total > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "fewer distinct points than clusters");
    }
    const double target = UniformUnit(rng) * total;
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    centroids.row(c) = points.row(pick);
    update(pick);
  }
  return centroids;
}

void UpdateCentroids(const Matrix& points, std::vector<int>& labels, Matrix& centroids,
                     int iteration, std::vector<EmptyClusterRepair>& repairs) {
  const Eigen::Index k = centroids.rows();
  std::vector<Eigen::Index> counts(k, 0);
  Matrix sums = Matrix::Zero(k, points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(labels[i]) += points.row(i);
    ++counts[labels[i]];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    Eigen::Index donor = 0;
    for (Eigen::Index j = 1; j < k; ++j) {
      if (counts[j] > counts[donor]) donor = j;
    }
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (labels[i] != donor) continue;
      const double d = (points.row(i) - centroids.row(donor)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    labels[far] = static_cast<int>(c);
    counts[c] = 1;
    --counts[donor];
    sums.row(donor) -= points.row(far);
    centroids.row(c) = points.row(far);
    centroids.row(donor) = sums.row(donor) / static_cast<double>(counts[donor]);
    repairs.push_back({iteration, static_cast<int>(c), static_cast<int>(donor),
                       static_cast<int>(far)});
  }
}

}  // namespace

KMeansResult FitKMeans(const Matrix& points, int k, std::uint64_t seed,
                       const KMeansOptions& options) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  if (k > n) {
    throw Error(ErrorKind::kInvalidArgument,
                "K (" + std::to_string(k) + ") exceeds point count (" + std::to_string(n) + ")");
  }
  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centroids = SeedPlusPlus(points, k, rng, options.parallel);

  const std::vector<char> active(k, 1);
  std::vector<int> labels(n, -1);
  std::vector<double> d2(n);
  auto assign = [&](std::vector<int>& out, bool sticky) {
    if (options.parallel) {
      kernels::NearestCentroid(points, result.centroids, active, out, d2, sticky);
    } else {
      kernels::NearestCentroidSerial(points, result.centroids, active, out, d2, sticky);
    }
  };
  assign(labels, false);

  std::vector<int> next(n);
  for (int it = 0; it < options.max_iters; ++it) {
    UpdateCentroids(points, labels, result.centroids, it, result.repairs);
    result.objective.push_back(KMeansObjective(points, result.centroids, labels));
    result.iterations = it + 1;
    next = labels;
    assign(next, true);
    if (next == labels) {
      result.converged = true;
      break;
    }
    labels.swap(next);
  }
  if (!result.converged) {
    UpdateCentroids(points, labels, result.centroids, options.max_iters, result.repairs);
    result.objective.push_back(KMeansObjective(points, result.centroids, labels));
  }
  result.assignments = std::move(labels);
  return result;
}

}  // namespace tad
