#include "tad/kernels.hpp"

#include <cmath>
#include <limits>

#include <omp.h>

namespace tad::kernels {

namespace {

inline double SquaredDistance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

inline void AssignRow(const Matrix& points, const Matrix& centroids,
                      std::span<const char> active, std::span<int> labels,
                      std::span<double> dist2, bool sticky, Eigen::Index i) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    if (!active[k]) continue;
    const double d = SquaredDistance(points, i, centroids, k);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  if (sticky) {
    const int prev = labels[i];
    if (prev >= 0 && prev < centroids.rows() && active[prev] && prev != best) {
      const double d_prev = SquaredDistance(points, i, centroids, prev);
      if (d_prev <= best_d) {
        best = prev;
        best_d = d_prev;
      }
    }
  }
  labels[i] = best;
  dist2[i] = best_d;
}

}  // namespace

void NearestCentroidSerial(const Matrix& points, const Matrix& centroids,
                           std::span<const char> active, std::span<int> labels,
                           std::span<double> dist2, bool sticky) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    AssignRow(points, centroids, active, labels, dist2, sticky, i);
  }
}

void NearestCentroid(const Matrix& points, const Matrix& centroids, std::span<const char> active,
                     std::span<int> labels, std::span<double> dist2, bool sticky) {
  const Eigen::Index n = points.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    AssignRow(points, centroids, active, labels, dist2, sticky, i);
  }
}

void UpdateMinDistanceSerial(const Matrix& points, const Eigen::Ref<const Vector>& center,
                             std::span<double> dist2) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double d = (points.row(i).transpose() - center).squaredNorm();
    if (d < dist2[i]) dist2[i] = d;
  }
}

void UpdateMinDistance(const Matrix& points, const Eigen::Ref<const Vector>& center,
                       std::span<double> dist2) {
  const Eigen::Index n = points.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (points.row(i).transpose() - center).squaredNorm();
    if (d < dist2[i]) dist2[i] = d;
  }
}

CountTables::CountTables(int m, int k)
    : models(m),
      clusters(k),
      wins(static_cast<std::size_t>(m) * k, 0),
      support(static_cast<std::size_t>(m) * k, 0),
      ties(k, 0),
      tie_support(k, 0),
      global_wins(m, 0),
      global_support(m, 0) {}

void CountTables::Merge(const CountTables& o) {
  if (o.models != models || o.clusters != clusters) {
    throw Error(ErrorKind::kInvalidArgument, "count table shapes differ");
  }
  auto add = [](std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  add(wins, o.wins);
  add(support, o.support);
  add(ties, o.ties);
  add(tie_support, o.tie_support);
  add(global_wins, o.global_wins);
  add(global_support, o.global_support);
}

namespace {

constexpr int kAWins = 0;
constexpr int kBWins = 1;
constexpr int kTie = 2;
constexpr int kTieBothBad = 3;
constexpr int kInvalid = 4;

inline void CountOne(const EncodedComparison& r, const CountFlags& flags, CountTables& t) {
  const bool invalid = r.outcome == kInvalid;
  const std::size_t k = static_cast<std::size_t>(t.clusters);
  if (!invalid || flags.invalid_in_win_support) {
    const std::size_t a = static_cast<std::size_t>(r.model_a);
    const std::size_t b = static_cast<std::size_t>(r.model_b);
    ++t.support[a * k + r.cluster];
    ++t.support[b * k + r.cluster];
    ++t.global_support[a];
    ++t.global_support[b];
    if (r.outcome == kAWins) {
      ++t.wins[a * k + r.cluster];
      ++t.global_wins[a];
    } else if (r.outcome == kBWins) {
      ++t.wins[b * k + r.cluster];
      ++t.global_wins[b];
    }
  }
  if (!invalid || flags.invalid_in_tie_support) {
    ++t.tie_support[r.cluster];
    if (r.outcome == kTie || r.outcome == kTieBothBad) ++t.ties[r.cluster];
  }
}

void CheckRow(const EncodedComparison& r, int models, int clusters) {
  if (r.model_a < 0 || r.model_a >= models || r.model_b < 0 || r.model_b >= models ||
      r.cluster < 0 || r.cluster >= clusters || r.outcome < 0 || r.outcome > kInvalid) {
    throw Error(ErrorKind::kInvalidArgument, "encoded comparison out of range");
  }
}

}  // namespace

CountTables CountComparisonsSerial(std::span<const EncodedComparison> rows, int models,
                                   int clusters, const CountFlags& flags) {
  CountTables t(models, clusters);
  for (const auto& r : rows) {
    CheckRow(r, models, clusters);
    CountOne(r, flags, t);
  }
  return t;
}

CountTables CountComparisons(std::span<const EncodedComparison> rows, int models, int clusters,
                             const CountFlags& flags) {
  for (const auto& r : rows) CheckRow(r, models, clusters);
  const int threads = omp_get_max_threads();
  std::vector<CountTables> partial(threads, CountTables(models, clusters));
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel
  {
    CountTables& local = partial[omp_get_thread_num()];
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) CountOne(rows[i], flags, local);
  }
  CountTables total(models, clusters);
  for (const auto& p : partial) total.Merge(p);
  return total;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Softmax over active classes of one logit row, in place; returns log-sum-exp.
template <typename Row>
double SoftmaxInPlace(Row&& logits, std::span<const char> active) {
  double mx = kNegInf;
  for (Eigen::Index c = 0; c < logits.size(); ++c) {
    if (active[c] && logits[c] > mx) mx = logits[c];
  }
  double sum = 0.0;
  for (Eigen::Index c = 0; c < logits.size(); ++c) {
    if (active[c]) {
      logits[c] = std::exp(logits[c] - mx);
      sum += logits[c];
    } else {
      logits[c] = 0.0;
    }
  }
  for (Eigen::Index c = 0; c < logits.size(); ++c) logits[c] /= sum;
  return mx + std::log(sum);
}

}  // namespace

double SoftmaxLossGradSerial(const Matrix& x, std::span<const int> y, const Matrix& weights,
                             const Vector& intercepts, std::span<const char> active,
                             Matrix* grad_weights, Vector* grad_intercepts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index classes = weights.rows();
  const Eigen::Index p = x.cols();
  if (grad_weights) grad_weights->setZero(classes, p);
  if (grad_intercepts) grad_intercepts->setZero(classes);
  double loss = 0.0;
  std::vector<double> z(classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < classes; ++c) {
      double s = intercepts[c];
      for (Eigen::Index j = 0; j < p; ++j) s += weights(c, j) * x(i, j);
      z[c] = s;
    }
    Eigen::Map<Eigen::VectorXd> zr(z.data(), classes);
    const double raw = z[y[i]];
    const double lse = SoftmaxInPlace(zr, active);
    loss += lse - raw;
    if (grad_weights || grad_intercepts) {
      for (Eigen::Index c = 0; c < classes; ++c) {
        const double r = z[c] - (c == y[i] ? 1.0 : 0.0);
        if (grad_intercepts) (*grad_intercepts)[c] += r;
        if (grad_weights) {
          for (Eigen::Index j = 0; j < p; ++j) (*grad_weights)(c, j) += r * x(i, j);
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  if (grad_weights) *grad_weights *= inv;
  if (grad_intercepts) *grad_intercepts *= inv;
  return loss * inv;
}

double SoftmaxLossGrad(const Matrix& x, std::span<const int> y, const Matrix& weights,
                       const Vector& intercepts, std::span<const char> active,
                       Matrix* grad_weights, Vector* grad_intercepts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index classes = weights.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index blocks = (n + kSoftmaxBlockRows - 1) / kSoftmaxBlockRows;
  const bool want_grad = grad_weights || grad_intercepts;

  std::vector<double> block_loss(blocks, 0.0);
  std::vector<Matrix> block_gw(want_grad ? blocks : 0);
  std::vector<Vector> block_gb(want_grad ? blocks : 0);

#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index r0 = b * kSoftmaxBlockRows;
    const Eigen::Index rows = std::min(kSoftmaxBlockRows, n - r0);
    const auto xb = x.middleRows(r0, rows);
    Matrix z = xb * weights.transpose();
    z.rowwise() += intercepts.transpose();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const int label = y[r0 + i];
      const double raw = z(i, label);
      loss += SoftmaxInPlace(z.row(i), active) - raw;
      z(i, label) -= 1.0;
    }
    block_loss[b] = loss;
    if (want_grad) {
      block_gw[b].noalias() = z.transpose() * xb;
      block_gb[b] = z.colwise().sum().transpose();
    }
  }

  double loss = 0.0;
  for (double l : block_loss) loss += l;
  const double inv = 1.0 / static_cast<double>(n);
  if (want_grad) {
    Matrix gw = Matrix::Zero(classes, p);
    Vector gb = Vector::Zero(classes);
    for (Eigen::Index b = 0; b < blocks; ++b) {
      gw += block_gw[b];
      gb += block_gb[b];
    }
    if (grad_weights) *grad_weights = gw * inv;
    if (grad_intercepts) *grad_intercepts = gb * inv;
  }
  return loss * inv;
}

}  // namespace tad::kernels
