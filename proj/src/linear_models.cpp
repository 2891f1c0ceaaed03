#include "tad/linear_models.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "tad/kernels.hpp"

namespace tad {

std::string_view ToString(Regularizer reg) {
  switch (reg) {
    case Regularizer::kNone: return "none";
    case Regularizer::kL2: return "l2";
    case Regularizer::kL1: return "l1";
  }
  return "none";
}

std::string_view DisplayName(Regularizer reg) {
  switch (reg) {
    case Regularizer::kNone: return "None";
    case Regularizer::kL2: return "Ridge";
    case Regularizer::kL1: return "Lasso";
  }
  return "None";
}

Regularizer RegularizerFromString(std::string_view s) {
  if (s == "none" || s == "None" || s == "NONE") return Regularizer::kNone;
  if (s == "l2" || s == "L2" || s == "ridge" || s == "Ridge") return Regularizer::kL2;
  if (s == "l1" || s == "L1" || s == "lasso" || s == "Lasso") return Regularizer::kL1;
  throw Error(ErrorKind::kInvalidArgument, "unknown regularizer '" + std::string(s) + "'");
}

namespace {

void CheckFinite(const Matrix& x) {
  if (!x.allFinite()) throw Error(ErrorKind::kInvalidArgument, "non-finite features");
}

// Parameters flattened as [row-major weights | intercepts].
struct Packing {
  Eigen::Index classes;
  Eigen::Index features;

  Eigen::Index size() const { return classes * features + classes; }

  Vector Pack(const Matrix& w, const Vector& b) const {
    Vector theta(size());
    Eigen::Map<Matrix>(theta.data(), classes, features) = w;
    theta.tail(classes) = b;
    return theta;
  }
  void Unpack(const Vector& theta, Matrix& w, Vector& b) const {
    w = Eigen::Map<const Matrix>(theta.data(), classes, features);
    b = theta.tail(classes);
  }
};

double Penalty(const Matrix& w, Regularizer reg, double lambda) {
  switch (reg) {
    case Regularizer::kNone: return 0.0;
    case Regularizer::kL2: return lambda * w.squaredNorm();
    case Regularizer::kL1: return lambda * w.cwiseAbs().sum();
  }
  return 0.0;
}

// Smooth objective and gradient over a packed parameter vector.
struct SmoothObjective {
  const Matrix& x;
  std::span<const int> y;
  std::span<const char> active;
  Packing pack;
  double l2;  // lambda of the L2 term, 0 when absent

  double Value(const Vector& theta, Vector* grad) const {
    Matrix w;
    Vector b;
    pack.Unpack(theta, w, b);
    Matrix gw;
    Vector gb;
    double f = kernels::SoftmaxLossGrad(x, y, w, b, active, grad ? &gw : nullptr,
                                        grad ? &gb : nullptr);
    if (l2 > 0.0) f += l2 * w.squaredNorm();
    if (grad) {
      if (l2 > 0.0) gw += 2.0 * l2 * w;
      *grad = pack.Pack(gw, gb);
    }
    return f;
  }
};

LogisticModel InitialModel(Eigen::Index classes, Eigen::Index features,
                           const std::vector<char>& active, const LogisticModel* warm) {
  LogisticModel m;
  m.active = active;
  if (warm && warm->weights.rows() == classes && warm->weights.cols() == features) {
    m.weights = warm->weights;
    m.intercepts = warm->intercepts;
    for (Eigen::Index c = 0; c < classes; ++c) {
      if (!active[c]) {
        m.weights.row(c).setZero();
        m.intercepts[c] = 0.0;
      }
    }
  } else {
    m.weights = Matrix::Zero(classes, features);
    m.intercepts = Vector::Zero(classes);
  }
  return m;
}

void FitLbfgs(const SmoothObjective& obj, Vector& theta, const LogisticOptions& opt,
              LogisticModel& out) {
  std::deque<std::pair<Vector, Vector>> memory;  // (s, y) pairs
  Vector g;
  double f = obj.Value(theta, &g);
  int it = 0;
  for (; it < opt.max_iters; ++it) {
    const double gnorm = g.norm();
    out.gradient_norm = gnorm;
    if (gnorm <= opt.tolerance) {
      out.converged = true;
      break;
    }
    // Two-loop recursion.
    Vector q = g;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      const auto& [s, yv] = memory[i];
      alpha[i] = s.dot(q) / yv.dot(s);
      q -= alpha[i] * yv;
    }
    if (!memory.empty()) {
      const auto& [s, yv] = memory.back();
      q *= s.dot(yv) / yv.dot(yv);
    } else {
      q /= std::max(1.0, gnorm);
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, yv] = memory[i];
      const double beta = yv.dot(q) / yv.dot(s);
      q += (alpha[i] - beta) * s;
    }
    Vector dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      memory.clear();
      dir = -g / std::max(1.0, gnorm);
      slope = g.dot(dir);
    }
    // Armijo backtracking.
    double step = 1.0;
    Vector trial, g_trial;
    double f_trial = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = theta + step * dir;
      f_trial = obj.Value(trial, &g_trial);
      if (std::isfinite(f_trial) && f_trial <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Vector s = trial - theta;
    Vector yv = g_trial - g;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      memory.emplace_back(std::move(s), std::move(yv));
      if (static_cast<int>(memory.size()) > opt.history) memory.pop_front();
    }
    theta = std::move(trial);
    g = std::move(g_trial);
    f = f_trial;
  }
  if (it == opt.max_iters) {
    out.gradient_norm = g.norm();
    out.converged = out.gradient_norm <= opt.tolerance;
  }
  out.iterations = it;
}

void SoftThresholdWeights(Vector& theta, Eigen::Index n_weights, double threshold) {
  for (Eigen::Index i = 0; i < n_weights; ++i) {
    const double v = theta[i];
    theta[i] = v > threshold ? v - threshold : (v < -threshold ? v + threshold : 0.0);
  }
}

void FitProximal(const SmoothObjective& obj, Vector& theta, const LogisticOptions& opt,
                 LogisticModel& out) {
  const Eigen::Index n_weights = obj.pack.classes * obj.pack.features;
  auto full = [&](const Vector& t, double smooth) {
    return smooth + opt.lambda * t.head(n_weights).cwiseAbs().sum();
  };
  Vector x = theta;
  Vector yv = theta;
  double momentum = 1.0;
  double step = 1.0;
  double f_x = full(x, obj.Value(x, nullptr));
  int it = 0;
  for (; it < opt.max_iters; ++it) {
    Vector g;
    const double f_y = obj.Value(yv, &g);
    Vector z;
    double f_z = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      z = yv - step * g;
      SoftThresholdWeights(z, n_weights, step * opt.lambda);
      const Vector diff = z - yv;
      f_z = obj.Value(z, nullptr);
      if (f_z <= f_y + g.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-15) break;
      step *= 0.5;
    }
    const double mapping = (z - yv).norm() / step;
    out.gradient_norm = mapping;
    const double f_z_full = full(z, f_z);
    if (f_z_full > f_x) {
      // Restart momentum from the last iterate.
      momentum = 1.0;
      yv = x;
      if (mapping <= opt.tolerance) {
        out.converged = true;
        break;
      }
      continue;
    }
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    yv = z + ((momentum - 1.0) / next) * (z - x);
    momentum = next;
    x = std::move(z);
    f_x = f_z_full;
    step *= 1.25;
    if (mapping <= opt.tolerance) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.iterations = it;
  theta = x;
}

}  // namespace

double LogisticObjective(const Matrix& x, std::span<const int> y, const LogisticModel& params,
                         Regularizer reg, double lambda, Matrix* grad_weights,
                         Vector* grad_intercepts) {
  double f = kernels::SoftmaxLossGrad(x, y, params.weights, params.intercepts, params.active,
                                      grad_weights, grad_intercepts);
  f += Penalty(params.weights, reg, lambda);
  if (grad_weights && reg == Regularizer::kL2) *grad_weights += 2.0 * lambda * params.weights;
  return f;
}

LogisticModel FitMultinomialLogReg(const Matrix& x, std::span<const int> y, int class_count,
                                   const LogisticOptions& options,
                                   const LogisticModel* warm_start) {
  if (x.rows() != static_cast<Eigen::Index>(y.size())) {
    throw Error(ErrorKind::kInvalidArgument, "feature rows do not match label count");
  }
  if (x.rows() == 0) throw Error(ErrorKind::kInvalidArgument, "no training rows");
  if (options.lambda < 0.0) throw Error(ErrorKind::kInvalidArgument, "lambda must be >= 0");
  CheckFinite(x);
  std::vector<char> active(class_count, 0);
  for (int label : y) {
    if (label < 0 || label >= class_count) {
      throw Error(ErrorKind::kInvalidArgument, "class label out of range");
    }
    active[label] = 1;
  }
  if (std::count(active.begin(), active.end(), 1) < 2) {
    throw Error(ErrorKind::kInvalidArgument, "single-class degenerate input");
  }
  LogisticModel model = InitialModel(class_count, x.cols(), active, warm_start);
  const Packing pack{class_count, x.cols()};
  const double l2 = options.reg == Regularizer::kL2 ? options.lambda : 0.0;
  const SmoothObjective obj{x, y, active, pack, l2};
  Vector theta = pack.Pack(model.weights, model.intercepts);
  if (options.reg == Regularizer::kL1 && options.lambda > 0.0) {
    FitProximal(obj, theta, options, model);
  } else {
    FitLbfgs(obj, theta, options, model);
  }
  pack.Unpack(theta, model.weights, model.intercepts);
  return model;
}

LogisticPrediction PredictLogReg(const LogisticModel& model, const Matrix& x) {
  if (x.cols() != model.weights.cols()) {
    throw Error(ErrorKind::kInvalidArgument,
                "feature width " + std::to_string(x.cols()) + " does not match model width " +
                    std::to_string(model.weights.cols()));
  }
  LogisticPrediction out;
  out.probabilities = x * model.weights.transpose();
  out.probabilities.rowwise() += model.intercepts.transpose();
  out.labels.resize(x.rows());
  const Eigen::Index classes = model.weights.rows();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto row = out.probabilities.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < classes; ++c) {
      if (model.active[c]) mx = std::max(mx, row[c]);
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) {
      row[c] = model.active[c] ? std::exp(row[c] - mx) : 0.0;
      sum += row[c];
    }
    row /= sum;
    int best = 0;
    for (Eigen::Index c = 1; c < classes; ++c) {
      if (row[c] > row[best]) best = static_cast<int>(c);
    }
    out.labels[i] = best;
  }
  return out;
}

Vector LinearRegression::Predict(const Matrix& x) const {
  if (x.cols() != weights.size()) {
    throw Error(ErrorKind::kInvalidArgument, "feature width does not match regression width");
  }
  return (x * weights).array() + intercept;
}

namespace {

struct Centered {
  Matrix x;
  Vector y;
  Vector x_mean;
  double y_mean;
};

Centered Center(const Matrix& x, const Vector& y) {
  if (x.rows() == 0) throw Error(ErrorKind::kInvalidArgument, "empty design matrix");
  if (x.rows() != y.size()) throw Error(ErrorKind::kInvalidArgument, "X rows do not match y");
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorKind::kInvalidArgument, "non-finite inputs");
  Centered c;
  c.x_mean = x.colwise().mean().transpose();
  c.y_mean = y.mean();
  c.x = x.rowwise() - c.x_mean.transpose();
  c.y = y.array() - c.y_mean;
  return c;
}

}  // namespace

LinearRegression FitRidge(const Matrix& x, const Vector& y, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::kInvalidArgument, "lambda must be >= 0");
  const Centered c = Center(x, y);
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd gram = c.x.transpose() * c.x;
  gram.diagonal().array() += lambda;
  const Vector rhs = c.x.transpose() * c.y;
  LinearRegression out;
  if (lambda > 0.0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    out.weights = ldlt.solve(rhs);
    // One step of iterative refinement.
    out.weights += ldlt.solve(rhs - gram * out.weights);
  } else {
    Eigen::MatrixXd xc = c.x;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xc);
    out.weights = cod.solve(c.y);
  }
  if (p == 0) out.weights = Vector::Zero(0);
  out.intercept = c.y_mean - c.x_mean.dot(out.weights);
  out.normal_residual = p ? (gram * out.weights - rhs).cwiseAbs().maxCoeff() : 0.0;
  return out;
}

LinearRegression FitLasso(const Matrix& x, const Vector& y, double lambda, int max_sweeps,
                          double tolerance) {
  if (lambda < 0.0) throw Error(ErrorKind::kInvalidArgument, "lambda must be >= 0");
  const Centered c = Center(x, y);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector col_sq(p);
  for (Eigen::Index j = 0; j < p; ++j) col_sq[j] = c.x.col(j).squaredNorm() * inv_n;
  Vector w = Vector::Zero(p);
  Vector residual = c.y;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq[j] == 0.0) continue;
      const double rho = c.x.col(j).dot(residual) * inv_n + col_sq[j] * w[j];
      double next = 0.0;
      if (rho > lambda) {
        next = (rho - lambda) / col_sq[j];
      } else if (rho < -lambda) {
        next = (rho + lambda) / col_sq[j];
      }
      const double delta = next - w[j];
      if (delta != 0.0) {
        residual -= delta * c.x.col(j);
        w[j] = next;
        max_change = std::max(max_change, std::abs(delta) * std::sqrt(col_sq[j]));
      }
    }
    if (max_change <= tolerance) {
      ++sweep;
      break;
    }
  }
  LinearRegression out;
  out.weights = w;
  out.intercept = c.y_mean - c.x_mean.dot(w);
  out.iterations = sweep;
  return out;
}

double MeanSquaredError(const Vector& predicted, const Vector& actual) {
  if (predicted.size() != actual.size() || actual.size() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "MSE needs equal, nonempty vectors");
  }
  return (predicted - actual).squaredNorm() / static_cast<double>(actual.size());
}

double Accuracy(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size() || actual.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "accuracy needs equal, nonempty label lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) hits += predicted[i] == actual[i];
  return static_cast<double>(hits) / static_cast<double>(actual.size());
}

}  // namespace tad
