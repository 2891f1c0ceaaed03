#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tad/common.hpp"

namespace tad {

/// Regularizer families of the probe sweep. L2 is reported as "Ridge" and L1
/// as "Lasso".
enum class Regularizer { kNone, kL2, kL1 };

std::string_view ToString(Regularizer reg);
std::string_view DisplayName(Regularizer reg);
Regularizer RegularizerFromString(std::string_view s);

struct LogisticOptions {
  Regularizer reg = Regularizer::kNone;
  double lambda = 0.0;
  int max_iters = 500;
  // Stop when the gradient norm (the proximal gradient mapping for L1)
  // falls to this value.
  double tolerance = 1e-6;
  int history = 10;  // L-BFGS memory
};

/// Multinomial logistic regression. Classes absent from the training labels
/// are inactive: zero weights and zero probability.
struct LogisticModel {
  Matrix weights;     // classes x features
  Vector intercepts;  // classes
  std::vector<char> active;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;

  int class_count() const { return static_cast<int>(weights.rows()); }
  int feature_count() const { return static_cast<int>(weights.cols()); }
};

/// Objective: mean softmax cross-entropy + lambda * ||W||_F^2 (L2) or
/// lambda * sum |W| (L1); intercepts are never penalised. Gradients are
/// written for the smooth part (cross-entropy plus any L2 term).
double LogisticObjective(const Matrix& x, std::span<const int> y, const LogisticModel& params,
                         Regularizer reg, double lambda, Matrix* grad_weights = nullptr,
                         Vector* grad_intercepts = nullptr);

/// Deterministic full-batch fit from zero (or `warm_start`). NONE and L2 use
/// L-BFGS with Armijo backtracking; L1 uses accelerated proximal gradient
/// with backtracking and soft-thresholding.
LogisticModel FitMultinomialLogReg(const Matrix& x, std::span<const int> y, int class_count,
                                   const LogisticOptions& options,
                                   const LogisticModel* warm_start = nullptr);

struct LogisticPrediction {
  std::vector<int> labels;
  Matrix probabilities;  // rows x classes
};

/// Softmax probabilities and argmax labels (lowest index wins ties).
LogisticPrediction PredictLogReg(const LogisticModel& model, const Matrix& x);

/// Linear regression y ~ w.x + b.
struct LinearRegression {
  Vector weights;
  double intercept = 0.0;
  // ||(Xc^T Xc + lambda I) w - Xc^T yc||_inf at the solution (ridge fits).
  double normal_residual = 0.0;
  int iterations = 0;

  Vector Predict(const Matrix& x) const;
};

/// Ridge on column-centred data: (Xc^T Xc + lambda I) w = Xc^T yc, intercept
/// from the means. lambda = 0 falls back to a rank-revealing minimum-norm
/// least-squares solve.
LinearRegression FitRidge(const Matrix& x, const Vector& y, double lambda);

/// Lasso on centred data, minimising (1/2n)||yc - Xc w||^2 + lambda ||w||_1
/// by cyclic coordinate descent.
LinearRegression FitLasso(const Matrix& x, const Vector& y, double lambda, int max_sweeps = 10000,
                          double tolerance = 1e-10);

double MeanSquaredError(const Vector& predicted, const Vector& actual);
double Accuracy(std::span<const int> predicted, std::span<const int> actual);

}  // namespace tad
