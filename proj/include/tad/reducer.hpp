#pragma once

#include "tad/common.hpp"

namespace tad {

/// Centered orthonormal projection x -> basis * (x - center).
class LinearReducer {
 public:
  LinearReducer() = default;
  LinearReducer(Vector center, Matrix basis);

  int input_dim() const { return static_cast<int>(center_.size()); }
  int output_dim() const { return static_cast<int>(basis_.rows()); }
  const Vector& center() const { return center_; }
  const Matrix& basis() const { return basis_; }

  Vector Reduce(const Eigen::Ref<const Vector>& x) const;
  /// Reduces every row.
  Matrix ReduceRows(const Matrix& x) const;

  /// max |B B^T - I|.
  double OrthonormalityError() const;

  bool operator==(const LinearReducer& o) const {
    return center_ == o.center_ && basis_ == o.basis_;
  }

 private:
  Vector center_;
  Matrix basis_;  // output_dim x input_dim
};

struct ReducerFit {
  LinearReducer reducer;
  Vector explained_variance;  // top output_dim eigenvalues, descending
  double total_variance = 0.0;
};

/// Principal-component reducer: center = column mean, basis rows = the top
/// `output_dim` eigenvectors of the sample covariance, each signed so its
/// largest-magnitude entry is positive (first such entry on ties).
/// Requires rows > output_dim >= 1 and output_dim <= cols. Throws
/// "zero variance" when every row is identical.
ReducerFit FitReducer(const Matrix& embeddings, int output_dim);

}  // namespace tad
