#include "tad/reducer.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace tad {

LinearReducer::LinearReducer(Vector center, Matrix basis)
    : center_(std::move(center)), basis_(std::move(basis)) {
  if (basis_.cols() != center_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "reducer basis width does not match center");
  }
}

Vector LinearReducer::Reduce(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != center_.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "reducer expects dimension " + std::to_string(center_.size()) + ", got " +
                    std::to_string(x.size()));
  }
  return basis_ * (x - center_);
}

Matrix LinearReducer::ReduceRows(const Matrix& x) const {
  if (x.cols() != center_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "reducer input width mismatch");
  }
  Matrix centered = x.rowwise() - center_.transpose();
  return centered * basis_.transpose();
}

double LinearReducer::OrthonormalityError() const {
  const Eigen::Index k = basis_.rows();
  Matrix g = basis_ * basis_.transpose();
  return (g - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
}

ReducerFit FitReducer(const Matrix& embeddings, int output_dim) {
  const Eigen::Index n = embeddings.rows();
  const Eigen::Index d = embeddings.cols();
  if (output_dim < 1 || output_dim > d || n <= output_dim) {
    throw Error(ErrorKind::kInvalidArgument,
                "reducer needs rows > output_dim >= 1 and output_dim <= input dimension");
  }
  Vector center = embeddings.colwise().mean().transpose();
  Matrix centered = embeddings.rowwise() - center.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const double total = cov.trace();
  if (!(total > 0.0) || centered.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorKind::kNumerical, "zero variance");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumerical, "eigendecomposition failed");
  }
  // Eigenvalues come back ascending.
  Matrix basis(output_dim, d);
  Vector explained(output_dim);
  for (int r = 0; r < output_dim; ++r) {
    const Eigen::Index col = d - 1 - r;
    Vector v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(v[j]) > best) {
        best = std::abs(v[j]);
        arg = j;
      }
    }
    if (v[arg] < 0) v = -v;
    basis.row(r) = v.transpose();
    explained[r] = eig.eigenvalues()[col];
  }
  return {LinearReducer(std::move(center), std::move(basis)), explained, total};
}

}  // namespace tad
