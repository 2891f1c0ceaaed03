#include "tad/features.hpp"

#include <algorithm>

namespace tad {

namespace {

int ModelSlot(const std::vector<std::string>& models, const std::string& id) {
  auto it = std::lower_bound(models.begin(), models.end(), id);
  if (it == models.end() || *it != id) {
    throw Error(ErrorKind::kInvalidArgument, "model '" + id + "' not in index");
  }
  return static_cast<int>(it - models.begin());
}

void CheckCluster(int cluster, int clusters) {
  if (cluster < 0 || cluster >= clusters) {
    throw Error(ErrorKind::kInvalidArgument, "cluster index " + std::to_string(cluster) +
                                                 " outside [0, " + std::to_string(clusters) + ")");
  }
}

}  // namespace

std::vector<double> BuildFeaturesA(const ComparisonRecord& r, const FeatureSpecA& spec,
                                   int cluster) {
  if (!r.response_embedding_diff) {
    throw Error(ErrorKind::kInvalidArgument,
                "record '" + r.record_id + "' lacks response_embedding_diff");
  }
  if (static_cast<int>(r.response_embedding_diff->size()) != spec.diff_dim) {
    throw Error(ErrorKind::kInvalidArgument, "response_embedding_diff width mismatch");
  }
  CheckCluster(cluster, spec.clusters);
  const int m = static_cast<int>(spec.models.size());
  std::vector<double> v(spec.width(), 0.0);
  v[ModelSlot(spec.models, r.model_a)] = 1.0;
  v[m + ModelSlot(spec.models, r.model_b)] = 1.0;
  int offset = 2 * m;
  if (spec.include_cluster) {
    v[offset + cluster] = 1.0;
    offset += spec.clusters;
  }
  std::copy(r.response_embedding_diff->begin(), r.response_embedding_diff->end(),
            v.begin() + offset);
  return v;
}

std::vector<double> BuildFeaturesB(const ComparisonRecord& r, const FeatureSpecB& spec,
                                   int cluster) {
  CheckCluster(cluster, spec.clusters);
  std::vector<double> v(spec.width(), 0.0);
  int offset = 0;
  if (spec.include_cluster) {
    v[cluster] = 1.0;
    offset = spec.clusters;
  }
  v[offset + static_cast<int>(r.outcome)] = 1.0;
  v[offset + kOutcomeCount] = static_cast<double>(r.prompt_length);
  return v;
}

Matrix BuildMatrixA(const std::vector<ComparisonRecord>& records, const std::vector<int>& clusters,
                    const std::vector<std::size_t>& rows, const FeatureSpecA& spec) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), spec.width());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = BuildFeaturesA(records[rows[i]], spec, clusters[rows[i]]);
    x.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return x;
}

Matrix BuildMatrixB(const std::vector<ComparisonRecord>& records, const std::vector<int>& clusters,
                    const std::vector<std::size_t>& rows, const FeatureSpecB& spec) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), spec.width());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = BuildFeaturesB(records[rows[i]], spec, clusters[rows[i]]);
    x.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return x;
}

std::optional<int> TaskALabel(Outcome outcome, bool exclude_invalid) {
  switch (outcome) {
    case Outcome::kAWins: return 0;
    case Outcome::kBWins: return 1;
    case Outcome::kTie:
    case Outcome::kTieBothBad: return 2;
    case Outcome::kInvalid:
      if (exclude_invalid) return std::nullopt;
      return 3;
  }
  return std::nullopt;
}

}  // namespace tad
