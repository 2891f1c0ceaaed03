#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "tad/embedding.hpp"
#include "tad/kernels.hpp"
#include "tad/kmeans.hpp"
#include "tad/reducer.hpp"
#include "tad/synthetic.hpp"
#include "tad/task_model.hpp"

namespace {

using tad::Matrix;
using tad::Vector;

Matrix Gaussian(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

// Identity reducer over `dim` inputs and a model with the given centroids.
tad::TaskTypeModel IdentityModel(const Matrix& centroids) {
  tad::TaskTypeModel m;
  const auto dim = centroids.cols();
  m.embedder.dimension = static_cast<int>(dim);
  m.reducer = tad::LinearReducer(Vector::Zero(dim), Matrix::Identity(dim, dim));
  m.centroids = centroids;
  for (int c = 0; c < centroids.rows(); ++c) {
    m.labels.push_back("c" + std::to_string(c));
    m.keywords.push_back({});
  }
  return m;
}

TEST(HashEmbedder, Deterministic) {
  tad::HashEmbedder e(64, 3);
  EXPECT_EQ(e.Embed("same text here"), e.Embed("same text here"));
}

TEST(HashEmbedder, MatchesDocumentedRule) {
  tad::HashEmbedder e(8, 0);
  const auto v = e.Embed("abc");
  ASSERT_EQ(v.size(), 8u);
  const auto ref = oracle::HashEmbed("abc", 8, 0);
  double norm = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_DOUBLE_EQ(v[i], ref[i]);
    norm += v[i] * v[i];
  }
  EXPECT_NEAR(norm, 1.0, 1e-12);
  for (const std::string t : {"Hello, World! 42", "sort a list, sort an array", "\xc3\xa9t\xc3\xa9 caf\xc3\xa9", "???"}) {
    tad::HashEmbedder seeded(16, 99);
    const auto got = seeded.Embed(t);
    const auto want = oracle::HashEmbed(t, 16, 99);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_DOUBLE_EQ(got[i], want[i]) << t;
  }
}

TEST(HashEmbedder, BatchIndependentOfOrder) {
  tad::HashEmbedder e(32, 1);
  std::vector<std::string> texts = {"one two", "three", "four five six", "seven"};
  const Matrix a = e.EmbedBatch(texts);
  std::reverse(texts.begin(), texts.end());
  const Matrix b = e.EmbedBatch(texts);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a.row(i), b.row(3 - i));
  const auto v = e.Embed("one two");
  EXPECT_NEAR(Eigen::Map<const Vector>(v.data(), 32).dot(a.row(0).transpose()), 1.0, 1e-12);
}

TEST(ServiceEmbedder, LengthMismatchIsAnError) {
  // Unreachable endpoint: the embedder fails as unavailable rather than
  // returning a vector of the wrong size.
  tad::EndpointConfig ep;
  ep.base_url = "http://127.0.0.1:1";
  ep.timeout = std::chrono::milliseconds(200);
  tad::ServiceEmbedder e(384, ep);
  EXPECT_THROW(e.Embed("x"), tad::Error);
}

TEST(Reducer, LineInThreeSpace) {
  Matrix pts(5, 3);
  for (int i = 0; i < 5; ++i) pts.row(i) << 1.0 * i, 2.0 * i, -1.0 * i;
  const auto fit = tad::FitReducer(pts, 1);
  const Matrix r = fit.reducer.ReduceRows(pts);
  const double sign = r(1, 0) > r(0, 0) ? 1.0 : -1.0;
  for (int i = 1; i < 5; ++i) EXPECT_GT(sign * (r(i, 0) - r(i - 1, 0)), 0.0);
  EXPECT_NEAR(std::abs(r(4, 0) - r(0, 0)), 4 * std::sqrt(6.0), 1e-9);
}

TEST(Reducer, MatchesJacobiEigenSolver) {
  const int d = 6;
  const Matrix x = Gaussian(400, d, 17);
  const auto fit = tad::FitReducer(x, 2);
  // Covariance by hand.
  std::vector<double> mean(d, 0.0);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < d; ++j) mean[j] += x(i, j) / x.rows();
  oracle::Grid cov(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) cov[j][k] += (x(i, j) - mean[j]) * (x(i, k) - mean[k]) / (x.rows() - 1);
  const auto [values, vectors] = oracle::Jacobi(cov);
  double total = 0;
  for (double v : values) total += v;
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(fit.explained_variance[c], values[c], 1e-9);
    double dot = 0;
    for (int j = 0; j < d; ++j) dot += fit.reducer.basis()(c, j) * vectors[j][c];
    EXPECT_NEAR(std::abs(dot), 1.0, 1e-8);
  }
  EXPECT_NEAR(fit.total_variance, total, 1e-9);
  // Isotropic sample: two of six directions carry roughly a third.
  EXPECT_NEAR((values[0] + values[1]) / total, 2.0 / d, 0.1);
  EXPECT_LE(fit.reducer.OrthonormalityError(), 1e-8);
}

TEST(Reducer, ZeroVariance) {
  Matrix pts(2, 3);
  pts << 1, 2, 3, 1, 2, 3;
  try {
    tad::FitReducer(pts, 1);
    FAIL();
  } catch (const tad::Error& e) {
    EXPECT_NE(std::string(e.what()).find("zero variance"), std::string::npos);
  }
}

TEST(KMeans, SaturatedCase) {
  const Matrix pts = Gaussian(7, 3, 2);
  const auto r = tad::FitKMeans(pts, 7, 0);
  EXPECT_NEAR(r.objective.back(), 0.0, 1e-20);
  std::set<int> used(r.assignments.begin(), r.assignments.end());
  EXPECT_EQ(used.size(), 7u);
}

TEST(KMeans, SixPointExhaustiveOptimum) {
  Matrix pts(6, 2);
  pts << 0, 0, 1, 0, 0, 1, 10, 10, 11, 10, 10, 11;
  // Best of all 2^5 - 1 nontrivial bipartitions.
  double best = 1e300;
  std::vector<int> best_labels;
  for (int mask = 1; mask < 63; ++mask) {
    if (mask & 32) continue;  // fix point 5 in group 0 to skip mirror images
    std::vector<int> lab(6);
    for (int i = 0; i < 6; ++i) lab[i] = (mask >> i) & 1;
    double obj = 0;
    for (int g = 0; g < 2; ++g) {
      double mx = 0, my = 0;
      int n = 0;
      for (int i = 0; i < 6; ++i)
        if (lab[i] == g) mx += pts(i, 0), my += pts(i, 1), ++n;
      mx /= n;
      my /= n;
      for (int i = 0; i < 6; ++i)
        if (lab[i] == g) obj += (pts(i, 0) - mx) * (pts(i, 0) - mx) + (pts(i, 1) - my) * (pts(i, 1) - my);
    }
    if (obj < best) best = obj, best_labels = lab;
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = tad::FitKMeans(pts, 2, seed);
    EXPECT_NEAR(r.objective.back(), best, 1e-12);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        EXPECT_EQ(r.assignments[i] == r.assignments[j], best_labels[i] == best_labels[j]);
    // Centroids are the group means.
    for (int c = 0; c < 2; ++c) {
      const bool low = r.centroids(c, 0) < 5;
      EXPECT_NEAR(r.centroids(c, 0), low ? 1.0 / 3 : 31.0 / 3, 1e-12);
      EXPECT_NEAR(r.centroids(c, 1), low ? 1.0 / 3 : 31.0 / 3, 1e-12);
    }
  }
}

TEST(KMeans, ObjectiveNonIncreasingAndDeterministic) {
  for (int inst = 0; inst < 30; ++inst) {
    const Matrix pts = Gaussian(60 + inst, 3, 100 + inst);
    const auto r = tad::FitKMeans(pts, 2 + inst % 6, inst);
    for (std::size_t i = 1; i < r.objective.size(); ++i) EXPECT_LE(r.objective[i], r.objective[i - 1]);
    EXPECT_NEAR(r.objective.back(), tad::KMeansObjective(pts, r.centroids, r.assignments), 1e-9);
    const auto again = tad::FitKMeans(pts, 2 + inst % 6, inst);
    EXPECT_EQ(again.assignments, r.assignments);
    EXPECT_EQ(again.centroids, r.centroids);
    tad::KMeansOptions serial;
    serial.parallel = false;
    const auto s = tad::FitKMeans(pts, 2 + inst % 6, inst, serial);
    EXPECT_EQ(s.assignments, r.assignments);
  }
}

TEST(KMeans, FewerDistinctPointsThanK) {
  Matrix pts(4, 1);
  pts << 1, 1, 2, 2;
  EXPECT_THROW(tad::FitKMeans(pts, 3, 0), tad::Error);
}

TEST(Reassign, NoOpWhenAllLarge) {
  Matrix c(2, 1);
  c << 0, 10;
  auto m = IdentityModel(c);
  std::vector<int> a = {0, 0, 1, 1};
  tad::ReassignSmallClusters(m, a, 2);
  EXPECT_TRUE(m.reassignment_map.empty());
  EXPECT_EQ(a, (std::vector<int>{0, 0, 1, 1}));
}

TEST(Reassign, SingletonJoinsNearerSurvivor) {
  Matrix c(3, 2);
  c << 0, 0, 10, 0, 7, 1;  // distances from cluster 2: sqrt(50) to 0, sqrt(10) to 1
  auto m = IdentityModel(c);
  std::vector<int> a(21, 0);
  for (int i = 10; i < 20; ++i) a[i] = 1;
  a[20] = 2;
  tad::ReassignSmallClusters(m, a, 2);
  EXPECT_EQ(m.reassignment_map.at(2), 1);
  EXPECT_EQ(a[20], 1);
  EXPECT_FALSE(m.IsSurviving(2));
}

TEST(Reassign, NoLargeCluster) {
  Matrix c(2, 1);
  c << 0, 1;
  auto m = IdentityModel(c);
  std::vector<int> a = {0, 1};
  try {
    tad::ReassignSmallClusters(m, a, 2);
    FAIL();
  } catch (const tad::Error& e) {
    EXPECT_NE(std::string(e.what()).find("no large cluster exists"), std::string::npos);
  }
}

TEST(Labels, FrequencyAndTieRules) {
  const auto l = tad::LabelClusters({{"sort a list", "sort an array"}, {"the", "the"}, {"beta alpha"}});
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0].keywords.front(), "sort");
  EXPECT_EQ(l[1].label, "unlabeled");
  EXPECT_EQ(l[2].keywords, (std::vector<std::string>{"alpha", "beta"}));
}

TEST(Assign, ExactCentroidAndEquidistant) {
  tad::HashEmbedder e(8, 0);
  const auto v = e.Embed("exact match prompt");
  Matrix c(3, 8);
  c.row(0) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), 8);
  c.row(1) = -c.row(0);
  c.row(2) = Eigen::RowVectorXd::Constant(8, 5.0);
  const auto m = IdentityModel(c);
  const auto a = tad::Assign(m, "exact match prompt", e);
  EXPECT_EQ(a.cluster, 0);
  EXPECT_DOUBLE_EQ(a.confidence, 1.0);

  Matrix two(2, 1);
  two << -1, 1;
  const auto m2 = IdentityModel(two);
  Vector origin = Vector::Zero(1);
  const auto t = tad::AssignPoint(m2, origin);
  EXPECT_EQ(t.cluster, 0);
  EXPECT_DOUBLE_EQ(t.confidence, 0.5);
}

TEST(Assign, MatchesBruteForceScan) {
  tad::HashEmbedder e(8, 0);
  const Matrix c = Gaussian(3, 8, 5) * 0.4;
  auto m = IdentityModel(c);
  for (const std::string p : {"how do I sort a list", "write a poem", "fix this bug", "translate hello"}) {
    const auto v = e.Embed(p);
    std::vector<std::pair<double, int>> d;
    for (int k = 0; k < 3; ++k) {
      double s = 0;
      for (int j = 0; j < 8; ++j) s += (v[j] - c(k, j)) * (v[j] - c(k, j));
      d.push_back({std::sqrt(s), k});
    }
    std::sort(d.begin(), d.end());
    const auto a = tad::Assign(m, p, e);
    EXPECT_EQ(a.cluster, d[0].second);
    EXPECT_NEAR(a.confidence, d[1].first / (d[0].first + d[1].first), 1e-12);
    EXPECT_EQ(a.runner_up_cluster, d[1].second);
  }
}

TEST(Assign, SkipsRetiredClusters) {
  Matrix c(3, 1);
  c << 0, 10, 1;
  auto m = IdentityModel(c);
  m.reassignment_map[2] = 0;
  Vector p(1);
  p << 1.0;
  EXPECT_EQ(tad::AssignPoint(m, p).cluster, 0);
}

TEST(TaskTyping, FitRespectsMinimumSizeAndRoundTrips) {
  tad::SyntheticSpec spec;
  spec.records = 600;
  spec.topics = 6;
  const auto recs = tad::GenerateSyntheticCorpus(spec, 3);
  tad::TaskTypingConfig cfg;
  cfg.cluster_count = 12;
  cfg.reduced_dim = 5;
  cfg.embedder.dimension = 64;
  cfg.min_cluster_size = 40;
  const auto fit = tad::FitTaskTyping(recs, cfg);
  std::map<int, int> sizes;
  for (int a : fit.assignments) ++sizes[a];
  for (int c : fit.model.SurvivingClusters()) EXPECT_GE(sizes[c], 40);
  for (const auto& [c, n] : sizes) EXPECT_TRUE(fit.model.IsSurviving(c));

  const auto path = (std::filesystem::temp_directory_path() / "tad_tm.json").string();
  tad::SaveTaskModel(fit.model, path);
  EXPECT_EQ(tad::LoadTaskModel(path), fit.model);
  EXPECT_EQ(tad::LoadTaskModel(path).Version(), fit.model.Version());
  std::filesystem::remove(path);
}

TEST(Kernels, ParallelMatchesSerial) {
  const Matrix pts = Gaussian(1000, 4, 8);
  const Matrix cen = Gaussian(7, 4, 9);
  std::vector<char> active = {1, 1, 0, 1, 1, 1, 1};
  std::vector<int> l1(1000), l2(1000);
  std::vector<double> d1(1000), d2(1000);
  tad::kernels::NearestCentroidSerial(pts, cen, active, l1, d1);
  tad::kernels::NearestCentroid(pts, cen, active, l2, d2);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(d1, d2);
  for (int l : l1) EXPECT_NE(l, 2);

  std::vector<double> m1(1000, 1e9), m2(1000, 1e9);
  const Vector center = cen.row(0).transpose();
  tad::kernels::UpdateMinDistanceSerial(pts, center, m1);
  tad::kernels::UpdateMinDistance(pts, center, m2);
  EXPECT_EQ(m1, m2);
}

}  // namespace
