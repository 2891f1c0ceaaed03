// Serial reference vs OpenMP kernels on synthetic inputs.
// Run with OMP_NUM_THREADS=<n> to vary the thread count.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tad/kernels.hpp"

namespace {

using tad::Matrix;
using tad::Vector;
namespace k = tad::kernels;

Matrix RandomMatrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

template <bool kParallel>
void BM_NearestCentroid(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix points = RandomMatrix(n, 10, 1);
  const Matrix centroids = RandomMatrix(30, 10, 2);
  std::vector<char> active(30, 1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<double> dist2(static_cast<std::size_t>(n));
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::NearestCentroid(points, centroids, active, labels, dist2);
    } else {
      k::NearestCentroidSerial(points, centroids, active, labels, dist2);
    }
    benchmark::DoNotOptimize(labels.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <bool kParallel>
void BM_UpdateMinDistance(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix points = RandomMatrix(n, 10, 3);
  const Vector center = RandomMatrix(10, 1, 4).col(0);
  std::vector<double> dist2(static_cast<std::size_t>(n), 1e300);
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::UpdateMinDistance(points, center, dist2);
    } else {
      k::UpdateMinDistanceSerial(points, center, dist2);
    }
    benchmark::DoNotOptimize(dist2.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <bool kParallel>
void BM_CountComparisons(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::vector<k::EncodedComparison> rows(n);
  for (auto& r : rows) {
    r.model_a = static_cast<int>(rng() % 20);
    r.model_b = static_cast<int>((r.model_a + 1 + rng() % 19) % 20);
    r.cluster = static_cast<int>(rng() % 30);
    r.outcome = static_cast<int>(rng() % 5);
  }
  for (auto _ : state) {
    auto t = kParallel ? k::CountComparisons(rows, 20, 30, {})
                       : k::CountComparisonsSerial(rows, 20, 30, {});
    benchmark::DoNotOptimize(t.wins.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool kParallel>
void BM_SoftmaxLossGrad(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix x = RandomMatrix(n, 276, 6);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 4);
  const Matrix w = RandomMatrix(4, 276, 7) * 0.01;
  const Vector b = Vector::Zero(4);
  std::vector<char> active(4, 1);
  Matrix gw;
  Vector gb;
  for (auto _ : state) {
    const double loss = kParallel ? k::SoftmaxLossGrad(x, y, w, b, active, &gw, &gb)
                                  : k::SoftmaxLossGradSerial(x, y, w, b, active, &gw, &gb);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK(BM_NearestCentroid<false>)->Name("NearestCentroid/serial")->Arg(10000)->Arg(100000);
BENCHMARK(BM_NearestCentroid<true>)->Name("NearestCentroid/omp")->Arg(10000)->Arg(100000);
BENCHMARK(BM_UpdateMinDistance<false>)->Name("UpdateMinDistance/serial")->Arg(100000);
BENCHMARK(BM_UpdateMinDistance<true>)->Name("UpdateMinDistance/omp")->Arg(100000);
BENCHMARK(BM_CountComparisons<false>)->Name("CountComparisons/serial")->Arg(100000)->Arg(1000000);
BENCHMARK(BM_CountComparisons<true>)->Name("CountComparisons/omp")->Arg(100000)->Arg(1000000);
BENCHMARK(BM_SoftmaxLossGrad<false>)->Name("SoftmaxLossGrad/serial")->Arg(4000);
BENCHMARK(BM_SoftmaxLossGrad<true>)->Name("SoftmaxLossGrad/omp")->Arg(4000);

BENCHMARK_MAIN();
