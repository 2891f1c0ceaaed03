// Acceptance suite: one PASS/FAIL line per criterion; nonzero exit when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "delegation_props.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "service_fixture.hpp"
#include "tad/features.hpp"
#include "tad/kmeans.hpp"
#include "tad/linear_models.hpp"
#include "tad/pipeline.hpp"
#include "tad/probes.hpp"
#include "tad/signals.hpp"
#include "tad/synthetic.hpp"
#include "tad/task_model.hpp"

namespace {

namespace fs = std::filesystem;
using tad::Matrix;
using tad::Regularizer;
using tad::Vector;

struct Verdict {
  bool pass = true;
  std::string detail;
  void Require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Matrix Gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

// ---------------------------------------------------------------------------

Verdict PipelineDeterminism() {
  Verdict v;
  tad::SyntheticSpec spec;
  spec.records = 10000;
  spec.topics = 30;
  spec.models = 8;
  spec.diff_signal = 1.0;
  const auto records = tad::GenerateSyntheticCorpus(spec, 11);
  tad::PipelineConfig cfg;
  cfg.typing.cluster_count = 30;
  cfg.typing.seed = 7;
  cfg.probes.seed = 7;
  cfg.created_at = "2026-01-01T00:00:00Z";

  const auto root = fs::temp_directory_path() / "tad_accept_determinism";
  fs::remove_all(root);
  double worst = 0;
  std::vector<std::string> names[2];
  for (int run = 0; run < 2; ++run) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = tad::RunPipeline(records, cfg);
    names[run] = tad::WritePipelineOutputs(out, records, (root / std::to_string(run)).string());
    worst = std::max(worst, Seconds(t0));
    v.Require(out.probe_a.has_value() && out.probe_b.has_value(), "probes missing");
  }
  v.Require(names[0] == names[1] && !names[0].empty(), "different file sets");
  for (const auto& n : names[0]) {
    v.Require(ReadFile(root / "0" / n) == ReadFile(root / "1" / n), "file differs: " + n);
  }
  v.Require(worst < 60.0, Fmt("slowest run %.1f s exceeds 60 s", worst));
  if (v.pass) {
    v.detail = std::to_string(names[0].size()) + " files byte-identical; slowest run " +
               Fmt("%.1f s", worst);
  }
  return v;
}

Verdict SignalCorrectness() {
  Verdict v;
  const auto [recs, cl] = fixture::Signals200();
  int compared = 0;
  for (int flags = 0; flags < 4; ++flags) {
    tad::SignalConfig cfg;
    cfg.invalid_in_win_support = flags & 1;
    cfg.invalid_in_tie_support = flags & 2;
    const auto want = oracle::BruteCounts(recs, cl, cfg.invalid_in_win_support, cfg.invalid_in_tie_support);
    const auto win = tad::ComputeWinRates(recs, cl, cfg);
    const auto tie = tad::ComputeTieRates(recs, cl, cfg);
    const auto global = tad::ComputeGlobalWinCounts(recs, cfg);
    v.Require(win.counts.size() == want.win.size(), "win cell count differs");
    v.Require(tie.counts.size() == want.tie.size(), "tie cell count differs");
    v.Require(global.size() == want.global.size(), "global count differs");
    for (const auto& [key, ws] : want.win) {
      auto it = win.counts.find(key);
      const bool ok = it != win.counts.end() && it->second.wins == ws.first &&
                      it->second.support == ws.second;
      v.Require(ok, "win count differs for " + key.first + "/" + std::to_string(key.second));
      ++compared;
    }
    for (const auto& [c, ts] : want.tie) {
      auto it = tie.counts.find(c);
      v.Require(it != tie.counts.end() && it->second.ties == ts.first && it->second.support == ts.second,
                "tie count differs for cluster " + std::to_string(c));
      ++compared;
    }
    for (const auto& [m, ws] : want.global) {
      auto it = global.find(m);
      v.Require(it != global.end() && it->second.wins == ws.first && it->second.support == ws.second,
                "global count differs for " + m);
      ++compared;
    }
  }
  if (v.pass) v.detail = std::to_string(compared) + " counts equal under all 4 INVALID flag settings";
  return v;
}

Verdict Clustering() {
  Verdict v;
  std::mt19937_64 rng(2024);
  for (int inst = 0; inst < 100; ++inst) {
    const int rows = 30 + static_cast<int>(rng() % 120);
    const int dims = 1 + static_cast<int>(rng() % 6);
    const int k = 1 + static_cast<int>(rng() % 8);
    const Matrix pts = Gaussian(rows, dims, rng);
    const auto r = tad::FitKMeans(pts, k, rng());
    for (std::size_t i = 1; i < r.objective.size(); ++i) {
      v.Require(r.objective[i] <= r.objective[i - 1], "objective rose on instance " + std::to_string(inst));
    }
  }

  Matrix six(6, 2);
  six << 0, 0, 1, 0, 0, 1, 10, 10, 11, 10, 10, 11;
  double best = 1e300;
  for (int mask = 1; mask < 63; ++mask) {
    double obj = 0;
    for (int g = 0; g < 2; ++g) {
      double mx = 0, my = 0;
      int n = 0;
      for (int i = 0; i < 6; ++i)
        if (((mask >> i) & 1) == g) mx += six(i, 0), my += six(i, 1), ++n;
      mx /= n;
      my /= n;
      for (int i = 0; i < 6; ++i)
        if (((mask >> i) & 1) == g)
          obj += (six(i, 0) - mx) * (six(i, 0) - mx) + (six(i, 1) - my) * (six(i, 1) - my);
    }
    best = std::min(best, obj);
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = tad::FitKMeans(six, 2, seed);
    v.Require(std::abs(r.objective.back() - best) <= 1e-12, "6-point fixture missed the optimum");
  }

  int fixtures = 0;
  for (const auto& [topics, k, delta] : std::vector<std::tuple<int, int, int>>{
           {6, 12, 40}, {10, 30, 25}, {4, 20, 40}, {8, 8, 10}, {3, 6, 120}}) {
    tad::SyntheticSpec spec;
    spec.records = 900;
    spec.topics = topics;
    const auto recs = tad::GenerateSyntheticCorpus(spec, static_cast<std::uint64_t>(k));
    tad::TaskTypingConfig cfg;
    cfg.cluster_count = k;
    cfg.min_cluster_size = delta;
    cfg.embedder.dimension = 64;
    cfg.reduced_dim = 6;
    const auto fit = tad::FitTaskTyping(recs, cfg);
    std::map<int, int> sizes;
    for (int a : fit.assignments) ++sizes[a];
    for (const auto& [c, n] : sizes) {
      v.Require(fit.model.IsSurviving(c) && n >= delta,
                "fixture " + std::to_string(fixtures) + ": cluster " + std::to_string(c) + " has " +
                    std::to_string(n) + " < " + std::to_string(delta));
    }
    ++fixtures;
  }
  if (v.pass) {
    v.detail = "100 instances monotone; 6-point optimum " + Fmt("%.4f", best) + "; " +
               std::to_string(fixtures) + " fixtures respect the minimum size";
  }
  return v;
}

Verdict Solvers() {
  Verdict v;
  std::mt19937_64 rng(42);
  double worst_fd = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 30 + static_cast<int>(rng() % 40), d = 2 + static_cast<int>(rng() % 6);
    const Matrix x = Gaussian(n, d, rng);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& t : y) t = static_cast<int>(rng() % 4);
    tad::LogisticModel p;
    p.weights = Gaussian(4, d, rng) * 0.5;
    p.intercepts = Gaussian(4, 1, rng).col(0) * 0.5;
    p.active = std::vector<char>(4, 1);
    const Regularizer reg = inst % 2 ? Regularizer::kL2 : Regularizer::kNone;
    const double lambda = inst % 2 ? 0.3 : 0.0;
    Matrix gw;
    Vector gb;
    tad::LogisticObjective(x, y, p, reg, lambda, &gw, &gb);
    const double h = 1e-5;
    double num = 0, den = 0;
    for (int c = 0; c < 4; ++c) {
      for (int j = 0; j <= d; ++j) {
        auto plus = p, minus = p;
        if (j < d) {
          plus.weights(c, j) += h;
          minus.weights(c, j) -= h;
        } else {
          plus.intercepts[c] += h;
          minus.intercepts[c] -= h;
        }
        const double fd = (tad::LogisticObjective(x, y, plus, reg, lambda) -
                           tad::LogisticObjective(x, y, minus, reg, lambda)) / (2 * h);
        const double an = j < d ? gw(c, j) : gb[c];
        num += (fd - an) * (fd - an);
        den += an * an;
      }
    }
    worst_fd = std::max(worst_fd, std::sqrt(num / den));
  }
  v.Require(worst_fd <= 1e-4, Fmt("finite-difference error %.2e", worst_fd));

  double worst_res = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 10 + static_cast<int>(rng() % 200), d = 1 + static_cast<int>(rng() % 30);
    const Matrix x = Gaussian(n, d, rng);
    const Vector y = Gaussian(n, 1, rng).col(0);
    for (double lambda : {1e-3, 0.1, 1.0, 10.0, 1e4}) {
      worst_res = std::max(worst_res, tad::FitRidge(x, y, lambda).normal_residual);
    }
  }
  // Every regression fit inside a probe run.
  tad::SyntheticSpec spec;
  spec.records = 1000;
  const auto recs = tad::GenerateSyntheticCorpus(spec, 3);
  std::vector<int> truth;
  for (const auto& r : recs) truth.push_back(*r.true_cluster);
  tad::ProbeConfig pc;
  pc.families = {Regularizer::kNone, Regularizer::kL2};
  pc.lambda_grid = {1e-3, 0.1, 10.0, 1e3};
  worst_res = std::max(worst_res, tad::RunDifficultyProbe(recs, truth, spec.topics, pc).max_normal_residual);
  v.Require(worst_res <= 1e-8, Fmt("ridge normal-equation residual %.2e", worst_res));

  // Large-lambda limits.
  const Matrix x = Gaussian(60, 4, rng);
  const Vector y = Gaussian(60, 1, rng).col(0).array() + 3.0;
  const auto ridge = tad::FitRidge(x, y, 1e12);
  v.Require(ridge.weights.cwiseAbs().maxCoeff() <= 1e-9 && std::abs(ridge.intercept - y.mean()) <= 1e-9,
            "ridge does not shrink to the mean");
  const auto lasso = tad::FitLasso(x, y, 1e6);
  v.Require(lasso.weights.cwiseAbs().maxCoeff() == 0.0 && std::abs(lasso.intercept - y.mean()) <= 1e-12,
            "lasso does not shrink to the mean");
  std::vector<int> labels(60);
  for (int i = 0; i < 60; ++i) labels[static_cast<std::size_t>(i)] = i % 4 == 0 ? 0 : (i % 4 == 1 ? 2 : 1);
  tad::LogisticOptions lo;
  lo.reg = Regularizer::kL1;
  lo.lambda = 1e6;
  lo.max_iters = 2000;
  const auto l1 = tad::FitMultinomialLogReg(x, labels, 3, lo);
  const auto pred = tad::PredictLogReg(l1, x);
  int majority = 0;
  {
    std::vector<int> freq(3, 0);
    for (int t : labels) ++freq[static_cast<std::size_t>(t)];
    majority = static_cast<int>(std::max_element(freq.begin(), freq.end()) - freq.begin());
  }
  bool all_majority = true;
  for (int t : pred.labels) all_majority &= t == majority;
  v.Require(l1.weights.cwiseAbs().maxCoeff() == 0.0 && all_majority,
            "L1 logistic does not shrink to the majority class");

  if (v.pass) {
    v.detail = Fmt("max finite-difference error %.1e; max ridge residual %.1e; limits hold", worst_fd,
                   worst_res);
  }
  return v;
}

Verdict ProbeAblation() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  auto pipeline_cfg = [](std::uint64_t seed) {
    tad::PipelineConfig cfg;
    cfg.typing.cluster_count = 10;
    cfg.typing.seed = seed;
    cfg.probes.families = {Regularizer::kL2};
    cfg.probes.seed = seed;
    cfg.created_at = "2026-01-01T00:00:00Z";
    return cfg;
  };
  int a_ok = 0, b_ok = 0, runs = 0;
  double min_da = 1e9, min_rb = 1e9;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    tad::SyntheticSpec spec;
    spec.records = 5000;
    spec.topics = 10;
    spec.models = 5;
    spec.winner_rule = tad::WinnerRule::kClusterOutcome;
    const auto recs = tad::GenerateSyntheticCorpus(spec, seed);
    const auto out = tad::RunPipeline(recs, pipeline_cfg(seed));
    const auto& a = out.probe_a->ablation;
    const auto& b = out.probe_b->ablation;
    const double da = a.with_cluster - a.without_cluster;
    const double rb = 1.0 - b.with_cluster / b.without_cluster;
    a_ok += da >= 0.10;
    b_ok += rb >= 0.20;
    min_da = std::min(min_da, da);
    min_rb = std::min(min_rb, rb);
    ++runs;
  }
  v.Require(a_ok >= 19, "winner accuracy gain >= 0.10 in only " + std::to_string(a_ok) + "/20 runs");
  v.Require(b_ok >= 19, "difficulty MSE reduction >= 20% in only " + std::to_string(b_ok) + "/20 runs");

  double worst_free = 0;
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    tad::SyntheticSpec spec;
    spec.records = 5000;
    spec.topics = 10;
    spec.models = 5;
    spec.winner_rule = tad::WinnerRule::kModelSkill;
    spec.difficulty_rule = tad::DifficultyRule::kConstant;
    const auto recs = tad::GenerateSyntheticCorpus(spec, seed);
    const auto out = tad::RunPipeline(recs, pipeline_cfg(seed));
    worst_free = std::max(worst_free, std::abs(out.probe_a->ablation.delta));
    worst_free = std::max(worst_free, std::abs(out.probe_b->ablation.delta));
  }
  v.Require(worst_free <= 0.02, Fmt("cluster-free |delta| %.4f > 0.02", worst_free));
  const double secs = Seconds(t0);
  v.Require(secs < 120.0, Fmt("took %.1f s, budget 120 s", secs));
  if (v.pass) {
    v.detail = "A gain >= 0.10 in " + std::to_string(a_ok) + "/20 (min " + Fmt("%.3f", min_da) +
               "), B reduction >= 20% in " + std::to_string(b_ok) + "/20 (min " + Fmt("%.3f", min_rb) +
               "), cluster-free max |delta| " + Fmt("%.4f", worst_free) + ", " + Fmt("%.1f s", secs);
  }
  return v;
}

Verdict FeatureWidths() {
  Verdict v;
  tad::FeatureSpecA a;
  for (int m = 0; m < 20; ++m) a.models.push_back(tad::SyntheticModelId(m));
  a.clusters = 30;
  a.diff_dim = 256;
  tad::FeatureSpecB b;
  b.clusters = 30;
  tad::ComparisonRecord r = oracle::Rec("w", "width check", a.models[0], a.models[1], tad::Outcome::kAWins);
  r.response_embedding_diff = std::vector<double>(256, 0.0);
  const auto fa = tad::BuildFeaturesA(r, a, 3);
  const auto fb = tad::BuildFeaturesB(r, b, 3);
  v.Require(a.width() == 326 && fa.size() == 326u, "winner width " + std::to_string(fa.size()));
  v.Require(b.width() == 36 && fb.size() == 36u, "difficulty width " + std::to_string(fb.size()));
  if (v.pass) v.detail = "winner 326, difficulty 36";
  return v;
}

Verdict Delegation() {
  Verdict v;
  const auto s = props::RunSessionProperties(1000, 17);
  for (const auto& f : s.failures) v.Require(false, f);
  v.Require(s.high_assurance > 0 && s.risk_missing > 0 && s.illegal_rejected > 0,
            "random sessions missed a branch");
  const auto l = props::RunLogSuite(200, 18);
  for (const auto& f : l.failures) v.Require(false, f);
  v.Require(l.forgotten > 0, "log suite forgot nothing");
  if (v.pass) {
    v.detail = std::to_string(s.sessions) + " sessions (" + std::to_string(s.high_assurance) +
               " high assurance, " + std::to_string(s.risk_missing) + " without tie evidence, " +
               std::to_string(s.illegal_rejected) + " illegal ops rejected); log suite " +
               std::to_string(l.entries) + " entries, " + std::to_string(l.forgotten) + " forgotten";
  }
  return v;
}

Verdict ServiceTransparency() {
  Verdict v;
  const auto st = sfix::RunHttpParity(20, 99, "parity_accept");
  v.Require(st.flows == 20, "ran " + std::to_string(st.flows) + " flows");
  v.Require(st.mismatches == 0, st.first_mismatch);
  if (v.pass) {
    v.detail = std::to_string(st.flows) + " flows, " + std::to_string(st.requests) +
               " responses equal to the direct engine";
  }
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"pipeline determinism", PipelineDeterminism},
      {"signal correctness", SignalCorrectness},
      {"clustering", Clustering},
      {"solvers", Solvers},
      {"probe ablation direction", ProbeAblation},
      {"feature dimensions", FeatureWidths},
      {"delegation protocol", Delegation},
      {"service transparency", ServiceTransparency},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failed += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
