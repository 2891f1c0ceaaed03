#include "tad/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "tad/features.hpp"
#include "tad/folds.hpp"

namespace tad {

std::string_view ToString(ProbeTask task) {
  return task == ProbeTask::kWinner ? "A" : "B";
}

Json ToJson(const ProbeConfig& c) {
  Json fam = Json::array();
  for (auto f : c.families) fam.push_back(ToString(f));
  return {{"folds", c.folds},
          {"inner_folds", c.inner_folds},
          {"lambda_grid", c.lambda_grid},
          {"families", fam},
          {"exclude_invalid", c.exclude_invalid},
          {"seed", c.seed},
          {"max_iters", c.max_iters},
          {"tolerance", c.tolerance}};
}

const FamilyResult& ProbeReport::Family(Regularizer reg) const {
  for (const auto& f : families) {
    if (f.family == reg) return f;
  }
  throw Error(ErrorKind::kNotFound, "family " + std::string(ToString(reg)) + " was not run");
}

namespace {

struct ProbeData {
  bool classification = true;
  Matrix x_with;
  Matrix x_without;
  std::vector<int> strata;
  std::vector<int> labels;  // classification targets
  Vector targets;           // regression targets
  int class_count = 0;
};

Matrix Gather(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

std::vector<int> GatherLabels(const std::vector<int>& y, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

Vector GatherTargets(const Vector& y, const std::vector<std::size_t>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

// Higher is better for accuracy, lower for MSE.
bool Better(bool classification, double a, double b) {
  return classification ? a > b : a < b;
}

struct CellOutcome {
  double metric = 0.0;
  double residual = 0.0;
  LogisticModel model;
};

CellOutcome FitAndScore(const ProbeData& d, const Matrix& x, Regularizer family, double lambda,
                        const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                        const ProbeConfig& cfg, const LogisticModel* warm) {
  CellOutcome out;
  const Matrix xtr = Gather(x, train);
  const Matrix xte = Gather(x, test);
  if (d.classification) {
    const auto ytr = GatherLabels(d.labels, train);
    const auto yte = GatherLabels(d.labels, test);
    LogisticOptions opt;
    opt.reg = family;
    opt.lambda = family == Regularizer::kNone ? 0.0 : lambda;
    opt.max_iters = cfg.max_iters;
    opt.tolerance = cfg.tolerance;
    out.model = FitMultinomialLogReg(xtr, ytr, d.class_count, opt, warm);
    out.metric = Accuracy(PredictLogReg(out.model, xte).labels, yte);
  } else {
    const Vector ytr = GatherTargets(d.targets, train);
    const Vector yte = GatherTargets(d.targets, test);
    LinearRegression fit;
    switch (family) {
      case Regularizer::kNone: fit = FitRidge(xtr, ytr, 0.0); break;
      case Regularizer::kL2: fit = FitRidge(xtr, ytr, lambda); break;
      case Regularizer::kL1: fit = FitLasso(xtr, ytr, lambda); break;
    }
    if (family != Regularizer::kL1) out.residual = fit.normal_residual;
    out.metric = MeanSquaredError(fit.Predict(xte), yte);
  }
  return out;
}

struct FoldOutcome {
  double metric = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
};

// One outer fold of one family: inner selection of lambda, refit, score.
FoldOutcome RunFold(const ProbeData& d, const Matrix& x, Regularizer family,
                    const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                    const ProbeConfig& cfg, int outer_fold) {
  FoldOutcome out;
  if (family == Regularizer::kNone) {
    const auto cell = FitAndScore(d, x, family, 0.0, train, test, cfg, nullptr);
    out.metric = cell.metric;
    out.residual = cell.residual;
    return out;
  }
  // Descending path so each fit warm-starts from a more regularised one.
  std::vector<double> path = cfg.lambda_grid;
  std::sort(path.begin(), path.end(), std::greater<>());

  std::vector<int> inner_strata;
  inner_strata.reserve(train.size());
  for (auto r : train) inner_strata.push_back(d.strata[r]);
  const auto inner = StratifiedFolds(inner_strata, cfg.inner_folds,
                                     cfg.seed + 7919ULL * static_cast<std::uint64_t>(outer_fold + 1));

  std::vector<double> score(path.size(), 0.0);
  std::vector<LogisticModel> first_fold_models(path.size());
  for (int f = 0; f < cfg.inner_folds; ++f) {
    std::vector<std::size_t> in_train, in_test;
    for (auto i : TrainingIndices(inner, f)) in_train.push_back(train[i]);
    for (auto i : inner[f]) in_test.push_back(train[i]);
    // The largest lambda starts from the previous inner fold's solution.
    LogisticModel previous = f > 0 ? first_fold_models[0] : LogisticModel{};
    const LogisticModel* warm = f > 0 && d.classification ? &previous : nullptr;
    for (std::size_t l = 0; l < path.size(); ++l) {
      auto cell = FitAndScore(d, x, family, path[l], in_train, in_test, cfg, warm);
      score[l] += cell.metric / cfg.inner_folds;
      out.residual = std::max(out.residual, cell.residual);
      if (d.classification) {
        previous = std::move(cell.model);
        warm = &previous;
        if (f == 0) first_fold_models[l] = previous;
      }
    }
  }
  // Ties go to the smallest lambda.
  std::size_t best = path.size() - 1;
  for (std::size_t l = path.size() - 1; l-- > 0;) {
    if (Better(d.classification, score[l], score[best])) best = l;
  }
  out.lambda = path[best];
  const LogisticModel* warm = d.classification ? &first_fold_models[best] : nullptr;
  const auto cell = FitAndScore(d, x, family, out.lambda, train, test, cfg, warm);
  out.metric = cell.metric;
  out.residual = std::max(out.residual, cell.residual);
  return out;
}

struct FamilyRun {
  FamilyResult result;
  double residual = 0.0;
};

FamilyRun RunFamily(const ProbeData& d, const Matrix& x, Regularizer family,
                    const std::vector<std::vector<std::size_t>>& folds, const ProbeConfig& cfg) {
  const int n_folds = static_cast<int>(folds.size());
  std::vector<FoldOutcome> per_fold(n_folds);
  std::vector<std::string> errors(n_folds);
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
  for (int f = 0; f < n_folds; ++f) {
    try {
      per_fold[f] = RunFold(d, x, family, TrainingIndices(folds, f), folds[f], cfg, f);
    } catch (const std::exception& e) {
      errors[f] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorKind::kNumerical, "probe fold failed: " + e);
  }
  FamilyRun run;
  run.result.family = family;
  for (const auto& p : per_fold) {
    run.result.fold_metrics.push_back(p.metric);
    run.result.selected_lambda.push_back(p.lambda);
    run.residual = std::max(run.residual, p.residual);
  }
  run.result.mean = std::accumulate(run.result.fold_metrics.begin(), run.result.fold_metrics.end(),
                                    0.0) /
                    static_cast<double>(n_folds);
  return run;
}

ProbeReport RunProtocol(ProbeTask task, const ProbeData& d, const ProbeConfig& cfg,
                        int cluster_count) {
  if (cfg.families.empty()) throw Error(ErrorKind::kInvalidArgument, "no regularizer families");
  for (auto f : cfg.families) {
    if (f != Regularizer::kNone && cfg.lambda_grid.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "lambda grid is empty");
    }
  }
  if (cfg.inner_folds < 2) throw Error(ErrorKind::kInvalidArgument, "inner fold count must be >= 2");
  const auto folds = StratifiedFolds(d.strata, cfg.folds, cfg.seed);

  ProbeReport report;
  report.task = task;
  report.metric = d.classification ? "accuracy" : "mse";
  report.config = cfg;
  report.rows = d.strata.size();
  report.cluster_count = cluster_count;
  report.feature_width = static_cast<int>(d.x_with.cols());

  for (auto family : cfg.families) {
    auto run = RunFamily(d, d.x_with, family, folds, cfg);
    report.max_normal_residual = std::max(report.max_normal_residual, run.residual);
    report.families.push_back(std::move(run.result));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.families.size(); ++i) {
    if (Better(d.classification, report.families[i].mean, report.families[best].mean)) best = i;
  }
  report.best_family = report.families[best].family;

  auto without = RunFamily(d, d.x_without, report.best_family, folds, cfg);
  report.max_normal_residual = std::max(report.max_normal_residual, without.residual);
  report.ablation.family = report.best_family;
  report.ablation.with_cluster = report.families[best].mean;
  report.ablation.without_cluster = without.result.mean;
  report.ablation.delta = report.ablation.with_cluster - report.ablation.without_cluster;
  report.ablation.fold_without = without.result.fold_metrics;
  report.ablation.selected_lambda_without = without.result.selected_lambda;
  return report;
}

void CheckClusters(const std::vector<ComparisonRecord>& records, const std::vector<int>& clusters,
                   int cluster_count) {
  if (records.size() != clusters.size()) {
    throw Error(ErrorKind::kInvalidArgument, "cluster labels are not aligned with records");
  }
  if (cluster_count < 1) throw Error(ErrorKind::kInvalidArgument, "cluster count must be positive");
}

}  // namespace

ProbeReport RunWinnerProbe(const std::vector<ComparisonRecord>& records,
                           const std::vector<int>& clusters, int cluster_count,
                           const ProbeConfig& config) {
  CheckClusters(records, clusters, cluster_count);
  std::vector<std::size_t> rows;
  ProbeData d;
  d.classification = true;
  d.class_count = kTaskAClasses;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto label = TaskALabel(records[i].outcome, config.exclude_invalid);
    if (!label) continue;
    if (!records[i].response_embedding_diff) {
      throw Error(ErrorKind::kInvalidArgument,
                  "record '" + records[i].record_id + "' lacks response_embedding_diff");
    }
    rows.push_back(i);
    d.labels.push_back(*label);
  }
  const std::set<int> present(d.labels.begin(), d.labels.end());
  if (rows.size() < static_cast<std::size_t>(config.folds) * std::max<std::size_t>(present.size(), 2)) {
    throw Error(ErrorKind::kInvalidArgument, "insufficient data for the winner probe");
  }
  d.strata = d.labels;
  FeatureSpecA spec;
  spec.models = CollectModelIds(records);
  spec.clusters = cluster_count;
  d.x_with = BuildMatrixA(records, clusters, rows, spec);
  spec.include_cluster = false;
  d.x_without = BuildMatrixA(records, clusters, rows, spec);
  auto report = RunProtocol(ProbeTask::kWinner, d, config, cluster_count);
  report.classes.assign(present.begin(), present.end());
  return report;
}

ProbeReport RunDifficultyProbe(const std::vector<ComparisonRecord>& records,
                               const std::vector<int>& clusters, int cluster_count,
                               const ProbeConfig& config) {
  CheckClusters(records, clusters, cluster_count);
  std::vector<std::size_t> rows;
  std::vector<double> y;
  ProbeData d;
  d.classification = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].difficulty) continue;
    rows.push_back(i);
    y.push_back(*records[i].difficulty);
    d.strata.push_back(static_cast<int>(records[i].outcome));
  }
  if (rows.empty()) throw Error(ErrorKind::kInvalidArgument, "no difficulty labels");
  if (rows.size() < static_cast<std::size_t>(config.folds) * 2) {
    throw Error(ErrorKind::kInvalidArgument, "insufficient data for the difficulty probe");
  }
  d.targets = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  FeatureSpecB spec;
  spec.clusters = cluster_count;
  d.x_with = BuildMatrixB(records, clusters, rows, spec);
  spec.include_cluster = false;
  d.x_without = BuildMatrixB(records, clusters, rows, spec);
  return RunProtocol(ProbeTask::kDifficulty, d, config, cluster_count);
}

ProbeReport RunWinnerProbe(const std::vector<ComparisonRecord>& records,
                           const TaskTypeModel& model, const EmbeddingProvider& provider,
                           const ProbeConfig& config) {
  return RunWinnerProbe(records, AssignRecords(model, records, provider), model.cluster_count(),
                        config);
}

ProbeReport RunDifficultyProbe(const std::vector<ComparisonRecord>& records,
                               const TaskTypeModel& model, const EmbeddingProvider& provider,
                               const ProbeConfig& config) {
  return RunDifficultyProbe(records, AssignRecords(model, records, provider),
                            model.cluster_count(), config);
}

Json ProbeReportToJson(const ProbeReport& r) {
  Json fams = Json::array();
  for (const auto& f : r.families) {
    fams.push_back({{"family", ToString(f.family)},
                    {"display", DisplayName(f.family)},
                    {"mean", f.mean},
                    {"fold_metrics", f.fold_metrics},
                    {"selected_lambda", f.selected_lambda}});
  }
  return {{"task", ToString(r.task)},
          {"metric", r.metric},
          {"families", fams},
          {"best_family", ToString(r.best_family)},
          {"ablation",
           {{"family", ToString(r.ablation.family)},
            {"with_cluster", r.ablation.with_cluster},
            {"without_cluster", r.ablation.without_cluster},
            {"delta", r.ablation.delta},
            {"fold_without", r.ablation.fold_without},
            {"selected_lambda_without", r.ablation.selected_lambda_without}}},
          {"config", ToJson(r.config)},
          {"rows", r.rows},
          {"cluster_count", r.cluster_count},
          {"feature_width", r.feature_width},
          {"classes", r.classes},
          {"invalid_handling", r.config.exclude_invalid ? "excluded" : "retained"},
          {"max_normal_residual", r.max_normal_residual}};
}

namespace {

std::string Cell(double v, bool sign = false) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), sign ? "%+.3f" : "%.3f", v);
  return buf;
}

std::string Pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string RenderProbeTable(const std::vector<ProbeReport>& reports) {
  std::ostringstream out;
  const std::size_t w = 10;
  out << Pad("Task", 12) << Pad("None", w) << Pad("Ridge", w) << Pad("Lasso", w)
      << Pad("With", w) << Pad("Without", w) << "Delta\n";
  for (const auto& r : reports) {
    std::string name = r.task == ProbeTask::kWinner ? "A (Acc)" : "B (MSE)";
    out << Pad(name, 12);
    for (auto reg : {Regularizer::kNone, Regularizer::kL2, Regularizer::kL1}) {
      std::string cell = "-";
      for (const auto& f : r.families) {
        if (f.family == reg) cell = Cell(f.mean);
      }
      out << Pad(cell, w);
    }
    out << Pad(Cell(r.ablation.with_cluster), w) << Pad(Cell(r.ablation.without_cluster), w)
        << Cell(r.ablation.delta, true) << '\n';
  }
  if (!reports.empty()) {
    out << "(ablation family:";
    for (const auto& r : reports) out << ' ' << ToString(r.task) << '=' << DisplayName(r.ablation.family);
    out << ")\n";
  }
  return out.str();
}

std::string ProbeFoldsCsv(const std::vector<ProbeReport>& reports) {
  std::ostringstream out;
  out << "task,series,family,fold,lambda,metric\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    for (const auto& f : r.families) {
      for (std::size_t i = 0; i < f.fold_metrics.size(); ++i) {
        out << ToString(r.task) << ",sweep," << ToString(f.family) << ',' << i << ','
            << num(f.selected_lambda[i]) << ',' << num(f.fold_metrics[i]) << '\n';
      }
    }
    for (std::size_t i = 0; i < r.ablation.fold_without.size(); ++i) {
      out << ToString(r.task) << ",without_cluster," << ToString(r.ablation.family) << ',' << i
          << ',' << num(r.ablation.selected_lambda_without[i]) << ','
          << num(r.ablation.fold_without[i]) << '\n';
    }
  }
  return out.str();
}

}  // namespace tad
