// Command-line front end: corpus tools, the offline pipeline stages, the
// delegation service, and accountability-log maintenance.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "tad/accountability.hpp"
#include "tad/delegation.hpp"
#include "tad/ingest.hpp"
#include "tad/pipeline.hpp"
#include "tad/probes.hpp"
#include "tad/service.hpp"
#include "tad/signals.hpp"
#include "tad/synthetic.hpp"
#include "tad/task_model.hpp"

namespace {

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

struct EmbedderFlags {
  std::string kind = "hash";
  int dimension = 384;
  std::uint64_t seed = 0;
  std::string url;
  std::string path = "/embed";
  std::string token_env;
  int timeout_ms = 5000;

  void Add(CLI::App* app) {
    app->add_option("--embedder", kind, "hash or service")
        ->check(CLI::IsMember({"hash", "service"}));
    app->add_option("--embed-dim", dimension, "Embedding dimension");
    app->add_option("--embed-seed", seed, "Hash embedder seed");
    app->add_option("--embed-url", url, "Embedding service base URL");
    app->add_option("--embed-path", path, "Embedding service path");
    app->add_option("--embed-token-env", token_env, "Env var holding the bearer token");
    app->add_option("--embed-timeout-ms", timeout_ms, "Embedding request timeout");
  }

  tad::EmbeddingProviderConfig Config() const {
    tad::EmbeddingProviderConfig c;
    c.dimension = dimension;
    c.seed = seed;
    if (kind == "service") {
      c.kind = tad::ProviderKind::kExternalService;
      tad::EndpointConfig e;
      e.base_url = url;
      e.path = path;
      e.auth_token_env = token_env;
      e.timeout = std::chrono::milliseconds(timeout_ms);
      c.endpoint = e;
    }
    return c;
  }
};

struct ProbeFlags {
  int folds = 5;
  int inner_folds = 2;
  std::vector<double> lambdas = {0.01, 0.1, 1.0, 10.0};
  std::vector<std::string> families = {"none", "ridge", "lasso"};
  bool exclude_invalid = false;
  int max_iters = 500;
  double tolerance = 1e-6;

  void Add(CLI::App* app) {
    app->add_option("--folds", folds, "Outer CV folds");
    app->add_option("--inner-folds", inner_folds, "Inner CV folds for lambda selection");
    app->add_option("--lambdas", lambdas, "Lambda grid")->delimiter(',');
    app->add_option("--families", families, "Regularizer families (none, ridge, lasso)")->delimiter(',');
    app->add_flag("--exclude-invalid", exclude_invalid, "Drop INVALID rows from the winner probe");
    app->add_option("--max-iters", max_iters, "Solver iteration cap");
    app->add_option("--tolerance", tolerance, "Solver gradient tolerance");
  }

  tad::ProbeConfig Config(std::uint64_t seed) const {
    tad::ProbeConfig c;
    c.folds = folds;
    c.inner_folds = inner_folds;
    c.lambda_grid = lambdas;
    c.families.clear();
    for (const auto& f : families) c.families.push_back(tad::RegularizerFromString(f));
    c.exclude_invalid = exclude_invalid;
    c.seed = seed;
    c.max_iters = max_iters;
    c.tolerance = tolerance;
    return c;
  }
};

tad::ParseOptions Parsing(bool lenient) {
  tad::ParseOptions o;
  o.strict = !lenient;
  return o;
}

std::vector<tad::ComparisonRecord> LoadRecords(const std::vector<std::string>& files, bool lenient) {
  auto result = tad::ParseComparisonFiles(files, Parsing(lenient));
  for (const auto& issue : result.issues) {
    std::cerr << "skipped line " << issue.line << ": " << issue.reason << "\n";
  }
  return std::move(result.records);
}

void WriteOrPrint(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    tad::WriteFileAtomic(path, content);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-aware delegation: typing, signals, probes, and the delegation service"};
  app.require_subcommand(1);

  // synth
  tad::SyntheticSpec spec;
  std::string synth_winner = "cluster_outcome";
  std::string synth_difficulty = "cluster_base";
  std::uint64_t seed = 0;
  std::string out_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic comparison corpus (JSONL)");
  synth->add_option("--records", spec.records, "Number of records");
  synth->add_option("--topics", spec.topics, "Number of latent topics");
  synth->add_option("--models", spec.models, "Number of models");
  synth->add_option("--winner-rule", synth_winner, "cluster_outcome, cluster_parity, cluster_best_model, model_skill, random");
  synth->add_option("--label-noise", spec.label_noise, "Probability of a uniformly random outcome");
  synth->add_option("--difficulty-rule", synth_difficulty, "none, constant, cluster_base");
  synth->add_option("--difficulty-value", spec.difficulty_value, "Constant difficulty");
  synth->add_option("--difficulty-noise", spec.difficulty_noise, "Gaussian sigma on difficulty");
  synth->add_option("--diff-signal", spec.diff_signal, "Winner signal in the response diff");
  synth->add_option("--diff-noise", spec.diff_noise, "Gaussian sigma of the response diff");
  synth->add_option("--words", spec.words_per_prompt, "Topic words per prompt");
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("-o,--out", out_path, "Output JSONL (default stdout)");

  // ingest
  std::vector<std::string> inputs;
  bool lenient = false;
  auto* ingest = app.add_subcommand("ingest", "Validate comparison files and print a summary");
  ingest->add_option("inputs", inputs, "JSONL files")->required();
  ingest->add_flag("--lenient", lenient, "Skip malformed lines instead of failing");
  ingest->add_option("-o,--out", out_path, "Write the merged, normalized records here");

  // cluster
  EmbedderFlags embed;
  tad::TaskTypingConfig typing;
  int min_cluster_size = 0;
  std::string assignments_path;
  auto* cluster = app.add_subcommand("cluster", "Fit the task typer (embed, reduce, k-means)");
  cluster->add_option("inputs", inputs, "JSONL files")->required();
  cluster->add_flag("--lenient", lenient, "Skip malformed lines");
  embed.Add(cluster);
  cluster->add_option("-k,--clusters", typing.cluster_count, "Number of clusters K");
  cluster->add_option("--dim", typing.reduced_dim, "Reduced dimension d'");
  cluster->add_option("--min-cluster-size", min_cluster_size, "Small-cluster threshold (default max(10, 0.5% of N))");
  cluster->add_option("--max-iters", typing.max_iters, "Lloyd iteration cap");
  cluster->add_flag("--use-ingested-embeddings", typing.use_ingested_embeddings, "Use records' prompt_embedding");
  cluster->add_option("--seed", seed, "Random seed");
  cluster->add_option("-o,--out", out_path, "Task model JSON")->required();
  cluster->add_option("--assignments", assignments_path, "Write per-record clusters (CSV)");

  // signals
  std::string model_path;
  tad::SignalConfig signal_config;
  std::string created_at;
  auto* signals = app.add_subcommand("signals", "Compute capability profiles and tie rates");
  signals->add_option("inputs", inputs, "JSONL files")->required();
  signals->add_flag("--lenient", lenient, "Skip malformed lines");
  signals->add_option("-m,--model", model_path, "Task model JSON")->required();
  signals->add_flag("--invalid-in-win-support", signal_config.invalid_in_win_support, "Count INVALID votes in win denominators");
  signals->add_flag("--invalid-in-tie-support", signal_config.invalid_in_tie_support, "Count INVALID votes in tie denominators");
  signals->add_flag("--use-ingested-embeddings", typing.use_ingested_embeddings, "Type records by their prompt_embedding");
  signals->add_option("--created-at", created_at, "Timestamp to record (default SOURCE_DATE_EPOCH or now)");
  signals->add_option("-o,--out", out_path, "Signal artifact JSON")->required();

  // probe a|b
  ProbeFlags probe_flags;
  std::string probe_task;
  std::string csv_path;
  auto* probe = app.add_subcommand("probe", "Run a validation probe: a (winner) or b (difficulty)");
  probe->add_option("task", probe_task, "a or b")->required()->check(CLI::IsMember({"a", "b", "A", "B"}));
  probe->add_option("inputs", inputs, "JSONL files")->required();
  probe->add_flag("--lenient", lenient, "Skip malformed lines");
  probe->add_option("-m,--model", model_path, "Task model JSON")->required();
  probe->add_flag("--use-ingested-embeddings", typing.use_ingested_embeddings, "Type records by their prompt_embedding");
  probe_flags.Add(probe);
  probe->add_option("--seed", seed, "Fold seed");
  probe->add_option("-o,--out", out_path, "Report JSON");
  probe->add_option("--csv", csv_path, "Per-fold metrics CSV");

  // run (whole pipeline)
  std::string out_dir;
  bool skip_probes = false;
  auto* run = app.add_subcommand("run", "ingest -> cluster -> signals -> probes into one directory");
  run->add_option("inputs", inputs, "JSONL files")->required();
  run->add_flag("--lenient", lenient, "Skip malformed lines");
  embed.Add(run);
  run->add_option("-k,--clusters", typing.cluster_count, "Number of clusters K");
  run->add_option("--dim", typing.reduced_dim, "Reduced dimension d'");
  run->add_option("--min-cluster-size", min_cluster_size, "Small-cluster threshold");
  run->add_flag("--use-ingested-embeddings", typing.use_ingested_embeddings, "Use records' prompt_embedding");
  run->add_flag("--invalid-in-win-support", signal_config.invalid_in_win_support, "Count INVALID votes in win denominators");
  run->add_flag("--invalid-in-tie-support", signal_config.invalid_in_tie_support, "Count INVALID votes in tie denominators");
  probe_flags.Add(run);
  run->add_flag("--no-probes", skip_probes, "Stop after signals");
  run->add_option("--created-at", created_at, "Timestamp to record");
  run->add_option("--seed", seed, "Random seed for clustering and folds");
  run->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  // serve
  tad::ServiceConfig service;
  bool retain = false;
  int timeout_ms = 10000;
  long ttl_s = 3600;
  std::string executor_url;
  std::string executor_path = "/complete";
  std::string executor_token_env;
  auto* serve = app.add_subcommand("serve", "Run the delegation HTTP service");
  serve->add_option("--task-model", service.task_model_path, "Task model JSON")->required();
  serve->add_option("--signals", service.signals_path, "Signal artifact JSON")->required();
  serve->add_option("--policy", service.policy_path, "Delegation policy JSON");
  serve->add_option("--log", service.log_path, "Accountability log file");
  serve->add_option("--host", service.host, "Listen address");
  serve->add_option("--port", service.port, "Listen port (0 = any)");
  serve->add_flag("--retain-prompts", retain, "Keep prompt text in log entries by default");
  serve->add_option("--timeout-ms", timeout_ms, "Request timeout");
  serve->add_option("--max-sessions", service.max_sessions, "Concurrently open sessions");
  serve->add_option("--session-ttl", ttl_s, "Seconds before an idle session expires");
  serve->add_option("--threads", service.worker_threads, "HTTP worker threads");
  serve->add_option("--executor-url", executor_url, "Completion endpoint (default: mock executor)");
  serve->add_option("--executor-path", executor_path, "Completion endpoint path");
  serve->add_option("--executor-token-env", executor_token_env, "Env var holding the executor token");

  // report
  std::string signals_path;
  std::vector<std::string> probe_paths;
  auto* report = app.add_subcommand("report", "Summarize artifacts and export plot data");
  report->add_option("-m,--model", model_path, "Task model JSON")->required();
  report->add_option("-s,--signals", signals_path, "Signal artifact JSON")->required();
  report->add_option("--probe", probe_paths, "Probe report JSON (repeatable)");
  report->add_option("--policy", service.policy_path, "Delegation policy JSON");
  report->add_option("-o,--out-dir", out_dir, "Write win_rates.csv and tie_rates.csv here");

  // log
  std::string log_path = "accountability.log";
  std::uint64_t entry_id = 0;
  auto* log = app.add_subcommand("log", "Accountability log maintenance");
  log->require_subcommand(1);
  auto* log_export = log->add_subcommand("export", "Print live entries as JSONL");
  log_export->add_option("--log", log_path, "Log file");
  auto* log_forget = log->add_subcommand("forget", "Replace an entry with a tombstone");
  log_forget->add_option("--log", log_path, "Log file");
  log_forget->add_option("id", entry_id, "Entry id")->required();
  auto* log_freq = log->add_subcommand("frequencies", "Per-cluster counts, noised per policy");
  log_freq->add_option("--log", log_path, "Log file");
  log_freq->add_option("-m,--model", model_path, "Task model JSON")->required();
  log_freq->add_option("--policy", service.policy_path, "Delegation policy JSON");
  log_freq->add_option("--seed", seed, "Noise seed (overrides the policy's)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      spec.winner_rule = tad::WinnerRuleFromString(synth_winner);
      spec.difficulty_rule = tad::DifficultyRuleFromString(synth_difficulty);
      std::ostringstream os;
      tad::WriteComparisons(os, tad::GenerateSyntheticCorpus(spec, seed));
      WriteOrPrint(out_path, os.str());
    } else if (ingest->parsed()) {
      auto result = tad::ParseComparisonFiles(inputs, Parsing(lenient));
      tad::Json summary = tad::SummaryToJson(tad::Summarize(result.records));
      summary["skipped"] = result.skipped;
      tad::Json issues = tad::Json::array();
      for (const auto& i : result.issues) issues.push_back({{"line", i.line}, {"reason", i.reason}});
      summary["issues"] = issues;
      std::cout << summary.dump(2) << "\n";
      if (!out_path.empty()) tad::WriteComparisonsFile(out_path, result.records);
    } else if (cluster->parsed()) {
      const auto records = LoadRecords(inputs, lenient);
      typing.embedder = embed.Config();
      typing.seed = seed;
      if (min_cluster_size > 0) typing.min_cluster_size = min_cluster_size;
      const auto fit = tad::FitTaskTyping(records, typing);
      tad::SaveTaskModel(fit.model, out_path);
      if (!assignments_path.empty()) {
        const auto provider = tad::MakeEmbeddingProvider(typing.embedder);
        tad::WriteFileAtomic(assignments_path,
                             tad::AssignmentsCsv(records, tad::AssignRecords(fit.model, records, *provider,
                                                                             typing.use_ingested_embeddings)));
      }
      std::cerr << "task model " << fit.model.Version() << ": "
                << fit.model.SurvivingClusters().size() << " of " << fit.model.cluster_count()
                << " clusters survive (min size " << fit.model.min_cluster_size << ")\n";
    } else if (signals->parsed()) {
      const auto records = LoadRecords(inputs, lenient);
      const auto model = tad::LoadTaskModel(model_path);
      const auto provider = tad::MakeEmbeddingProvider(model.embedder);
      const auto clusters =
          tad::AssignRecords(model, records, *provider, typing.use_ingested_embeddings);
      const auto artifact = tad::BuildSignalArtifact(records, clusters, signal_config,
                                                     model.Version(), tad::ResolveCreatedAt(created_at));
      tad::SaveSignalArtifact(artifact, out_path);
      std::cerr << artifact.win.size() << " (model, cluster) rates, " << artifact.tie.size()
                << " cluster tie rates\n";
    } else if (probe->parsed()) {
      const auto records = LoadRecords(inputs, lenient);
      const auto model = tad::LoadTaskModel(model_path);
      const auto provider = tad::MakeEmbeddingProvider(model.embedder);
      const auto clusters =
          tad::AssignRecords(model, records, *provider, typing.use_ingested_embeddings);
      const auto config = probe_flags.Config(seed);
      const bool winner = probe_task == "a" || probe_task == "A";
      const auto r = winner ? tad::RunWinnerProbe(records, clusters, model.cluster_count(), config)
                            : tad::RunDifficultyProbe(records, clusters, model.cluster_count(), config);
      std::cout << tad::RenderProbeTable({r});
      if (!out_path.empty()) tad::WriteFileAtomic(out_path, tad::ProbeReportToJson(r).dump(1) + "\n");
      if (!csv_path.empty()) tad::WriteFileAtomic(csv_path, tad::ProbeFoldsCsv({r}));
    } else if (run->parsed()) {
      const auto records = LoadRecords(inputs, lenient);
      tad::PipelineConfig config;
      config.typing = typing;
      config.typing.embedder = embed.Config();
      config.typing.seed = seed;
      if (min_cluster_size > 0) config.typing.min_cluster_size = min_cluster_size;
      config.signals = signal_config;
      config.probes = probe_flags.Config(seed);
      config.run_probes = !skip_probes;
      config.created_at = created_at;
      const auto outputs = tad::RunPipeline(records, config);
      for (const auto& name : tad::WritePipelineOutputs(outputs, records, out_dir)) {
        std::cerr << "wrote " << (std::filesystem::path(out_dir) / name).string() << "\n";
      }
      for (const auto& note : outputs.notes) std::cerr << note << "\n";
      std::vector<tad::ProbeReport> reports;
      if (outputs.probe_a) reports.push_back(*outputs.probe_a);
      if (outputs.probe_b) reports.push_back(*outputs.probe_b);
      if (!reports.empty()) std::cout << tad::RenderProbeTable(reports);
    } else if (serve->parsed()) {
      if (retain) service.retain_prompts = true;
      service.request_timeout = std::chrono::milliseconds(timeout_ms);
      service.session_ttl = std::chrono::seconds(ttl_s);
      if (!executor_url.empty()) {
        tad::EndpointConfig e;
        e.base_url = executor_url;
        e.path = executor_path;
        e.auth_token_env = executor_token_env;
        e.timeout = service.request_timeout;
        service.executor_endpoint = e;
      }
      tad::DelegationService svc(service);
      svc.Start();
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      const auto snap = svc.engine().snapshot();
      std::cerr << "serving on " << service.host << ":" << svc.port() << " (task model "
                << snap->model_version << ", tau " << *snap->policy.tau << ")\n";
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      svc.Stop();
      std::cerr << "stopped; log flushed to " << service.log_path << "\n";
    } else if (report->parsed()) {
      const auto model = tad::LoadTaskModel(model_path);
      const auto artifact = tad::LoadSignalArtifact(signals_path);
      tad::DelegationPolicy policy;
      if (!service.policy_path.empty()) policy = tad::LoadPolicy(service.policy_path);
      auto snap = tad::MakeSnapshot(std::make_shared<const tad::TaskTypeModel>(model),
                                    std::make_shared<const tad::SignalArtifact>(artifact), policy);
      std::printf("task model %s, %zu surviving clusters, tau %.3f\n", snap->model_version.c_str(),
                  model.SurvivingClusters().size(), *snap->policy.tau);
      std::printf("%-4s %-44s %-9s %-8s %s\n", "c", "label", "tie", "n", "best model");
      for (int c : model.SurvivingClusters()) {
        std::string tie = "-", support = "0";
        if (auto t = artifact.Tie(c)) {
          char buf[16];
          std::snprintf(buf, sizeof(buf), "%.3f", t->rate());
          tie = buf;
          support = std::to_string(t->support);
        }
        std::string best = "-";
        try {
          const auto d = tad::RouteCluster(artifact, snap->policy, c);
          char buf[96];
          std::snprintf(buf, sizeof(buf), "%s (%.3f, n=%lld)%s", d.primary.model.c_str(), d.primary.rate,
                        static_cast<long long>(d.primary.support), d.global_fallback ? " [global]" : "");
          best = buf;
        } catch (const tad::Error&) {
        }
        std::printf("%-4d %-44.44s %-9s %-8s %s\n", c, model.labels[static_cast<std::size_t>(c)].c_str(),
                    tie.c_str(), support.c_str(), best.c_str());
      }
      std::vector<tad::ProbeReport> reports;
      for (const auto& p : probe_paths) {
        const auto j = tad::Json::parse(tad::ReadFile(p));
        std::cout << "\n" << p << ": task " << j.at("task").get<std::string>() << ", best "
                  << j.at("best_family").get<std::string>() << ", ablation delta "
                  << j.at("ablation").at("delta").get<double>() << "\n";
      }
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        tad::WriteFileAtomic(out_dir + "/win_rates.csv", tad::WinRateCsv(artifact));
        std::ostringstream tie_csv;
        tie_csv << "cluster,label,ties,support,rate\n";
        for (const auto& [c, t] : artifact.tie) {
          tie_csv << c << ",\"" << model.labels[static_cast<std::size_t>(c)] << "\"," << t.ties << ','
                  << t.support << ',' << t.rate() << '\n';
        }
        tad::WriteFileAtomic(out_dir + "/tie_rates.csv", tie_csv.str());
      }
    } else if (log->parsed()) {
      tad::AccountabilityStore store(log_path);
      if (log_export->parsed()) {
        std::cout << store.ExportJsonl();
      } else if (log_forget->parsed()) {
        std::cout << tad::ToJson(store.Forget(entry_id)).dump() << "\n";
      } else if (log_freq->parsed()) {
        const auto model = tad::LoadTaskModel(model_path);
        tad::DelegationPolicy policy;
        if (!service.policy_path.empty()) policy = tad::LoadPolicy(service.policy_path);
        if (log_freq->count("--seed")) policy.noise_seed = seed;
        const auto counts = tad::NoisyClusterCounts(store.ClusterCounts(), model.cluster_count(),
                                                    policy.sensitive_clusters, policy.noise_epsilon,
                                                    policy.noise_seed);
        for (const auto& [c, v] : counts) {
          std::cout << c << "," << v << (policy.sensitive_clusters.count(c) ? ",noised" : ",exact") << "\n";
        }
      }
    }
  } catch (const tad::Error& e) {
    std::cerr << "error (" << tad::ToString(e.kind()) << "): " << e.what();
    if (!e.details().empty()) std::cerr << " " << e.details().dump();
    std::cerr << "\n";
    return e.kind() == tad::ErrorKind::kInvalidArgument || e.kind() == tad::ErrorKind::kParse ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
