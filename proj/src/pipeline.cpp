#include "tad/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "tad/features.hpp"

namespace tad {

namespace {

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

PipelineOutputs RunPipeline(const std::vector<ComparisonRecord>& records,
                            const PipelineConfig& config) {
  PipelineOutputs out;
  out.typing = FitTaskTyping(records, config.typing);
  // Downstream stages see records typed the way the online engine types
  // prompts: nearest surviving centroid.
  const auto provider = MakeEmbeddingProvider(config.typing.embedder);
  out.clusters = AssignRecords(out.typing.model, records, *provider,
                               config.typing.use_ingested_embeddings);
  const auto& clusters = out.clusters;
  out.signals = BuildSignalArtifact(records, clusters, config.signals, out.typing.model.Version(),
                                    ResolveCreatedAt(config.created_at));
  if (!config.run_probes) return out;

  const int k = out.typing.model.cluster_count();
  bool have_diffs = true;
  for (const auto& r : records) {
    if (!r.response_embedding_diff && TaskALabel(r.outcome, config.probes.exclude_invalid)) {
      have_diffs = false;
      break;
    }
  }
  if (have_diffs) {
    out.probe_a = RunWinnerProbe(records, clusters, k, config.probes);
  } else {
    out.notes.push_back("winner probe skipped: some records lack response_embedding_diff");
  }
  bool have_difficulty = false;
  for (const auto& r : records) have_difficulty = have_difficulty || r.difficulty.has_value();
  if (have_difficulty) {
    out.probe_b = RunDifficultyProbe(records, clusters, k, config.probes);
  } else {
    out.notes.push_back("difficulty probe skipped: no record has a difficulty label");
  }
  return out;
}

std::string ClusterSummaryCsv(const TaskTypeModel& model, const std::vector<int>& assignments,
                              const SignalArtifact& signals) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(model.cluster_count()), 0);
  for (int c : assignments) ++sizes.at(static_cast<std::size_t>(c));
  std::ostringstream out;
  out << "cluster,size,label,ties,tie_support,tie_rate\n";
  for (int c : model.SurvivingClusters()) {
    out << c << ',' << sizes[static_cast<std::size_t>(c)] << ','
        << CsvField(model.labels[static_cast<std::size_t>(c)]) << ',';
    if (auto t = signals.Tie(c)) {
      out << t->ties << ',' << t->support << ',' << Num(t->rate()) << '\n';
    } else {
      out << "0,0,\n";
    }
  }
  return out.str();
}

std::string WinRateCsv(const SignalArtifact& signals) {
  std::ostringstream out;
  out << "model,cluster,wins,support,rate\n";
  for (const auto& [key, count] : signals.win) {
    out << CsvField(key.first) << ',' << key.second << ',' << count.wins << ',' << count.support
        << ',' << Num(count.rate()) << '\n';
  }
  return out.str();
}

std::string AssignmentsCsv(const std::vector<ComparisonRecord>& records,
                           const std::vector<int>& clusters) {
  std::ostringstream out;
  out << "record_id,cluster,true_cluster\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << CsvField(records[i].record_id) << ',' << clusters[i] << ',';
    if (records[i].true_cluster) out << *records[i].true_cluster;
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> WritePipelineOutputs(const PipelineOutputs& o,
                                              const std::vector<ComparisonRecord>& records,
                                              const std::string& directory) {
  std::filesystem::create_directories(directory);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& content) {
    WriteFileAtomic((std::filesystem::path(directory) / name).string(), content);
    written.push_back(name);
  };
  put("task_model.json", TaskModelToJson(o.typing.model).dump(1) + "\n");
  put("signals.json", SignalArtifactToJson(o.signals).dump(1) + "\n");
  put("assignments.csv", AssignmentsCsv(records, o.clusters));
  put("clusters.csv", ClusterSummaryCsv(o.typing.model, o.clusters, o.signals));
  put("win_rates.csv", WinRateCsv(o.signals));

  std::vector<ProbeReport> reports;
  if (o.probe_a) {
    put("probe_a.json", ProbeReportToJson(*o.probe_a).dump(1) + "\n");
    reports.push_back(*o.probe_a);
  }
  if (o.probe_b) {
    put("probe_b.json", ProbeReportToJson(*o.probe_b).dump(1) + "\n");
    reports.push_back(*o.probe_b);
  }
  if (!reports.empty()) {
    put("probes.txt", RenderProbeTable(reports));
    put("probe_folds.csv", ProbeFoldsCsv(reports));
  }
  return written;
}

}  // namespace tad
