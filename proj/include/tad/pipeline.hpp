#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tad/ingest.hpp"
#include "tad/probes.hpp"
#include "tad/signals.hpp"
#include "tad/task_model.hpp"

namespace tad {

struct PipelineConfig {
  TaskTypingConfig typing;
  SignalConfig signals;
  ProbeConfig probes;
  bool run_probes = true;
  // Empty: see ResolveCreatedAt.
  std::string created_at;
};

struct PipelineOutputs {
  TaskTypingFit typing;
  std::vector<int> clusters;  // nearest surviving centroid per record
  SignalArtifact signals;
  std::optional<ProbeReport> probe_a;  // absent when records lack response diffs
  std::optional<ProbeReport> probe_b;  // absent when no record has a difficulty
  std::vector<std::string> notes;      // why a probe was skipped
};

/// ingest -> cluster -> signals -> probes on already parsed records.
PipelineOutputs RunPipeline(const std::vector<ComparisonRecord>& records,
                            const PipelineConfig& config);

/// Writes task_model.json, signals.json, assignments.csv, plot CSVs and,
/// when present, probe_a.json, probe_b.json, probes.txt, probe_folds.csv.
/// Returns the file names written, in a fixed order.
std::vector<std::string> WritePipelineOutputs(const PipelineOutputs& outputs,
                                              const std::vector<ComparisonRecord>& records,
                                              const std::string& directory);

/// Per-cluster size, label and tie rate (one row per surviving cluster).
std::string ClusterSummaryCsv(const TaskTypeModel& model, const std::vector<int>& assignments,
                              const SignalArtifact& signals);

/// Long-format capability map: model,cluster,wins,support,rate.
std::string WinRateCsv(const SignalArtifact& signals);

/// record_id,cluster,true_cluster (true_cluster blank when unknown).
std::string AssignmentsCsv(const std::vector<ComparisonRecord>& records,
                           const std::vector<int>& clusters);

}  // namespace tad
