#pragma once

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tad/common.hpp"

namespace tad {

/// Outcome alphabet, in the fixed order used by every indicator block.
enum class Outcome { kAWins = 0, kBWins = 1, kTie = 2, kTieBothBad = 3, kInvalid = 4 };

inline constexpr int kOutcomeCount = 5;
inline constexpr std::array<Outcome, kOutcomeCount> kAllOutcomes = {
    Outcome::kAWins, Outcome::kBWins, Outcome::kTie, Outcome::kTieBothBad, Outcome::kInvalid};
inline constexpr std::size_t kResponseDiffDim = 256;

/// Maps a source label ("model_a", "model_b", "tie", "tie (bothbad)",
/// "invalid") to the outcome alphabet. Throws kInvalidArgument otherwise.
Outcome NormalizeOutcome(std::string_view raw_label);

/// Inverse of NormalizeOutcome.
std::string_view SourceLabel(Outcome outcome);

/// Enum-style name, e.g. "A_WINS".
std::string_view OutcomeName(Outcome outcome);

struct ComparisonRecord {
  std::string record_id;
  std::string prompt_text;
  std::string model_a;
  std::string model_b;
  Outcome outcome = Outcome::kInvalid;
  std::optional<std::vector<double>> prompt_embedding;
  std::optional<std::vector<double>> response_embedding_diff;
  std::optional<double> difficulty;
  std::size_t prompt_length = 0;
  // Ground-truth topic emitted by the synthetic generator; absent for real data.
  std::optional<int> true_cluster;

  bool operator==(const ComparisonRecord&) const = default;
};

/// Checks the record invariants; throws kInvalidArgument naming the first
/// violation.
void ValidateRecord(const ComparisonRecord& record);

ComparisonRecord RecordFromJson(const Json& j);
Json RecordToJson(const ComparisonRecord& record);

/// One JSON object, no trailing newline.
std::string RecordToLine(const ComparisonRecord& record);

struct ParseIssue {
  std::size_t line = 0;
  std::string reason;
};

struct ParseOptions {
  bool strict = true;
};

struct ParseResult {
  std::vector<ComparisonRecord> records;
  std::size_t skipped = 0;
  std::vector<ParseIssue> issues;
};

/// Reads the JSONL comparison schema. Blank lines are ignored. In strict mode
/// the first bad line throws kParse with {"line": n} in the details; in
/// lenient mode it is skipped and reported in `issues`.
ParseResult ParseComparisons(std::istream& in, const ParseOptions& options = {});
ParseResult ParseComparisonsFile(const std::string& path, const ParseOptions& options = {});

/// Parses several files concurrently and concatenates results in argument
/// order. Issue line numbers stay file-local.
ParseResult ParseComparisonFiles(const std::vector<std::string>& paths,
                                 const ParseOptions& options = {});

void WriteComparisons(std::ostream& out, const std::vector<ComparisonRecord>& records);
void WriteComparisonsFile(const std::string& path, const std::vector<ComparisonRecord>& records);

struct DatasetSummary {
  std::size_t record_count = 0;
  std::vector<std::string> model_ids;
  std::map<Outcome, std::size_t> outcome_counts;
  std::size_t records_with_embeddings = 0;
  std::size_t records_with_difficulty = 0;

  bool operator==(const DatasetSummary&) const = default;
};

DatasetSummary Summarize(const std::vector<ComparisonRecord>& records);
Json SummaryToJson(const DatasetSummary& summary);

/// Sorted, deduplicated contestant ids.
std::vector<std::string> CollectModelIds(const std::vector<ComparisonRecord>& records);

}  // namespace tad
