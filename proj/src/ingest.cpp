#include "tad/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>

namespace tad {

Outcome NormalizeOutcome(std::string_view raw_label) {
  if (raw_label == "model_a") return Outcome::kAWins;
  if (raw_label == "model_b") return Outcome::kBWins;
  if (raw_label == "tie") return Outcome::kTie;
  if (raw_label == "tie (bothbad)") return Outcome::kTieBothBad;
  if (raw_label == "invalid") return Outcome::kInvalid;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown outcome label '" + std::string(raw_label) + "'",
              {{"label", std::string(raw_label)}});
}

std::string_view SourceLabel(Outcome outcome) {
  switch (outcome) {
    case Outcome::kAWins: return "model_a";
    case Outcome::kBWins: return "model_b";
    case Outcome::kTie: return "tie";
    case Outcome::kTieBothBad: return "tie (bothbad)";
    case Outcome::kInvalid: return "invalid";
  }
  return "invalid";
}

std::string_view OutcomeName(Outcome outcome) {
  switch (outcome) {
    case Outcome::kAWins: return "A_WINS";
    case Outcome::kBWins: return "B_WINS";
    case Outcome::kTie: return "TIE";
    case Outcome::kTieBothBad: return "TIE_BOTH_BAD";
    case Outcome::kInvalid: return "INVALID";
  }
  return "INVALID";
}

void ValidateRecord(const ComparisonRecord& r) {
  if (r.model_a.empty() || r.model_b.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "empty model id");
  }
  if (r.model_a == r.model_b) {
    throw Error(ErrorKind::kInvalidArgument, "contestants identical");
  }
  if (r.prompt_length != Utf8Length(r.prompt_text)) {
    throw Error(ErrorKind::kInvalidArgument, "prompt_length does not match prompt text");
  }
  if (r.response_embedding_diff && r.response_embedding_diff->size() != kResponseDiffDim) {
    throw Error(ErrorKind::kInvalidArgument,
                "response_embedding_diff must have " + std::to_string(kResponseDiffDim) +
                    " values, got " + std::to_string(r.response_embedding_diff->size()));
  }
  if (r.difficulty && !(*r.difficulty >= 1.0 && *r.difficulty <= 10.0)) {
    throw Error(ErrorKind::kInvalidArgument, "difficulty outside [1, 10]");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if ((r.prompt_embedding && !finite(*r.prompt_embedding)) ||
      (r.response_embedding_diff && !finite(*r.response_embedding_diff))) {
    throw Error(ErrorKind::kInvalidArgument, "non-finite embedding value");
  }
}

namespace {

const Json& Require(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorKind::kParse, std::string("missing field '") + key + "'");
  }
  return *it;
}

std::string RequireString(const Json& j, const char* key) {
  const Json& v = Require(j, key);
  if (!v.is_string()) {
    throw Error(ErrorKind::kParse, std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::vector<double> NumberArray(const Json& v, const char* key) {
  if (!v.is_array()) {
    throw Error(ErrorKind::kParse, std::string("field '") + key + "' must be an array");
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw Error(ErrorKind::kParse, std::string("field '") + key + "' must hold numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

ComparisonRecord RecordFromJson(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kParse, "record is not a JSON object");
  ComparisonRecord r;
  r.record_id = RequireString(j, "id");
  r.prompt_text = RequireString(j, "prompt");
  r.model_a = RequireString(j, "model_a");
  r.model_b = RequireString(j, "model_b");
  r.outcome = NormalizeOutcome(RequireString(j, "winner"));
  if (auto it = j.find("prompt_embedding"); it != j.end() && !it->is_null()) {
    r.prompt_embedding = NumberArray(*it, "prompt_embedding");
  }
  if (auto it = j.find("response_embedding_diff"); it != j.end() && !it->is_null()) {
    r.response_embedding_diff = NumberArray(*it, "response_embedding_diff");
  }
  if (auto it = j.find("difficulty"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw Error(ErrorKind::kParse, "field 'difficulty' must be a number");
    r.difficulty = it->get<double>();
  }
  if (auto it = j.find("true_cluster"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      throw Error(ErrorKind::kParse, "field 'true_cluster' must be an integer");
    }
    r.true_cluster = it->get<int>();
  }
  r.prompt_length = Utf8Length(r.prompt_text);
  ValidateRecord(r);
  return r;
}

Json RecordToJson(const ComparisonRecord& r) {
  Json j = Json::object();
  j["id"] = r.record_id;
  j["prompt"] = r.prompt_text;
  j["model_a"] = r.model_a;
  j["model_b"] = r.model_b;
  j["winner"] = SourceLabel(r.outcome);
  if (r.prompt_embedding) j["prompt_embedding"] = *r.prompt_embedding;
  if (r.response_embedding_diff) j["response_embedding_diff"] = *r.response_embedding_diff;
  if (r.difficulty) j["difficulty"] = *r.difficulty;
  if (r.true_cluster) j["true_cluster"] = *r.true_cluster;
  return j;
}

std::string RecordToLine(const ComparisonRecord& record) { return RecordToJson(record).dump(); }

ParseResult ParseComparisons(std::istream& in, const ParseOptions& options) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::kParse, std::string("malformed JSON: ") + e.what());
      }
      result.records.push_back(RecordFromJson(j));
    } catch (const Error& e) {
      if (options.strict) {
        throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what(),
                    {{"line", line_no}, {"reason", e.what()}});
      }
      result.issues.push_back({line_no, e.what()});
      ++result.skipped;
    }
  }
  if (in.bad()) throw Error(ErrorKind::kUnavailable, "read error on comparison stream");
  return result;
}

ParseResult ParseComparisonsFile(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kUnavailable, "cannot open '" + path + "'");
  return ParseComparisons(in, options);
}

ParseResult ParseComparisonFiles(const std::vector<std::string>& paths,
                                 const ParseOptions& options) {
  std::vector<std::future<ParseResult>> parts;
  parts.reserve(paths.size());
  for (const auto& p : paths) {
    parts.push_back(std::async(std::launch::async,
                               [&options, p] { return ParseComparisonsFile(p, options); }));
  }
  ParseResult merged;
  for (auto& f : parts) {
    ParseResult part = f.get();
    merged.records.insert(merged.records.end(), std::make_move_iterator(part.records.begin()),
                          std::make_move_iterator(part.records.end()));
    merged.skipped += part.skipped;
    merged.issues.insert(merged.issues.end(), part.issues.begin(), part.issues.end());
  }
  return merged;
}

void WriteComparisons(std::ostream& out, const std::vector<ComparisonRecord>& records) {
  for (const auto& r : records) out << RecordToLine(r) << '\n';
}

void WriteComparisonsFile(const std::string& path, const std::vector<ComparisonRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kUnavailable, "cannot write '" + path + "'");
  WriteComparisons(out, records);
}

std::vector<std::string> CollectModelIds(const std::vector<ComparisonRecord>& records) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    ids.insert(r.model_a);
    ids.insert(r.model_b);
  }
  return {ids.begin(), ids.end()};
}

DatasetSummary Summarize(const std::vector<ComparisonRecord>& records) {
  DatasetSummary s;
  s.record_count = records.size();
  s.model_ids = CollectModelIds(records);
  for (Outcome o : kAllOutcomes) s.outcome_counts[o] = 0;
  for (const auto& r : records) {
    ++s.outcome_counts[r.outcome];
    if (r.prompt_embedding || r.response_embedding_diff) ++s.records_with_embeddings;
    if (r.difficulty) ++s.records_with_difficulty;
  }
  return s;
}

Json SummaryToJson(const DatasetSummary& s) {
  Json counts = Json::object();
  for (const auto& [o, n] : s.outcome_counts) counts[std::string(OutcomeName(o))] = n;
  return {{"record_count", s.record_count},
          {"model_ids", s.model_ids},
          {"outcome_counts", counts},
          {"records_with_embeddings", s.records_with_embeddings},
          {"records_with_difficulty", s.records_with_difficulty}};
}

}  // namespace tad
