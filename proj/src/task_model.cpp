#include "tad/task_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "tad/kernels.hpp"

namespace tad {

bool TaskTypeModel::IsSurviving(int cluster) const {
  return cluster >= 0 && cluster < cluster_count() && !reassignment_map.contains(cluster);
}

std::vector<int> TaskTypeModel::SurvivingClusters() const {
  std::vector<int> out;
  for (int c = 0; c < cluster_count(); ++c) {
    if (IsSurviving(c)) out.push_back(c);
  }
  return out;
}

std::vector<char> TaskTypeModel::ActiveMask() const {
  std::vector<char> mask(cluster_count(), 1);
  for (const auto& [retired, target] : reassignment_map) mask[retired] = 0;
  return mask;
}

bool TaskTypeModel::operator==(const TaskTypeModel& o) const {
  return TaskModelToJson(*this) == TaskModelToJson(o);
}

namespace {

Json RowMajor(const Matrix& m) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  }
  return arr;
}

Matrix FromRowMajor(const Json& arr, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorKind::kCorrupted, std::string("task model field '") + what +
                                           "' has the wrong number of values");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = arr[i * cols + j].get<double>();
  }
  return m;
}

Json ContentJson(const TaskTypeModel& m) {
  Json remap = Json::array();
  for (const auto& [from, to] : m.reassignment_map) remap.push_back({from, to});
  Json center = Json::array();
  for (Eigen::Index i = 0; i < m.reducer.center().size(); ++i) center.push_back(m.reducer.center()[i]);
  return {{"schema_version", kTaskModelSchemaVersion},
          {"d", m.reducer.input_dim()},
          {"d_prime", m.reducer.output_dim()},
          {"K", m.cluster_count()},
          {"seed", m.fit_seed},
          {"delta", m.min_cluster_size},
          {"embedder", ToJson(m.embedder)},
          {"center", center},
          {"basis", RowMajor(m.reducer.basis())},
          {"centroids", RowMajor(m.centroids)},
          {"labels", m.labels},
          {"keywords", m.keywords},
          {"reassignment_map", remap}};
}

}  // namespace

std::string TaskTypeModel::Version() const {
  return "tm-" + HexDigest(Fnv1a(ContentJson(*this).dump()));
}

Json TaskModelToJson(const TaskTypeModel& model) {
  Json j = ContentJson(model);
  j["model_version"] = model.Version();
  return j;
}

TaskTypeModel TaskModelFromJson(const Json& j) {
  try {
    if (!j.is_object() || !j.contains("schema_version")) {
      throw Error(ErrorKind::kCorrupted, "task model lacks schema_version");
    }
    if (j.at("schema_version") != kTaskModelSchemaVersion) {
      throw Error(ErrorKind::kVersionMismatch,
                  "task model schema_version " + j.at("schema_version").dump() +
                      " is not supported (expected " + std::to_string(kTaskModelSchemaVersion) +
                      ")");
    }
    TaskTypeModel m;
    const int d = j.at("d").get<int>();
    const int dp = j.at("d_prime").get<int>();
    const int k = j.at("K").get<int>();
    m.fit_seed = j.at("seed").get<std::uint64_t>();
    m.min_cluster_size = j.at("delta").get<int>();
    m.embedder = EmbeddingProviderConfigFromJson(j.at("embedder"));
    Matrix center = FromRowMajor(j.at("center"), d, 1, "center");
    m.reducer = LinearReducer(Vector(center.col(0)), FromRowMajor(j.at("basis"), dp, d, "basis"));
    m.centroids = FromRowMajor(j.at("centroids"), k, dp, "centroids");
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.keywords = j.at("keywords").get<std::vector<std::vector<std::string>>>();
    for (const auto& pair : j.at("reassignment_map")) {
      m.reassignment_map[pair.at(0).get<int>()] = pair.at(1).get<int>();
    }
    if (static_cast<int>(m.labels.size()) != k || static_cast<int>(m.keywords.size()) != k) {
      throw Error(ErrorKind::kCorrupted, "task model labels do not cover K clusters");
    }
    for (const auto& [from, to] : m.reassignment_map) {
      if (from < 0 || from >= k || !m.IsSurviving(to)) {
        throw Error(ErrorKind::kCorrupted, "task model reassignment_map is inconsistent");
      }
    }
    if (auto it = j.find("model_version"); it != j.end() && *it != m.Version()) {
      throw Error(ErrorKind::kCorrupted, "task model content does not match its model_version");
    }
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kCorrupted, std::string("malformed task model: ") + e.what());
  }
}

void SaveTaskModel(const TaskTypeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kUnavailable, "cannot write '" + path + "'");
  out << TaskModelToJson(model).dump(1) << '\n';
}

TaskTypeModel LoadTaskModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kUnavailable, "cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kCorrupted, "'" + path + "' is not valid JSON: " + e.what());
  }
  return TaskModelFromJson(j);
}

int DefaultMinClusterSize(std::size_t n) {
  const auto scaled = static_cast<int>(std::ceil(0.005 * static_cast<double>(n)));
  return std::max(10, scaled);
}

void ReassignSmallClusters(TaskTypeModel& model, std::vector<int>& assignments, int min_size) {
  const int k = model.cluster_count();
  std::vector<int> sizes(k, 0);
  for (int a : assignments) ++sizes[a];
  std::vector<int> large;
  for (int c = 0; c < k; ++c) {
    if (sizes[c] >= min_size && model.IsSurviving(c)) large.push_back(c);
  }
  if (large.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no large cluster exists");
  }
  std::vector<int> target(k, -1);
  for (int c = 0; c < k; ++c) {
    if (sizes[c] >= min_size || !model.IsSurviving(c)) continue;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int l : large) {
      const double d = (model.centroids.row(c) - model.centroids.row(l)).norm();
      if (d < best_d) {
        best_d = d;
        best = l;
      }
    }
    target[c] = best;
    model.reassignment_map[c] = best;
  }
  for (int& a : assignments) {
    if (target[a] >= 0) a = target[a];
  }
  model.min_cluster_size = min_size;
}

const std::vector<std::string>& StopWords() {
  static const std::vector<std::string> words = {
      "a",      "about",  "above", "after", "again", "all",   "also",   "am",    "an",
      "and",    "any",    "are",   "as",    "at",    "be",    "been",   "before", "being",
      "below",  "between", "both", "but",   "by",    "can",   "could",  "did",   "do",
      "does",   "doing",  "down",  "during", "each", "few",   "for",    "from",  "further",
      "had",    "has",    "have",  "having", "he",   "her",   "here",   "hers",  "him",
      "his",    "how",    "i",     "if",    "in",    "into",  "is",     "it",    "its",
      "just",   "me",     "more",  "most",  "my",    "no",    "nor",    "not",   "now",
      "of",     "off",    "on",    "once",  "only",  "or",    "other",  "our",   "ours",
      "out",    "over",   "own",   "please", "same", "she",   "should", "so",    "some",
      "such",   "than",   "that",  "the",   "their", "them",  "then",   "there", "these",
      "they",   "this",   "those", "through", "to",  "too",   "under",  "until", "up",
      "us",     "very",   "was",   "we",    "were",  "what",  "when",   "where", "which",
      "while",  "who",    "whom",  "why",   "will",  "with",  "would",  "you",   "your",
      "yours"};
  return words;
}

std::vector<std::string> KeywordTokens(const std::string& text) {
  static const std::set<std::string> stop(StopWords().begin(), StopWords().end());
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stop.contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c != '\'') {
      // Apostrophes are stripped in place ("don't" -> "dont"); everything
      // else separates tokens.
      flush();
    }
  }
  flush();
  return out;
}

std::vector<ClusterLabel> LabelClusters(const std::vector<std::vector<std::string>>& prompts) {
  std::vector<ClusterLabel> labels;
  labels.reserve(prompts.size());
  for (std::size_t c = 0; c < prompts.size(); ++c) {
    if (prompts[c].empty()) {
      throw Error(ErrorKind::kInvalidArgument, "cluster " + std::to_string(c) + " is empty");
    }
    std::unordered_map<std::string, int> freq;
    for (const auto& p : prompts[c]) {
      for (auto& t : KeywordTokens(p)) ++freq[t];
    }
    std::vector<std::pair<std::string, int>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    ClusterLabel lab;
    for (std::size_t i = 0; i < ranked.size() && i < kKeywordsPerCluster; ++i) {
      lab.keywords.push_back(ranked[i].first);
    }
    if (lab.keywords.empty()) {
      lab.label = "unlabeled";
    } else {
      for (std::size_t i = 0; i < lab.keywords.size(); ++i) {
        if (i) lab.label += " / ";
        lab.label += lab.keywords[i];
      }
    }
    labels.push_back(std::move(lab));
  }
  return labels;
}

Json ToJson(const TypeAssignment& a) {
  Json j = {{"cluster", a.cluster},
            {"confidence", a.confidence},
            {"distance_to_centroid", a.distance_to_centroid},
            {"keywords", a.keywords}};
  j["runner_up_cluster"] = a.runner_up_cluster ? Json(*a.runner_up_cluster) : Json(nullptr);
  j["runner_up_distance"] = a.runner_up_cluster ? Json(a.runner_up_distance) : Json(nullptr);
  return j;
}

TypeAssignment AssignPoint(const TaskTypeModel& model, const Eigen::Ref<const Vector>& point) {
  if (point.size() != model.centroids.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "reduced point has the wrong dimension");
  }
  int best = -1, second = -1;
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = std::numeric_limits<double>::infinity();
  for (int c = 0; c < model.cluster_count(); ++c) {
    if (!model.IsSurviving(c)) continue;
    const double d = (model.centroids.row(c).transpose() - point).norm();
    if (d < d1) {
      second = best;
      d2 = d1;
      best = c;
      d1 = d;
    } else if (d < d2) {
      second = c;
      d2 = d;
    }
  }
  if (best < 0) throw Error(ErrorKind::kIllegalState, "task model has no surviving cluster");
  TypeAssignment a;
  a.cluster = best;
  a.distance_to_centroid = d1;
  if (second >= 0) {
    a.runner_up_cluster = second;
    a.runner_up_distance = d2;
    a.confidence = (d1 + d2) > 0.0 ? d2 / (d1 + d2) : 1.0;
  } else {
    a.confidence = 1.0;
  }
  if (best < static_cast<int>(model.keywords.size())) a.keywords = model.keywords[best];
  return a;
}

TypeAssignment Assign(const TaskTypeModel& model, const std::string& prompt,
                      const EmbeddingProvider& provider) {
  if (prompt.empty()) throw Error(ErrorKind::kInvalidArgument, "empty prompt");
  if (provider.dimension() != model.reducer.input_dim()) {
    throw Error(ErrorKind::kInvalidArgument, "embedding provider dimension does not match model");
  }
  const auto e = provider.Embed(prompt);
  const Vector x = model.reducer.Reduce(Eigen::Map<const Vector>(e.data(), e.size()));
  return AssignPoint(model, x);
}

namespace {

Matrix IngestedEmbeddings(const std::vector<ComparisonRecord>& records, int dim) {
  Matrix out(static_cast<Eigen::Index>(records.size()), dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& e = records[i].prompt_embedding;
    if (!e || static_cast<int>(e->size()) != dim) {
      throw Error(ErrorKind::kInvalidArgument,
                  "record '" + records[i].record_id + "' lacks a prompt_embedding of length " +
                      std::to_string(dim));
    }
    for (int j = 0; j < dim; ++j) out(static_cast<Eigen::Index>(i), j) = (*e)[j];
  }
  return out;
}

std::vector<std::string> Prompts(const std::vector<ComparisonRecord>& records) {
  std::vector<std::string> prompts;
  prompts.reserve(records.size());
  for (const auto& r : records) prompts.push_back(r.prompt_text);
  return prompts;
}

}  // namespace

std::vector<int> AssignRecords(const TaskTypeModel& model,
                               const std::vector<ComparisonRecord>& records,
                               const EmbeddingProvider& provider, bool use_ingested_embeddings) {
  if (records.empty()) return {};
  const Matrix e = use_ingested_embeddings
                       ? IngestedEmbeddings(records, model.reducer.input_dim())
                       : provider.EmbedBatch(Prompts(records));
  const Matrix x = model.reducer.ReduceRows(e);
  const auto active = model.ActiveMask();
  std::vector<int> labels(records.size());
  std::vector<double> d2(records.size());
  kernels::NearestCentroid(x, model.centroids, active, labels, d2);
  return labels;
}

Matrix EmbedRecords(const std::vector<ComparisonRecord>& records, const TaskTypingConfig& config,
                    const EmbeddingProvider& provider) {
  if (config.use_ingested_embeddings) {
    return IngestedEmbeddings(records, config.embedder.dimension);
  }
  return provider.EmbedBatch(Prompts(records));
}

TaskTypingFit FitTaskTyping(const std::vector<ComparisonRecord>& records,
                            const TaskTypingConfig& config) {
  if (records.empty()) throw Error(ErrorKind::kInvalidArgument, "no records to cluster");
  auto provider = MakeEmbeddingProvider(config.embedder);
  const Matrix embeddings = EmbedRecords(records, config, *provider);

  TaskTypingFit fit;
  fit.reducer_fit = FitReducer(embeddings, config.reduced_dim);
  fit.reduced = fit.reducer_fit.reducer.ReduceRows(embeddings);
  KMeansOptions km;
  km.max_iters = config.max_iters;
  fit.kmeans = FitKMeans(fit.reduced, config.cluster_count, config.seed, km);

  TaskTypeModel& model = fit.model;
  model.embedder = config.embedder;
  model.reducer = fit.reducer_fit.reducer;
  model.centroids = fit.kmeans.centroids;
  model.fit_seed = config.seed;
  fit.assignments = fit.kmeans.assignments;
  const int delta = config.min_cluster_size.value_or(DefaultMinClusterSize(records.size()));
  ReassignSmallClusters(model, fit.assignments, delta);

  const int k = model.cluster_count();
  std::vector<std::vector<std::string>> groups(k);
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[fit.assignments[i]].push_back(records[i].prompt_text);
  }
  model.labels.assign(k, "");
  model.keywords.assign(k, {});
  std::vector<std::vector<std::string>> surviving_groups;
  const auto surviving = model.SurvivingClusters();
  for (int c : surviving) surviving_groups.push_back(groups[c]);
  const auto labels = LabelClusters(surviving_groups);
  for (std::size_t i = 0; i < surviving.size(); ++i) {
    model.labels[surviving[i]] = labels[i].label;
    model.keywords[surviving[i]] = labels[i].keywords;
  }
  for (const auto& [retired, target] : model.reassignment_map) {
    model.labels[retired] = "merged into " + std::to_string(target);
  }
  return fit;
}

}  // namespace tad
