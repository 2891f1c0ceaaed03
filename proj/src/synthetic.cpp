#include "tad/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace tad {

std::string_view ToString(WinnerRule rule) {
  switch (rule) {
    case WinnerRule::kClusterOutcome: return "cluster_outcome";
    case WinnerRule::kClusterParity: return "cluster_parity";
    case WinnerRule::kClusterBestModel: return "cluster_best_model";
    case WinnerRule::kModelSkill: return "model_skill";
    case WinnerRule::kRandom: return "random";
  }
  return "random";
}

WinnerRule WinnerRuleFromString(std::string_view s) {
  for (auto r : {WinnerRule::kClusterOutcome, WinnerRule::kClusterParity,
                 WinnerRule::kClusterBestModel, WinnerRule::kModelSkill, WinnerRule::kRandom}) {
    if (ToString(r) == s) return r;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown winner rule '" + std::string(s) + "'");
}

std::string_view ToString(DifficultyRule rule) {
  switch (rule) {
    case DifficultyRule::kNone: return "none";
    case DifficultyRule::kConstant: return "constant";
    case DifficultyRule::kClusterBase: return "cluster_base";
  }
  return "none";
}

DifficultyRule DifficultyRuleFromString(std::string_view s) {
  for (auto r : {DifficultyRule::kNone, DifficultyRule::kConstant, DifficultyRule::kClusterBase}) {
    if (ToString(r) == s) return r;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown difficulty rule '" + std::string(s) + "'");
}

void ValidateSyntheticSpec(const SyntheticSpec& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::kInvalidArgument, why); };
  if (s.topics < 1) fail("synthetic spec needs at least one topic");
  if (s.models < 2) fail("synthetic spec needs at least two models");
  if (!(s.label_noise >= 0.0 && s.label_noise <= 1.0)) fail("label_noise must lie in [0, 1]");
  if (s.difficulty_noise < 0.0 || s.diff_noise < 0.0) fail("noise levels must be nonnegative");
  if (s.difficulty_rule == DifficultyRule::kConstant &&
      !(s.difficulty_value >= 1.0 && s.difficulty_value <= 10.0)) {
    fail("constant difficulty must lie in [1, 10]");
  }
  if (s.words_per_prompt < 1 || s.vocabulary_per_topic < 1) {
    fail("prompts need at least one word from a nonempty vocabulary");
  }
}

Json ToJson(const SyntheticSpec& s) {
  return {{"records", s.records},
          {"topics", s.topics},
          {"models", s.models},
          {"winner_rule", ToString(s.winner_rule)},
          {"label_noise", s.label_noise},
          {"difficulty_rule", ToString(s.difficulty_rule)},
          {"difficulty_value", s.difficulty_value},
          {"difficulty_noise", s.difficulty_noise},
          {"with_response_diff", s.with_response_diff},
          {"diff_signal", s.diff_signal},
          {"diff_noise", s.diff_noise},
          {"words_per_prompt", s.words_per_prompt},
          {"vocabulary_per_topic", s.vocabulary_per_topic}};
}

SyntheticSpec SyntheticSpecFromJson(const Json& j) {
  SyntheticSpec s;
  s.records = j.value("records", s.records);
  s.topics = j.value("topics", s.topics);
  s.models = j.value("models", s.models);
  if (j.contains("winner_rule")) s.winner_rule = WinnerRuleFromString(j.at("winner_rule").get<std::string>());
  s.label_noise = j.value("label_noise", s.label_noise);
  if (j.contains("difficulty_rule")) {
    s.difficulty_rule = DifficultyRuleFromString(j.at("difficulty_rule").get<std::string>());
  }
  s.difficulty_value = j.value("difficulty_value", s.difficulty_value);
  s.difficulty_noise = j.value("difficulty_noise", s.difficulty_noise);
  s.with_response_diff = j.value("with_response_diff", s.with_response_diff);
  s.diff_signal = j.value("diff_signal", s.diff_signal);
  s.diff_noise = j.value("diff_noise", s.diff_noise);
  s.words_per_prompt = j.value("words_per_prompt", s.words_per_prompt);
  s.vocabulary_per_topic = j.value("vocabulary_per_topic", s.vocabulary_per_topic);
  ValidateSyntheticSpec(s);
  return s;
}

Outcome RuleOutcome(WinnerRule rule, int topic, int model_a, int model_b, int models,
                    std::uint64_t random_draw) {
  switch (rule) {
    case WinnerRule::kClusterOutcome: {
      static constexpr std::array<Outcome, 3> cycle = {Outcome::kAWins, Outcome::kBWins,
                                                       Outcome::kTie};
      return cycle[topic % 3];
    }
    case WinnerRule::kClusterParity:
      return topic % 2 == 0 ? Outcome::kAWins : Outcome::kBWins;
    case WinnerRule::kClusterBestModel: {
      const int best = topic % models;
      if (model_a == best) return Outcome::kAWins;
      if (model_b == best) return Outcome::kBWins;
      return Outcome::kTie;
    }
    case WinnerRule::kModelSkill:
      return model_a < model_b ? Outcome::kAWins : Outcome::kBWins;
    case WinnerRule::kRandom: {
      static constexpr std::array<Outcome, 3> pick = {Outcome::kAWins, Outcome::kBWins,
                                                      Outcome::kTie};
      return pick[random_draw % 3];
    }
  }
  return Outcome::kInvalid;
}

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr int kSyllables = 14 * 5;

std::string Syllable(int i) {
  return {kConsonants[static_cast<std::size_t>(i / 5)], kVowels[static_cast<std::size_t>(i % 5)]};
}

constexpr std::array<std::string_view, 10> kFillers = {
    "write", "explain", "describe", "help", "question",
    "short", "detailed", "simple", "quick", "example"};

double Gaussian(std::mt19937_64& rng) {
  double u1 = UniformUnit(rng);
  while (u1 <= 0.0) u1 = UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::string TopicWord(int topic, int index) {
  return Syllable(topic % kSyllables) + Syllable((topic / kSyllables) % kSyllables) +
         Syllable(index % kSyllables) + Syllable((index / kSyllables) % kSyllables);
}

std::string SyntheticModelId(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "model-%02d", index);
  return buf;
}

std::vector<ComparisonRecord> GenerateSyntheticCorpus(const SyntheticSpec& spec,
                                                      std::uint64_t seed) {
  ValidateSyntheticSpec(spec);
  std::mt19937_64 rng(seed);
  std::vector<ComparisonRecord> out;
  out.reserve(spec.records);
  for (std::size_t i = 0; i < spec.records; ++i) {
    ComparisonRecord r;
    char id[32];
    std::snprintf(id, sizeof(id), "r%06zu", i);
    r.record_id = id;
    const int topic = static_cast<int>(UniformIndex(rng, spec.topics));
    r.true_cluster = topic;

    std::string prompt(kFillers[UniformIndex(rng, kFillers.size())]);
    for (int w = 0; w < spec.words_per_prompt; ++w) {
      prompt += ' ';
      prompt += TopicWord(topic, static_cast<int>(UniformIndex(rng, spec.vocabulary_per_topic)));
    }
    r.prompt_text = std::move(prompt);
    r.prompt_length = Utf8Length(r.prompt_text);

    const int a = static_cast<int>(UniformIndex(rng, spec.models));
    int b = static_cast<int>(UniformIndex(rng, spec.models - 1));
    if (b >= a) ++b;
    r.model_a = SyntheticModelId(a);
    r.model_b = SyntheticModelId(b);

    const std::uint64_t draw = rng();
    r.outcome = RuleOutcome(spec.winner_rule, topic, a, b, spec.models, draw);
    if (spec.label_noise > 0.0 && UniformUnit(rng) < spec.label_noise) {
      r.outcome = kAllOutcomes[UniformIndex(rng, kOutcomeCount)];
    }

    switch (spec.difficulty_rule) {
      case DifficultyRule::kNone: break;
      case DifficultyRule::kConstant: {
        const double noise = spec.difficulty_noise > 0.0 ? spec.difficulty_noise * Gaussian(rng) : 0.0;
        r.difficulty = std::clamp(spec.difficulty_value + noise, 1.0, 10.0);
        break;
      }
      case DifficultyRule::kClusterBase: {
        const double base =
            spec.topics > 1 ? 1.0 + 9.0 * topic / static_cast<double>(spec.topics - 1) : 5.0;
        const double noise = spec.difficulty_noise > 0.0 ? spec.difficulty_noise * Gaussian(rng) : 0.0;
        r.difficulty = std::clamp(base + noise, 1.0, 10.0);
        break;
      }
    }

    if (spec.with_response_diff) {
      std::vector<double> diff(kResponseDiffDim);
      for (double& v : diff) v = spec.diff_noise > 0.0 ? spec.diff_noise * Gaussian(rng) : 0.0;
      const double sign = r.outcome == Outcome::kAWins   ? 1.0
                          : r.outcome == Outcome::kBWins ? -1.0
                                                         : 0.0;
      diff[0] += spec.diff_signal * sign;
      r.response_embedding_diff = std::move(diff);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tad
