#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tad/ingest.hpp"

namespace tad {

enum class WinnerRule {
  kClusterOutcome,    // outcome = (A_WINS, B_WINS, TIE)[topic % 3]
  kClusterParity,     // even topic: A wins; odd topic: B wins
  kClusterBestModel,  // model (topic % models) wins when present, else TIE
  kModelSkill,        // the lower-indexed contestant wins; topic is irrelevant
  kRandom,            // uniform over A_WINS, B_WINS, TIE
};

enum class DifficultyRule {
  kNone,         // no difficulty field
  kConstant,     // difficulty_value everywhere
  kClusterBase,  // 1 + 9 * topic / (topics - 1), plus noise, clamped to [1, 10]
};

std::string_view ToString(WinnerRule rule);
WinnerRule WinnerRuleFromString(std::string_view s);
std::string_view ToString(DifficultyRule rule);
DifficultyRule DifficultyRuleFromString(std::string_view s);

struct SyntheticSpec {
  std::size_t records = 1000;
  int topics = 10;
  int models = 5;
  WinnerRule winner_rule = WinnerRule::kClusterOutcome;
  // Probability of replacing the rule's outcome with a uniform draw over all
  // five outcomes.
  double label_noise = 0.0;
  DifficultyRule difficulty_rule = DifficultyRule::kClusterBase;
  double difficulty_value = 5.0;
  double difficulty_noise = 0.5;  // Gaussian sigma
  bool with_response_diff = true;
  // Response diff = signal * (+1 A wins, -1 B wins, 0 otherwise) on the
  // first coordinate, plus Gaussian noise on every coordinate.
  double diff_signal = 0.0;
  double diff_noise = 1.0;
  int words_per_prompt = 6;
  int vocabulary_per_topic = 12;
};

/// Validates the spec; throws kInvalidArgument on inconsistencies.
void ValidateSyntheticSpec(const SyntheticSpec& spec);

Json ToJson(const SyntheticSpec& spec);
SyntheticSpec SyntheticSpecFromJson(const Json& j);

/// Outcome the winner rule assigns, before label noise.
Outcome RuleOutcome(WinnerRule rule, int topic, int model_a, int model_b, int models,
                    std::uint64_t random_draw);

/// Deterministic word `index` of topic `topic`'s vocabulary.
std::string TopicWord(int topic, int index);

std::string SyntheticModelId(int index);

/// Deterministic corpus; each record carries its topic in true_cluster.
std::vector<ComparisonRecord> GenerateSyntheticCorpus(const SyntheticSpec& spec,
                                                      std::uint64_t seed);

}  // namespace tad
