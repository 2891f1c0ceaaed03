#pragma once

#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"

namespace fixture {

// 200 comparisons over 6 models and 5 clusters. Pairs, outcomes and clusters
// come from fixed arithmetic patterns so every outcome kind, repeated pairs,
// and a cluster with only one model pair all occur.
inline std::pair<std::vector<tad::ComparisonRecord>, std::vector<int>> Signals200() {
  const std::vector<std::string> models = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot"};
  const tad::Outcome outcomes[] = {tad::Outcome::kAWins, tad::Outcome::kBWins, tad::Outcome::kTie,
                                   tad::Outcome::kAWins, tad::Outcome::kTieBothBad,
                                   tad::Outcome::kInvalid, tad::Outcome::kBWins};
  std::vector<tad::ComparisonRecord> recs;
  std::vector<int> clusters;
  for (int i = 0; i < 200; ++i) {
    const int cluster = (i * 7 + i / 13) % 5;
    int a = (i * 5 + 1) % 6, b = (i * 11 + 4) % 6;
    if (cluster == 4) a = 0, b = 1;  // one pair only
    if (a == b) b = (b + 1) % 6;
    recs.push_back(oracle::Rec("f" + std::to_string(i), "prompt number " + std::to_string(i),
                               models[a], models[b], outcomes[(i * 3 + i / 7) % 7]));
    clusters.push_back(cluster);
  }
  return {recs, clusters};
}

}  // namespace fixture
