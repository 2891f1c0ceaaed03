#include "tad/folds.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "tad/common.hpp"

namespace tad {

std::vector<std::vector<std::size_t>> StratifiedFolds(const std::vector<int>& labels,
                                                      int fold_count, std::uint64_t seed) {
  if (fold_count < 2) throw Error(ErrorKind::kInvalidArgument, "fold count must be at least 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (static_cast<int>(members.size()) < fold_count) {
      throw Error(ErrorKind::kInvalidArgument,
                  "class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                      " members, fewer than " + std::to_string(fold_count) + " folds",
                  {{"class", label}, {"members", members.size()}});
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(fold_count);
  std::size_t dealer = 0;
  for (auto& [label, members] : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[UniformIndex(rng, i)]);
    }
    for (std::size_t idx : members) {
      folds[dealer % fold_count].push_back(idx);
      ++dealer;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::size_t> TrainingIndices(const std::vector<std::vector<std::size_t>>& folds,
                                         int held_out) {
  std::vector<std::size_t> out;
  for (int f = 0; f < static_cast<int>(folds.size()); ++f) {
    if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tad
