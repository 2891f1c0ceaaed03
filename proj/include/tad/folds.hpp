#pragma once

#include <cstdint>
#include <vector>

namespace tad {

/// Splits indices 0..n-1 into `fold_count` disjoint folds stratified by
/// label. Each class is shuffled with the seed and dealt round-robin, the
/// dealer position carrying over between classes, so per-class and total fold
/// sizes each differ by at most one. Folds come back sorted. Throws when
/// fold_count < 2 or a present class has fewer than fold_count members.
std::vector<std::vector<std::size_t>> StratifiedFolds(const std::vector<int>& labels,
                                                      int fold_count, std::uint64_t seed);

/// Every index not in folds[held_out], ascending.
std::vector<std::size_t> TrainingIndices(const std::vector<std::vector<std::size_t>>& folds,
                                         int held_out);

}  // namespace tad
