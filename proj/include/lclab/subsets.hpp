#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "lclab/metrics.hpp"

namespace lclab {

struct RankedSubset {
  std::vector<int> classes;  // ascending original ids
  double score = 0.0;        // off-diagonal confusion mass
};

struct SubsetRanking {
  std::size_t matrix_size = 0;
  std::size_t subset_size = 0;
  std::vector<RankedSubset> entries;  // descending score, lexicographic ties
};

namespace detail {

/// Dense double view of the counts, optionally row-normalised to rates.
inline std::vector<double> confusion_values(const ConfusionMatrix& m, bool row_normalize) {
  const std::size_t c = m.num_classes;
  std::vector<double> v(c * c, 0.0);
  for (std::size_t r = 0; r < c; ++r) {
    const std::int64_t rs = m.row_sum(r);
    for (std::size_t j = 0; j < c; ++j) {
      const double raw = static_cast<double>(m.at(r, j));
      v[r * c + j] = row_normalize ? (rs == 0 ? 0.0 : raw / static_cast<double>(rs)) : raw;
    }
  }
  return v;
}

inline double offdiag_sum(const std::vector<double>& values, std::size_t c,
                          const std::vector<int>& combo) {
  double s = 0.0;
  for (int a : combo)
    for (int b : combo)
      if (a != b) s += values[static_cast<std::size_t>(a) * c + static_cast<std::size_t>(b)];
  return s;
}

/// Visits every m-combination of `pool` (ascending ids) exactly once.
template <typename Fn>
void for_each_combination(const std::vector<int>& pool, std::size_t m, Fn&& fn) {
  const std::size_t n = pool.size();
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  std::vector<int> combo(m);
  while (true) {
    for (std::size_t i = 0; i < m; ++i) combo[i] = pool[idx[i]];
    fn(combo);
    std::size_t i = m;
    while (i-- > 0) {
      if (idx[i] < n - m + i) {
        ++idx[i];
        for (std::size_t j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
        break;
      }
      if (i == 0) return;
    }
  }
}

}  // namespace detail

/// Ranks every m-combination of classes by the off-diagonal sum of its
/// m x m confusion sub-matrix, descending; ties break lexicographically on
/// the sorted class ids.
inline SubsetRanking rank_subsets(const ConfusionMatrix& confusion, std::size_t m,
                                  bool row_normalize = false) {
  const std::size_t c = confusion.num_classes;
  if (m < 2 || m > c)
    throw std::invalid_argument("rank_subsets: subset size " + std::to_string(m) +
                                " out of range [2," + std::to_string(c) + "]");
  const auto values = detail::confusion_values(confusion, row_normalize);
  std::vector<int> pool(c);
  for (std::size_t i = 0; i < c; ++i) pool[i] = static_cast<int>(i);

  SubsetRanking ranking;
  ranking.matrix_size = c;
  ranking.subset_size = m;
  detail::for_each_combination(pool, m, [&](const std::vector<int>& combo) {
    ranking.entries.push_back({combo, detail::offdiag_sum(values, c, combo)});
  });
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const RankedSubset& a, const RankedSubset& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.classes < b.classes;
            });
  return ranking;
}

/// Greedy exclusion: take the top combination, drop its classes, re-rank
/// among the remaining classes, repeat. The outputs are pairwise disjoint.
inline std::vector<RankedSubset> hard_subset_sequence(const ConfusionMatrix& confusion,
                                                      std::size_t m, std::size_t rounds,
                                                      bool row_normalize = false) {
  const std::size_t c = confusion.num_classes;
  if (m < 2) throw std::invalid_argument("hard_subset_sequence: subset size must be >= 2");
  if (rounds * m > c)
    throw std::invalid_argument("hard_subset_sequence: " + std::to_string(rounds) + " rounds of " +
                                std::to_string(m) + " classes exceed " + std::to_string(c));
  const auto values = detail::confusion_values(confusion, row_normalize);
  std::vector<int> remaining(c);
  for (std::size_t i = 0; i < c; ++i) remaining[i] = static_cast<int>(i);

  std::vector<RankedSubset> sequence;
  for (std::size_t round = 0; round < rounds; ++round) {
    RankedSubset best;
    bool have = false;
    detail::for_each_combination(remaining, m, [&](const std::vector<int>& combo) {
      const double score = detail::offdiag_sum(values, c, combo);
      if (!have || score > best.score || (score == best.score && combo < best.classes)) {
        best = {combo, score};
        have = true;
      }
    });
    sequence.push_back(best);
    std::vector<int> next;
    for (int id : remaining)
      if (std::find(best.classes.begin(), best.classes.end(), id) == best.classes.end())
        next.push_back(id);
    remaining = std::move(next);
  }
  return sequence;
}

}  // namespace lclab
