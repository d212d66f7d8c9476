#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "gradeforest/dataset.hpp"
#include "gradeforest/errors.hpp"
#include "gradeforest/random.hpp"

namespace gradeforest {

// Half-up rounding of a non-negative quantity to a count.
inline std::size_t round_count(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

struct SplitRatios {
  double train = 0.90;
  double validation = 0.05;
  double test = 0.05;
};

struct SplitIndices {
  std::vector<RowIndex> train;
  std::vector<RowIndex> validation;
  std::vector<RowIndex> test;
  std::vector<std::string> warnings;
};

namespace detail {

// Splits `total` units across groups proportionally to `quotas` (largest
// remainder; ties go to the lower group index). Sum of result == total.
inline std::vector<std::size_t> apportion(const std::vector<double>& quotas, std::size_t total) {
  std::vector<std::size_t> out(quotas.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < quotas.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::floor(quotas[i]));
    assigned += out[i];
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a] - std::floor(quotas[a]) > quotas[b] - std::floor(quotas[b]);
  });
  for (std::size_t i = 0; assigned < total && i < order.size(); ++i, ++assigned) ++out[order[i]];
  // Quotas that floor to more than total can only happen through rounding noise.
  for (std::size_t i = quotas.size(); assigned > total && i-- > 0;) {
    if (out[i] > 0) {
      --out[i];
      --assigned;
    }
  }
  return out;
}

}  // namespace detail

// Partitions all rows into train/validation/test. With `stratify`, each class
// is shuffled and divided on its own; the validation and test totals are
// round(ratio * n) over the eligible rows and apportioned to classes by largest
// remainder, so every class lands within one row of its proportional share.
// Classes with fewer than three rows go entirely to train, with a warning.
inline SplitIndices stratified_split(const Dataset& data, const SplitRatios& ratios, std::uint64_t seed,
                                     bool stratify = true) {
  for (double r : {ratios.train, ratios.validation, ratios.test})
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("split ratios must each lie in (0, 1)");
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  if (data.empty()) throw InputError("cannot split an empty dataset");

  SplitIndices out;
  std::vector<std::vector<RowIndex>> groups;
  if (stratify) {
    groups.resize(data.n_classes());
    for (RowIndex i = 0; i < data.n_rows(); ++i) groups[data.label(i)].push_back(i);
  } else {
    groups.push_back(data.all_rows());
  }

  std::vector<std::size_t> eligible;
  std::size_t n_eligible = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) continue;
    if (groups[g].size() < 3) {
      const std::string who = stratify ? "class '" + data.class_names()[g] + "'" : "dataset";
      out.warnings.push_back(who + " has " + std::to_string(groups[g].size()) +
                             " row(s); assigned to train");
      out.train.insert(out.train.end(), groups[g].begin(), groups[g].end());
      continue;
    }
    Rng rng(mix_seed(seed, g));
    rng.shuffle(std::span<RowIndex>(groups[g]));
    eligible.push_back(g);
    n_eligible += groups[g].size();
  }

  auto allocate = [&](double ratio) {
    std::vector<double> quotas;
    for (std::size_t g : eligible) quotas.push_back(ratio * static_cast<double>(groups[g].size()));
    return detail::apportion(quotas, round_count(ratio * static_cast<double>(n_eligible)));
  };
  const auto n_val = allocate(ratios.validation);
  const auto n_test = allocate(ratios.test);

  for (std::size_t e = 0; e < eligible.size(); ++e) {
    const auto& rows = groups[eligible[e]];
    const std::size_t v = std::min(n_val[e], rows.size());
    const std::size_t t = std::min(n_test[e], rows.size() - v);
    out.validation.insert(out.validation.end(), rows.begin(), rows.begin() + v);
    out.test.insert(out.test.end(), rows.begin() + v, rows.begin() + v + t);
    out.train.insert(out.train.end(), rows.begin() + v + t, rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// round(fraction * n) distinct indices in [0, n), sorted ascending.
inline std::vector<std::size_t> subsample_without_replacement(std::size_t n, double fraction,
                                                              std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("sample fraction must lie in (0, 1]");
  if (n == 0) throw ConfigError("cannot subsample from zero items");
  const std::size_t k = std::min(n, round_count(fraction * static_cast<double>(n)));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// round(fraction * n) indices drawn uniformly with replacement, sorted.
inline std::vector<std::size_t> subsample_with_replacement(std::size_t n, double fraction,
                                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("sample fraction must lie in (0, 1]");
  if (n == 0) throw ConfigError("cannot subsample from zero items");
  const std::size_t k = round_count(fraction * static_cast<double>(n));
  std::vector<std::size_t> out(k);
  Rng rng(seed);
  for (auto& idx : out) idx = static_cast<std::size_t>(rng.below(n));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gradeforest
