#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "gradeforest/sampling.hpp"

using namespace gradeforest;

namespace {

Dataset balanced(std::size_t n_a, std::size_t n_b) {
  Dataset d({"x"}, {"A", "B"});
  for (std::size_t i = 0; i < n_a + n_b; ++i) {
    const double v[] = {double(i)};
    d.add_row(v, i < n_a ? 0 : 1);
  }
  return d;
}

void expect_partition(const SplitIndices& s, std::size_t n) {
  std::vector<RowIndex> all;
  for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
}

}  // namespace

TEST(StratifiedSplit, ThousandRowsGivesExactRatios) {
  const auto d = balanced(680, 320);
  const auto s = stratified_split(d, {0.90, 0.05, 0.05}, 7);
  EXPECT_EQ(s.train.size(), 900u);
  EXPECT_EQ(s.validation.size(), 50u);
  EXPECT_EQ(s.test.size(), 50u);
  expect_partition(s, 1000);
}

TEST(StratifiedSplit, SingleRowGoesToTrainWithWarning) {
  const auto d = balanced(1, 0);
  const auto s = stratified_split(d, {}, 1);
  EXPECT_EQ(s.train, std::vector<RowIndex>{0});
  EXPECT_TRUE(s.validation.empty());
  EXPECT_TRUE(s.test.empty());
  EXPECT_FALSE(s.warnings.empty());
}

TEST(StratifiedSplit, PerClassShareWithinOneRow) {
  const auto d = balanced(60, 40);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = stratified_split(d, {}, seed);
    const auto c = class_counts(d, s.train);
    EXPECT_NEAR(double(c[0]), 54.0, 1.0);
    EXPECT_NEAR(double(c[1]), 36.0, 1.0);
    expect_partition(s, 100);
  }
}

TEST(StratifiedSplit, PartitionPropertyOverManySizes) {
  for (std::size_t n = 1; n <= 120; n += 7) {
    const auto d = balanced(n, n / 3);
    for (bool stratify : {true, false}) expect_partition(stratified_split(d, {0.8, 0.1, 0.1}, n, stratify), n + n / 3);
  }
}

TEST(StratifiedSplit, DeterministicInSeed) {
  const auto d = balanced(70, 30);
  const auto a = stratified_split(d, {}, 3), b = stratified_split(d, {}, 3), c = stratified_split(d, {}, 4);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.test, c.test);
}

TEST(StratifiedSplit, BadRatiosAreConfigErrors) {
  const auto d = balanced(10, 10);
  EXPECT_THROW(stratified_split(d, {0.9, 0.05, 0.04}, 1), ConfigError);
  EXPECT_THROW(stratified_split(d, {1.0, 0.0, 0.0}, 1), ConfigError);
  EXPECT_THROW(stratified_split(Dataset({"x"}, {"A"}), {}, 1), InputError);
}

TEST(Subsample, Examples) {
  const auto a = subsample_without_replacement(100, 0.63, 1);
  EXPECT_EQ(a.size(), 63u);
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 63u);
  EXPECT_EQ(subsample_without_replacement(5, 1.0, 9), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  const auto b = subsample_without_replacement(10, 0.63, 42);
  EXPECT_EQ(b.size(), 6u);
  EXPECT_EQ(b, subsample_without_replacement(10, 0.63, 42));
}

TEST(Subsample, ExactCountDistinctInRange) {
  for (std::size_t n = 1; n <= 1000; ++n) {
    for (double f : {0.1, 0.63, 1.0}) {
      const auto s = subsample_without_replacement(n, f, n * 31 + 7);
      ASSERT_EQ(s.size(), std::min(n, round_count(f * double(n))));
      ASSERT_TRUE(std::adjacent_find(s.begin(), s.end()) == s.end());
      if (!s.empty()) ASSERT_LT(s.back(), n);
    }
  }
}

TEST(Subsample, WithReplacementSizeAndRange) {
  const auto s = subsample_with_replacement(50, 1.0, 3);
  EXPECT_EQ(s.size(), 50u);
  EXPECT_LT(s.back(), 50u);
  EXPECT_TRUE(std::adjacent_find(s.begin(), s.end()) != s.end());  // duplicates are expected
}

TEST(Subsample, BadFractionIsConfigError) {
  EXPECT_THROW(subsample_without_replacement(10, 0.0, 1), ConfigError);
  EXPECT_THROW(subsample_without_replacement(10, 1.5, 1), ConfigError);
}

TEST(RoundCount, HalfUp) {
  EXPECT_EQ(round_count(2.5), 3u);
  EXPECT_EQ(round_count(6.3), 6u);
  EXPECT_EQ(round_count(0.49), 0u);
}
