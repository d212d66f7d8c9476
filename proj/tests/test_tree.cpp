#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "gradeforest/tree.hpp"
#include "oracles.hpp"

using namespace gradeforest;

namespace {

Dataset aabb() {
  Dataset d({"x"}, {"A", "B"});
  const double xs[] = {1, 2, 3, 4};
  const ClassIndex ys[] = {0, 0, 1, 1};
  for (int i = 0; i < 4; ++i) d.add_row(std::span<const double>(&xs[i], 1), ys[i]);
  return d;
}

std::vector<std::size_t> all_features(const Dataset& d) {
  std::vector<std::size_t> f(d.n_features());
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = j;
  return f;
}

}  // namespace

TEST(Gini, UnitValues) {
  const std::size_t pure[] = {10, 0}, even[] = {5, 5}, three[] = {2, 1, 1};
  EXPECT_EQ(gini(pure), 0.0);
  EXPECT_EQ(gini(even), 0.5);
  EXPECT_DOUBLE_EQ(gini(three), 0.625);
}

TEST(Gini, EmptyRegionIsAnError) {
  const std::size_t none[] = {0, 0};
  EXPECT_THROW(gini(none), InputError);
}

TEST(Gini, BoundsProperty) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 1 + rng.below(6);
    std::vector<std::size_t> c(k);
    for (auto& v : c) v = rng.below(20);
    c[rng.below(k)] += 1;
    const double q = gini(c);
    EXPECT_GE(q, 0.0);
    EXPECT_LE(q, 1.0 - 1.0 / double(k) + 1e-12);
    const auto nonzero = std::count_if(c.begin(), c.end(), [](auto v) { return v > 0; });
    EXPECT_EQ(q == 0.0, nonzero == 1);
  }
}

TEST(BestSplit, FourPointExample) {
  const auto d = aabb();
  const auto s = best_split(d, d.all_rows(), all_features(d));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->condition.threshold, 2.5);
  EXPECT_EQ(s->total_impurity, 0.0);
}

TEST(BestSplit, ConstantFeatureHasNoSplit) {
  Dataset d({"x"}, {"A", "B"});
  const double v[] = {3};
  d.add_row(v, 0);
  d.add_row(v, 1);
  d.add_row(v, 0);
  EXPECT_FALSE(best_split(d, d.all_rows(), all_features(d)).has_value());
}

TEST(BestSplit, PrefersThePerfectFeature) {
  Dataset d({"noisy", "perfect"}, {"A", "B"});
  const double rows[][2] = {{1, 0}, {2, 0}, {1, 1}, {2, 1}};
  for (int i = 0; i < 4; ++i) d.add_row(rows[i], i < 2 ? 0 : 1);
  const auto s = best_split(d, d.all_rows(), all_features(d));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->condition.feature, 1u);
}

TEST(BestSplit, TieGoesToLowestFeature) {
  Dataset d({"a", "b"}, {"A", "B"});
  const double rows[][2] = {{0, 0}, {1, 1}};
  d.add_row(rows[0], 0);
  d.add_row(rows[1], 1);
  EXPECT_EQ(best_split(d, d.all_rows(), all_features(d))->condition.feature, 0u);
}

TEST(BestSplit, CategoricalSubsetWithLowestCategoryLeft) {
  Dataset d({"c"}, {"A", "B"}, {FeatureKind::categorical});
  const double codes[] = {0, 2, 1, 3, 0, 2};
  const ClassIndex ys[] = {0, 0, 1, 1, 0, 0};
  for (int i = 0; i < 6; ++i) d.add_row(std::span<const double>(&codes[i], 1), ys[i]);
  const auto s = best_split(d, d.all_rows(), all_features(d));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->condition.kind, FeatureKind::categorical);
  EXPECT_EQ(s->condition.left_categories, (std::vector<int>{0, 2}));
  EXPECT_EQ(s->total_impurity, 0.0);
}

TEST(BestSplit, TooManyCategoriesIsAnError) {
  Dataset d({"c"}, {"A", "B"}, {FeatureKind::categorical});
  for (int i = 0; i < 13; ++i) {
    const double v[] = {double(i)};
    d.add_row(v, i % 2);
  }
  EXPECT_THROW(best_split(d, d.all_rows(), all_features(d)), InputError);
}

TEST(BestSplit, MatchesBruteForceOracle) {
  Rng rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = oracle::random_small(rng);
    const auto got = best_split(d, d.all_rows(), all_features(d));
    const auto want = oracle::best_split(d, d.all_rows());
    ASSERT_EQ(got.has_value(), want.has_value()) << "trial " << trial;
    if (!got) continue;
    EXPECT_EQ(got->condition.feature, want->feature) << "trial " << trial;
    EXPECT_NEAR(got->total_impurity, want->impurity, 1e-12);
    if (want->categorical)
      EXPECT_EQ(got->condition.left_categories, want->left) << "trial " << trial;
    else
      EXPECT_EQ(got->condition.threshold, want->threshold) << "trial " << trial;
  }
}

TEST(BestSplit, SubsetOfRowsAndFeatures) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = oracle::random_small(rng);
    std::vector<RowIndex> rows;
    for (RowIndex r = 0; r < d.n_rows(); r += 2) rows.push_back(r);
    if (rows.size() < 2) continue;
    const std::vector<std::size_t> only_last = {d.n_features() - 1};
    const auto got = best_split(d, rows, only_last);
    // Oracle on a copy holding just that column and those rows.
    Dataset sub({"x"}, d.class_names(), {d.kind(d.n_features() - 1)});
    for (auto r : rows) {
      const double v[] = {d.value(r, d.n_features() - 1)};
      sub.add_row(v, d.label(r));
    }
    const auto want = oracle::best_split(sub, sub.all_rows());
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(got->total_impurity, want->impurity, 1e-12);
    }
  }
}

TEST(FitTree, LargeBetaGivesMajorityLeaf) {
  const auto d = aabb();
  const auto t = fit_tree(d, d.all_rows(), {.beta = 4, .features_per_node = std::nullopt});
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.root().majority, 0u);  // 2-2 tie goes to the lowest class
  EXPECT_EQ(t.root().proportions, (std::vector<double>{0.5, 0.5}));
}

TEST(FitTree, PureDataGivesOneHotLeaf) {
  Dataset d({"x"}, {"A", "B"});
  for (int i = 0; i < 5; ++i) {
    const double v[] = {double(i)};
    d.add_row(v, 1);
  }
  const auto t = fit_tree(d, d.all_rows(), {});
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.root().proportions, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(t.root().majority, 1u);
}

TEST(FitTree, FourPointTreeAndPredictions) {
  const auto d = aabb();
  const auto t = fit_tree(d, d.all_rows(), {.beta = 1, .features_per_node = std::nullopt});
  ASSERT_EQ(t.nodes().size(), 3u);
  EXPECT_EQ(t.root().split->threshold, 2.5);
  EXPECT_EQ(t.nodes()[t.root().left].proportions, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(t.nodes()[t.root().right].proportions, (std::vector<double>{0.0, 1.0}));
  const double x17[] = {1.7}, x25[] = {2.5}, x3[] = {3.0};
  EXPECT_EQ(predict_tree(t, x17), 0u);
  EXPECT_EQ(predict_tree(t, x25), 0u);  // boundary goes left
  EXPECT_EQ(predict_tree(t, x3), 1u);
  const double wide[] = {1, 2};
  EXPECT_THROW(predict_tree(t, wide), InputError);
}

TEST(FitTree, GiniDecreasesExample) {
  const auto d = aabb();
  const auto t = fit_tree(d, d.all_rows(), {.beta = 1, .features_per_node = std::nullopt});
  EXPECT_EQ(tree_gini_decreases(t), std::vector<double>{2.0});
  const auto leaf = fit_tree(d, d.all_rows(), {.beta = 10, .features_per_node = std::nullopt});
  EXPECT_EQ(tree_gini_decreases(leaf), std::vector<double>{0.0});
}

TEST(FitTree, UnusedFeatureHasZeroDecrease) {
  Dataset d({"signal", "constant"}, {"A", "B"});
  for (int i = 0; i < 8; ++i) {
    const double v[] = {double(i), 1.0};
    d.add_row(v, i < 4 ? 0 : 1);
  }
  const auto dec = tree_gini_decreases(fit_tree(d, d.all_rows(), {}));
  EXPECT_GT(dec[0], 0.0);
  EXPECT_EQ(dec[1], 0.0);
}

// Leaf partition, proportions, monotone recursion and preorder layout on
// random data.
TEST(FitTree, StructuralInvariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = fixtures::random_numeric(300, 5, seed);
    TreeConfig config{.beta = 1 + seed * 3, .features_per_node = seed % 2 ? std::optional<std::size_t>(2) : std::nullopt,
                      .seed = seed};
    const auto t = fit_tree(d, d.all_rows(), config);
    std::size_t leaf_total = 0;
    std::vector<std::size_t> reached(t.nodes().size(), 0);
    for (RowIndex r = 0; r < d.n_rows(); ++r) ++reached[t.leaf_index(d.row(r))];
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
      const auto& n = t.nodes()[i];
      if (n.is_leaf()) {
        leaf_total += n.n_node;
        EXPECT_EQ(reached[i], n.n_node);
        double sum = 0.0;
        for (double p : n.proportions) sum += p;
        EXPECT_NEAR(sum, 1.0, 1e-9);
        EXPECT_EQ(n.majority, std::size_t(std::max_element(n.proportions.begin(), n.proportions.end()) -
                                          n.proportions.begin()));
      } else {
        EXPECT_GT(n.impurity_decrease, 0.0);
        EXPECT_EQ(n.left, i + 1);  // preorder: left child follows its parent
        EXPECT_EQ(t.nodes()[n.left].n_node + t.nodes()[n.right].n_node, n.n_node);
        EXPECT_GT(n.n_node, config.beta);
      }
    }
    EXPECT_EQ(leaf_total, d.n_rows());
  }
}

TEST(FitTree, DeterministicInSeedAndPure) {
  const auto d = fixtures::random_numeric(200, 6, 1);
  const TreeConfig c{.beta = 5, .features_per_node = 2, .seed = 9};
  const auto a = fit_tree(d, d.all_rows(), c);
  EXPECT_EQ(a, fit_tree(d, d.all_rows(), c));
  for (RowIndex r = 0; r < 20; ++r) EXPECT_EQ(predict_tree(a, d.row(r)), predict_tree(a, d.row(r)));
}

TEST(FitTree, BadConfigIsRejected) {
  const auto d = aabb();
  EXPECT_THROW(fit_tree(d, d.all_rows(), {.beta = 0, .features_per_node = std::nullopt}), ConfigError);
  EXPECT_THROW(fit_tree(d, d.all_rows(), {.features_per_node = 2}), ConfigError);
  EXPECT_THROW(fit_tree(d, std::vector<RowIndex>{}, {}), InputError);
}

TEST(TreeText, RoundTripContinuousAndCategorical) {
  Dataset d({"x", "c"}, {"A", "B", "C"}, {FeatureKind::continuous, FeatureKind::categorical});
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double v[] = {rng.normal(), double(rng.below(5))};
    d.add_row(v, (v[0] > 0) + (v[1] >= 3 ? 1 : 0));
  }
  const auto t = fit_tree(d, d.all_rows(), {.beta = 3, .features_per_node = std::nullopt});
  std::ostringstream out;
  write_tree(out, t, d.feature_names(), d.class_names());
  EXPECT_NE(out.str().find("categories="), std::string::npos);
  std::istringstream in(out.str());
  const auto back = read_tree(in, d.kinds(), d.n_classes());
  EXPECT_EQ(back, t);
}

TEST(TreeText, FormatOfTheFourPointTree) {
  const auto d = aabb();
  const auto t = fit_tree(d, d.all_rows(), {});
  std::ostringstream out;
  write_tree(out, t, d.feature_names(), d.class_names());
  EXPECT_EQ(out.str(),
            "split n=4 decrease=2 feature=0 threshold=2.5 name=x\n"
            "  leaf n=2 majority=0 proportions=1,0 label=A\n"
            "  leaf n=2 majority=1 proportions=0,1 label=B\n");
}

TEST(TreeText, TruncatedInputIsSchemaError) {
  std::istringstream in("split n=4 decrease=2 feature=0 threshold=2.5 name=x\n  leaf n=2 majority=0 proportions=1,0 label=A\n");
  EXPECT_THROW(read_tree(in, {FeatureKind::continuous}, 2), SchemaError);
}
