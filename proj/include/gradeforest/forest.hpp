#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gradeforest/dataset.hpp"
#include "gradeforest/errors.hpp"
#include "gradeforest/random.hpp"
#include "gradeforest/sampling.hpp"
#include "gradeforest/text.hpp"
#include "gradeforest/tree.hpp"

namespace gradeforest {

enum class FeatureMode { all, per_node_random };

struct ForestConfig {
  std::string name = "custom";
  std::size_t n_trees = 200;
  double sample_fraction = 0.63;
  bool with_replacement = false;
  FeatureMode feature_mode = FeatureMode::all;
  std::optional<std::size_t> features_per_node;  // per_node_random only; default floor(sqrt(m))
  std::size_t beta = 50;
  std::uint64_t seed = 0;

  bool operator==(const ForestConfig&) const = default;
};

// Number of predictors searched per node for an m-column dataset.
inline std::size_t resolved_features_per_node(const ForestConfig& config, std::size_t m) {
  if (config.feature_mode == FeatureMode::all) return m;
  if (config.features_per_node) return *config.features_per_node;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m)))));
}

// The three benchmark forests: 200 unpruned trees grown to nodes of 50 on
// 63% subsamples drawn without replacement. rf1 searches every predictor;
// rf2 and rf3 search a random subset per node (floor(sqrt(m)) unless set).
inline ForestConfig preset(std::string_view name) {
  ForestConfig c;
  c.name = std::string(name);
  c.n_trees = 200;
  c.sample_fraction = 0.63;
  c.with_replacement = false;
  c.beta = 50;
  if (name == "rf1") {
    c.feature_mode = FeatureMode::all;
  } else if (name == "rf2" || name == "rf3") {
    c.feature_mode = FeatureMode::per_node_random;
  } else {
    throw ConfigError("unknown forest preset '" + std::string(name) + "' (expected rf1, rf2 or rf3)");
  }
  return c;
}

struct Forest {
  std::vector<Tree> trees;
  ForestConfig config;
  Schema schema;
  std::vector<std::vector<RowIndex>> row_sets;  // training draw per tree; empty after reading from disk

  ClassIndex predict(std::span<const double> x) const {
    std::vector<std::size_t> votes(schema.class_names.size(), 0);
    for (const auto& tree : trees) ++votes[tree.predict(x)];
    return detail::majority_of(votes);
  }
};

// Majority vote over the trees; ties go to the lowest class index.
inline ClassIndex predict_forest(const Forest& forest, std::span<const double> x) { return forest.predict(x); }

namespace detail {

inline std::vector<RowIndex> draw_rows(std::span<const RowIndex> train_rows, const ForestConfig& config,
                                       std::size_t tree_index) {
  const auto seed = mix_seed(config.seed, tree_index, 0);
  auto picks = config.with_replacement
                   ? subsample_with_replacement(train_rows.size(), config.sample_fraction, seed)
                   : subsample_without_replacement(train_rows.size(), config.sample_fraction, seed);
  // Tiny training sets can round to an empty draw; keep one row so the tree exists.
  if (picks.empty()) picks.push_back(static_cast<std::size_t>(Rng(seed).below(train_rows.size())));
  std::vector<RowIndex> rows;
  rows.reserve(picks.size());
  for (auto i : picks) rows.push_back(train_rows[i]);
  return rows;
}

}  // namespace detail

// Fits config.n_trees trees, tree t on its own draw from train_rows. Draw and
// per-node feature seeds are mix_seed(seed, t, 0) and mix_seed(seed, t, 1), so
// the result does not depend on `workers`.
inline Forest fit_forest(const Dataset& data, std::span<const RowIndex> train_rows, const ForestConfig& config,
                         unsigned workers = 1) {
  if (train_rows.empty()) throw InputError("cannot fit a forest on zero rows");
  if (config.n_trees < 1) throw ConfigError("a forest needs at least one tree");
  if (!(config.sample_fraction > 0.0 && config.sample_fraction <= 1.0))
    throw ConfigError("sample fraction must lie in (0, 1]");
  const std::size_t m = data.n_features();
  const std::size_t p = resolved_features_per_node(config, m);
  if (p < 1 || p > m) throw ConfigError("features per node must lie in [1, " + std::to_string(m) + "]");

  Forest forest;
  forest.config = config;
  if (config.feature_mode == FeatureMode::per_node_random) forest.config.features_per_node = p;
  forest.schema = data.schema();
  forest.trees.resize(config.n_trees);
  forest.row_sets.resize(config.n_trees);

  auto fit_one = [&](std::size_t t) {
    forest.row_sets[t] = detail::draw_rows(train_rows, config, t);
    TreeConfig tc;
    tc.beta = config.beta;
    if (p < m) tc.features_per_node = p;
    tc.seed = mix_seed(config.seed, t, 1);
    forest.trees[t] = fit_tree(data, forest.row_sets[t], tc);
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(config.n_trees)));
  if (workers == 1) {
    for (std::size_t t = 0; t < config.n_trees; ++t) fit_one(t);
    return forest;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t t = next++; t < config.n_trees; t = next++) fit_one(t);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return forest;
}

struct EvaluationReport {
  std::size_t n_rows = 0;
  double overall_accuracy = 0.0;
  std::vector<double> per_class_accuracy;            // NaN for classes absent from the rows
  std::vector<std::vector<std::size_t>> confusion;   // [actual][predicted]
};

// Scores any classifier `predict(row) -> ClassIndex` on the given rows.
template <typename Predict>
EvaluationReport evaluate(Predict&& predict, const Dataset& data, std::span<const RowIndex> rows) {
  if (rows.empty()) throw InputError("cannot evaluate on zero rows");
  const std::size_t k = data.n_classes();
  EvaluationReport report;
  report.n_rows = rows.size();
  report.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (RowIndex r : rows) {
    const ClassIndex predicted = predict(data.row(r));
    if (predicted >= k) throw InputError("classifier predicted an unknown class");
    ++report.confusion[data.label(r)][predicted];
  }
  std::size_t correct = 0;
  report.per_class_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t actual = 0;
    for (auto v : report.confusion[c]) actual += v;
    correct += report.confusion[c][c];
    report.per_class_accuracy[c] = actual ? double(report.confusion[c][c]) / double(actual)
                                          : std::numeric_limits<double>::quiet_NaN();
  }
  report.overall_accuracy = double(correct) / double(rows.size());
  return report;
}

inline EvaluationReport evaluate(const Forest& forest, const Dataset& data, std::span<const RowIndex> rows) {
  return evaluate([&](std::span<const double> x) { return forest.predict(x); }, data, rows);
}

// ---- persistence ---------------------------------------------------------

inline const char* to_string(FeatureKind kind) {
  return kind == FeatureKind::continuous ? "continuous" : "categorical";
}

inline void write_schema(std::ostream& out, const Schema& schema) {
  out << "n_features = " << schema.feature_names.size() << '\n';
  for (std::size_t j = 0; j < schema.feature_names.size(); ++j)
    out << "feature " << j << ' ' << to_string(schema.kinds[j]) << ' ' << schema.feature_names[j] << '\n';
  out << "n_classes = " << schema.class_names.size() << '\n';
  for (std::size_t c = 0; c < schema.class_names.size(); ++c)
    out << "class " << c << ' ' << schema.class_names[c] << '\n';
}

namespace detail {

inline std::string expect_line(std::istream& in) {
  std::string line;
  while (text::next_line(in, line))
    if (!text::trim(line).empty()) return line;
  throw SchemaError("model file ended early");
}

inline std::string expect_key(std::istream& in, std::string_view key) {
  const auto line = expect_line(in);
  const auto eq = line.find('=');
  if (eq == std::string::npos || text::trim(std::string_view(line).substr(0, eq)) != key)
    throw SchemaError("expected '" + std::string(key) + " = ...', got '" + line + "'");
  return std::string(text::trim(std::string_view(line).substr(eq + 1)));
}

template <typename Int>
Int expect_int(std::istream& in, std::string_view key) {
  auto v = text::parse_int<Int>(expect_key(in, key));
  if (!v) throw SchemaError("bad integer for '" + std::string(key) + "'");
  return *v;
}

inline double expect_double(std::istream& in, std::string_view key) {
  auto v = text::parse_double(expect_key(in, key));
  if (!v) throw SchemaError("bad number for '" + std::string(key) + "'");
  return *v;
}

// "<tag> <index> <rest>" with index checked against `expected`.
inline std::string expect_indexed(std::istream& in, std::string_view tag, std::size_t expected) {
  const auto line = expect_line(in);
  const std::string prefix = std::string(tag) + " " + std::to_string(expected) + " ";
  if (line.rfind(prefix, 0) != 0) throw SchemaError("expected '" + prefix + "...', got '" + line + "'");
  return line.substr(prefix.size());
}

}  // namespace detail

inline Schema read_schema(std::istream& in) {
  Schema schema;
  const auto m = detail::expect_int<std::size_t>(in, "n_features");
  for (std::size_t j = 0; j < m; ++j) {
    const auto rest = detail::expect_indexed(in, "feature", j);
    const auto space = rest.find(' ');
    const auto kind = rest.substr(0, space);
    if (kind == "continuous")
      schema.kinds.push_back(FeatureKind::continuous);
    else if (kind == "categorical")
      schema.kinds.push_back(FeatureKind::categorical);
    else
      throw SchemaError("unknown feature kind '" + kind + "'");
    schema.feature_names.push_back(space == std::string::npos ? "" : rest.substr(space + 1));
  }
  const auto k = detail::expect_int<std::size_t>(in, "n_classes");
  for (std::size_t c = 0; c < k; ++c) schema.class_names.push_back(detail::expect_indexed(in, "class", c));
  return schema;
}

inline constexpr std::string_view kForestMagic = "gradeforest-model forest v1";

inline void write_forest(std::ostream& out, const Forest& forest) {
  const auto& c = forest.config;
  out << kForestMagic << '\n';
  out << "preset = " << c.name << '\n';
  out << "seed = " << c.seed << '\n';
  out << "n_trees = " << forest.trees.size() << '\n';
  out << "sample_fraction = " << text::format_double(c.sample_fraction) << '\n';
  out << "with_replacement = " << (c.with_replacement ? "true" : "false") << '\n';
  out << "feature_mode = " << (c.feature_mode == FeatureMode::all ? "all" : "per_node_random") << '\n';
  out << "features_per_node = " << resolved_features_per_node(c, forest.schema.feature_names.size()) << '\n';
  out << "beta = " << c.beta << '\n';
  write_schema(out, forest.schema);
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    out << "tree " << t << '\n';
    write_tree(out, forest.trees[t], forest.schema.feature_names, forest.schema.class_names);
  }
}

// Reads the body after the magic line.
inline Forest read_forest_body(std::istream& in) {
  Forest forest;
  auto& c = forest.config;
  c.name = detail::expect_key(in, "preset");
  c.seed = detail::expect_int<std::uint64_t>(in, "seed");
  c.n_trees = detail::expect_int<std::size_t>(in, "n_trees");
  c.sample_fraction = detail::expect_double(in, "sample_fraction");
  c.with_replacement = detail::expect_key(in, "with_replacement") == "true";
  const auto mode = detail::expect_key(in, "feature_mode");
  c.feature_mode = mode == "all" ? FeatureMode::all : FeatureMode::per_node_random;
  const auto p = detail::expect_int<std::size_t>(in, "features_per_node");
  if (c.feature_mode == FeatureMode::per_node_random) c.features_per_node = p;
  c.beta = detail::expect_int<std::size_t>(in, "beta");
  forest.schema = read_schema(in);
  for (std::size_t t = 0; t < c.n_trees; ++t) {
    if (detail::expect_line(in) != "tree " + std::to_string(t)) throw SchemaError("expected tree " + std::to_string(t));
    forest.trees.push_back(read_tree(in, forest.schema.kinds, forest.schema.class_names.size()));
  }
  return forest;
}

inline Forest read_forest(std::istream& in) {
  if (text::trim(detail::expect_line(in)) != kForestMagic) throw SchemaError("not a forest model file");
  return read_forest_body(in);
}

}  // namespace gradeforest
