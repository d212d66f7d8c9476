#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gradeforest/dataset.hpp"
#include "gradeforest/errors.hpp"
#include "gradeforest/forest.hpp"
#include "gradeforest/random.hpp"
#include "gradeforest/text.hpp"

namespace gradeforest {

enum class ImportanceMethod { permutation, gini };

struct ImportanceReport {
  ImportanceMethod method = ImportanceMethod::permutation;
  std::vector<std::vector<double>> per_tree;  // [tree][feature]
  std::vector<double> mean;                   // column means of per_tree
  // Permutation only: standard error of each mean with respect to the test
  // rows, sd(d_i) / sqrt(n), where d_i is row i's accuracy loss averaged over
  // trees and repetitions. standard_error() below ignores that every tree is
  // scored on the same rows and the same shuffle.
  std::vector<double> row_standard_error;
  std::vector<std::string> feature_names;
  std::uint64_t permutation_seed = 0;
  std::size_t repetitions = 0;

  std::size_t n_trees() const { return per_tree.size(); }
  std::size_t n_features() const { return feature_names.size(); }

  std::vector<double> column(std::size_t feature) const {
    std::vector<double> out;
    out.reserve(per_tree.size());
    for (const auto& row : per_tree) out.push_back(row[feature]);
    return out;
  }

  // Standard error of each mean across trees.
  std::vector<double> standard_error() const {
    std::vector<double> out(n_features(), 0.0);
    const double t = static_cast<double>(n_trees());
    if (n_trees() < 2) return out;
    for (std::size_t j = 0; j < n_features(); ++j) {
      double ss = 0.0;
      for (const auto& row : per_tree) ss += (row[j] - mean[j]) * (row[j] - mean[j]);
      out[j] = std::sqrt(ss / (t - 1.0)) / std::sqrt(t);
    }
    return out;
  }
};

namespace detail {

inline std::vector<double> column_means(const std::vector<std::vector<double>>& per_tree, std::size_t m) {
  std::vector<double> mean(m, 0.0);
  for (const auto& row : per_tree)
    for (std::size_t j = 0; j < m; ++j) mean[j] += row[j];
  if (!per_tree.empty())
    for (auto& v : mean) v /= static_cast<double>(per_tree.size());
  return mean;
}

inline bool tree_uses(const Tree& tree, std::size_t feature) {
  return std::any_of(tree.nodes().begin(), tree.nodes().end(),
                     [&](const TreeNode& n) { return !n.is_leaf() && n.split->feature == feature; });
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

// Accuracy drop of each tree on `test_rows` when predictor j is shuffled
// across those rows. One seeded shuffle per (predictor, repetition) is shared
// by every tree; decreases are averaged over `repetitions`. Negative values
// are kept.
inline ImportanceReport permutation_importance(const Forest& forest, const Dataset& data,
                                               std::span<const RowIndex> test_rows, std::uint64_t seed,
                                               std::size_t repetitions = 1, unsigned workers = 1) {
  if (test_rows.empty()) throw InputError("permutation importance needs a nonempty test set");
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (data.schema().feature_names != forest.schema.feature_names)
    throw InputError("dataset columns do not match the forest's features");
  const std::size_t m = data.n_features();
  const std::size_t n = test_rows.size();
  const std::size_t n_trees = forest.trees.size();

  ImportanceReport report;
  report.method = ImportanceMethod::permutation;
  report.feature_names = data.feature_names();
  report.permutation_seed = seed;
  report.repetitions = repetitions;
  report.per_tree.assign(n_trees, std::vector<double>(m, 0.0));
  report.row_standard_error.assign(m, 0.0);

  detail::parallel_for(m, workers, [&](std::size_t j) {
    std::vector<std::size_t> users;
    for (std::size_t t = 0; t < n_trees; ++t)
      if (detail::tree_uses(forest.trees[t], j)) users.push_back(t);
    if (users.empty()) return;
    std::vector<double> buffer(m);
    std::vector<std::int64_t> lost(n_trees, 0);
    std::vector<std::int64_t> row_lost(n, 0);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(mix_seed(seed, j, rep));
      rng.shuffle(std::span<std::size_t>(perm));
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = data.row(test_rows[i]);
        std::copy(row.begin(), row.end(), buffer.begin());
        buffer[j] = data.value(test_rows[perm[i]], j);
        const ClassIndex truth = data.label(test_rows[i]);
        for (std::size_t t : users) {
          const bool before = forest.trees[t].predict(row) == truth;
          const bool after = forest.trees[t].predict(buffer) == truth;
          const std::int64_t d = static_cast<std::int64_t>(before) - static_cast<std::int64_t>(after);
          lost[t] += d;
          row_lost[i] += d;
        }
      }
    }
    for (std::size_t t : users)
      report.per_tree[t][j] = static_cast<double>(lost[t]) / static_cast<double>(n * repetitions);
    if (n > 1) {
      const double scale = static_cast<double>(n_trees * repetitions);
      double mu = 0.0;
      for (auto v : row_lost) mu += static_cast<double>(v) / scale;
      mu /= static_cast<double>(n);
      double ss = 0.0;
      for (auto v : row_lost) ss += std::pow(static_cast<double>(v) / scale - mu, 2);
      report.row_standard_error[j] = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    }
  });
  report.mean = detail::column_means(report.per_tree, m);
  return report;
}

// Total weighted Gini decrease per predictor in each tree, averaged over trees.
inline ImportanceReport gini_importance(const Forest& forest) {
  ImportanceReport report;
  report.method = ImportanceMethod::gini;
  report.feature_names = forest.schema.feature_names;
  for (const auto& tree : forest.trees) report.per_tree.push_back(tree_gini_decreases(tree));
  report.mean = detail::column_means(report.per_tree, report.feature_names.size());
  return report;
}

// Predictors of different types bias Gini importance toward those with more
// split points. True when declared kinds differ, or when two-valued columns
// sit next to columns with more distinct values.
inline bool mixed_feature_types(const Dataset& data) {
  bool has_categorical = false, has_continuous = false, has_binary = false, has_many = false;
  for (std::size_t j = 0; j < data.n_features(); ++j) {
    if (data.kind(j) == FeatureKind::categorical) {
      has_categorical = true;
      continue;
    }
    has_continuous = true;
    std::set<double> distinct;
    for (RowIndex i = 0; i < data.n_rows() && distinct.size() <= 2; ++i) distinct.insert(data.value(i, j));
    if (distinct.size() == 2) has_binary = true;
    if (distinct.size() > 2) has_many = true;
  }
  return (has_categorical && has_continuous) || (has_binary && has_many);
}

// Linear-interpolation quantile (the "type 7" rule) of sorted values.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct RankedFeature {
  std::size_t index = 0;
  std::string name;
  double mean = 0.0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// The k largest means, descending, ties by feature index, with boxplot
// statistics of each feature's per-tree values.
inline std::vector<RankedFeature> top_k(const ImportanceReport& report, std::size_t k) {
  const std::size_t m = report.n_features();
  if (k < 1 || k > m) throw ConfigError("top-k must lie in [1, " + std::to_string(m) + "]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.mean[a] > report.mean[b]; });
  std::vector<RankedFeature> out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = order[i];
    auto col = report.column(j);
    std::sort(col.begin(), col.end());
    RankedFeature f;
    f.index = j;
    f.name = report.feature_names[j];
    f.mean = report.mean[j];
    f.min = quantile_sorted(col, 0.0);
    f.q1 = quantile_sorted(col, 0.25);
    f.median = quantile_sorted(col, 0.5);
    f.q3 = quantile_sorted(col, 0.75);
    f.max = quantile_sorted(col, 1.0);
    out.push_back(std::move(f));
  }
  return out;
}

inline void write_importance_csv(std::ostream& out, const std::vector<RankedFeature>& ranked) {
  out << "feature,mean,min,q1,median,q3,max\n";
  for (const auto& f : ranked) {
    out << text::csv_escape(f.name) << ',' << text::format_double(f.mean) << ',' << text::format_double(f.min)
        << ',' << text::format_double(f.q1) << ',' << text::format_double(f.median) << ','
        << text::format_double(f.q3) << ',' << text::format_double(f.max) << '\n';
  }
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace detail

// Horizontal boxplots, most important feature on top. Whiskers span min..max.
inline void write_importance_svg(std::ostream& out, const std::vector<RankedFeature>& ranked,
                                 std::string_view title) {
  const double width = 720, label_w = 140, right_pad = 30, top = 50, row_h = 26, bottom = 50;
  const double height = top + row_h * static_cast<double>(ranked.size()) + bottom;
  double lo = 0.0, hi = 0.0;
  for (const auto& f : ranked) {
    lo = std::min(lo, f.min);
    hi = std::max(hi, f.max);
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;
  const double plot_w = width - label_w - right_pad;
  auto x = [&](double v) { return label_w + (v - lo) / (hi - lo) * plot_w; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::xml_escape(title) << "</text>\n";
  const double axis_y = top + row_h * static_cast<double>(ranked.size()) + 8;
  out << "<line x1=\"" << label_w << "\" y1=\"" << axis_y << "\" x2=\"" << label_w + plot_w << "\" y2=\""
      << axis_y << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    out << "<line x1=\"" << detail::fixed(x(v)) << "\" y1=\"" << axis_y << "\" x2=\"" << detail::fixed(x(v))
        << "\" y2=\"" << axis_y + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << detail::fixed(x(v)) << "\" y=\"" << axis_y + 18 << "\" text-anchor=\"middle\">"
        << detail::fixed(v, 4) << "</text>\n";
  }
  if (lo < 0.0)
    out << "<line x1=\"" << detail::fixed(x(0)) << "\" y1=\"" << top << "\" x2=\"" << detail::fixed(x(0))
        << "\" y2=\"" << axis_y << "\" stroke=\"grey\" stroke-dasharray=\"4,3\"/>\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& f = ranked[i];
    const double cy = top + row_h * (static_cast<double>(i) + 0.5);
    const double box_h = row_h * 0.6;
    out << "<text x=\"" << label_w - 8 << "\" y=\"" << detail::fixed(cy + 4) << "\" text-anchor=\"end\">"
        << detail::xml_escape(f.name) << "</text>\n";
    out << "<line x1=\"" << detail::fixed(x(f.min)) << "\" y1=\"" << detail::fixed(cy) << "\" x2=\""
        << detail::fixed(x(f.max)) << "\" y2=\"" << detail::fixed(cy) << "\" stroke=\"black\"/>\n";
    out << "<rect x=\"" << detail::fixed(x(f.q1)) << "\" y=\"" << detail::fixed(cy - box_h / 2) << "\" width=\""
        << detail::fixed(std::max(0.5, x(f.q3) - x(f.q1))) << "\" height=\"" << detail::fixed(box_h)
        << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << detail::fixed(x(f.median)) << "\" y1=\"" << detail::fixed(cy - box_h / 2)
        << "\" x2=\"" << detail::fixed(x(f.median)) << "\" y2=\"" << detail::fixed(cy + box_h / 2)
        << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    out << "<circle cx=\"" << detail::fixed(x(f.mean)) << "\" cy=\"" << detail::fixed(cy)
        << "\" r=\"3\" fill=\"red\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace gradeforest
