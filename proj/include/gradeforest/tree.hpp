#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradeforest/dataset.hpp"
#include "gradeforest/errors.hpp"
#include "gradeforest/random.hpp"
#include "gradeforest/text.hpp"

namespace gradeforest {

// Largest number of distinct categories a node may hold for a categorical
// predictor; the subset search visits 2^(q-1) - 1 partitions.
inline constexpr std::size_t kMaxCategories = 12;

// Gini index sum_k p_k (1 - p_k) of a region with the given class counts.
inline double gini(std::span<const std::size_t> counts) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) throw InputError("gini of an empty region is undefined");
  double q = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    q += p * (1.0 - p);
  }
  return q;
}

// Routes X_j <= threshold (continuous) or X_j in left_categories (categorical)
// to the left child.
struct SplitCondition {
  std::size_t feature = 0;
  FeatureKind kind = FeatureKind::continuous;
  double threshold = 0.0;
  std::vector<int> left_categories;  // sorted, categorical only

  bool goes_left(double value) const {
    if (kind == FeatureKind::continuous) return value <= threshold;
    const int code = static_cast<int>(std::lround(value));
    return std::binary_search(left_categories.begin(), left_categories.end(), code);
  }

  bool operator==(const SplitCondition&) const = default;
};

struct SplitCandidate {
  SplitCondition condition;
  double total_impurity = 0.0;  // n1 * Q1 + n2 * Q2
};

struct TreeNode {
  std::size_t n_node = 0;
  // Internal nodes.
  std::optional<SplitCondition> split;
  std::size_t left = 0;
  std::size_t right = 0;
  double impurity_decrease = 0.0;
  // Leaves.
  std::vector<double> proportions;
  ClassIndex majority = 0;

  bool is_leaf() const { return !split.has_value(); }
  bool operator==(const TreeNode&) const = default;
};

struct TreeConfig {
  std::size_t beta = 1;                             // nodes with n <= beta become leaves
  std::optional<std::size_t> features_per_node;     // nullopt: every feature
  std::uint64_t seed = 0;
};

// A fitted classification tree. nodes()[0] is the root.
class Tree {
 public:
  Tree() = default;
  Tree(std::vector<TreeNode> nodes, std::size_t n_features, std::size_t n_classes)
      : nodes_(std::move(nodes)), n_features_(n_features), n_classes_(n_classes) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_classes() const { return n_classes_; }

  std::size_t leaf_index(std::span<const double> x) const {
    if (x.size() != n_features_)
      throw InputError("input has " + std::to_string(x.size()) + " values, tree expects " +
                       std::to_string(n_features_));
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& s = *nodes_[i].split;
      i = s.goes_left(x[s.feature]) ? nodes_[i].left : nodes_[i].right;
    }
    return i;
  }

  ClassIndex predict(std::span<const double> x) const { return nodes_[leaf_index(x)].majority; }

  bool operator==(const Tree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t n_features_ = 0;
  std::size_t n_classes_ = 0;
};

inline ClassIndex predict_tree(const Tree& tree, std::span<const double> x) { return tree.predict(x); }

namespace detail {

using Wide = unsigned __int128;

// sum_k c_k^2 / n for one child, kept as an exact fraction. The weighted child
// impurity n1 Q1 + n2 Q2 equals n - (S1/n1 + S2/n2), so maximizing the score
// minimizes total impurity.
struct Score {
  Wide num = 0;
  Wide den = 1;

  static Score of(std::uint64_t s_left, std::uint64_t n_left, std::uint64_t s_right, std::uint64_t n_right) {
    return {Wide(s_left) * n_right + Wide(s_right) * n_left, Wide(n_left) * n_right};
  }
  bool operator>(const Score& o) const { return num * o.den > o.num * den; }
  bool operator==(const Score& o) const { return num * o.den == o.num * den; }
};

inline std::uint64_t sum_squares(std::span<const std::size_t> counts) {
  std::uint64_t s = 0;
  for (auto c : counts) s += std::uint64_t(c) * c;
  return s;
}

inline double total_impurity(std::uint64_t s_left, std::uint64_t n_left, std::uint64_t s_right,
                             std::uint64_t n_right) {
  return (double(n_left) - double(s_left) / double(n_left)) +
         (double(n_right) - double(s_right) / double(n_right));
}

struct BestSplit {
  SplitCandidate candidate;
  Score score;
};

inline void consider(std::optional<BestSplit>& best, BestSplit next) {
  if (!best || next.score > best->score) {
    best = std::move(next);
    return;
  }
  // Exact ties: earlier features and smaller thresholds were visited first and
  // already won; only categorical subsets of one feature need the explicit
  // lexicographic rule.
  if (next.score == best->score && next.candidate.condition.feature == best->candidate.condition.feature &&
      next.candidate.condition.kind == FeatureKind::categorical &&
      next.candidate.condition.left_categories < best->candidate.condition.left_categories) {
    best = std::move(next);
  }
}

inline void scan_continuous(const Dataset& data, std::span<const RowIndex> rows, std::size_t feature,
                            std::span<const std::size_t> parent_counts, std::optional<BestSplit>& best) {
  std::vector<std::pair<double, ClassIndex>> items;
  items.reserve(rows.size());
  for (RowIndex r : rows) items.emplace_back(data.value(r, feature), data.label(r));
  std::sort(items.begin(), items.end());

  std::vector<std::size_t> left(parent_counts.size(), 0);
  std::vector<std::size_t> right(parent_counts.begin(), parent_counts.end());
  std::uint64_t s_left = 0;
  std::uint64_t s_right = sum_squares(parent_counts);
  const std::uint64_t n = items.size();
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    const ClassIndex c = items[i].second;
    s_left += 2 * left[c] + 1;
    s_right -= 2 * right[c] - 1;
    ++left[c];
    --right[c];
    const double lo = items[i].first;
    const double hi = items[i + 1].first;
    if (!(lo < hi)) continue;
    double threshold = lo + (hi - lo) / 2.0;
    if (!(threshold < hi)) threshold = lo;
    const std::uint64_t n_left = i + 1;
    const std::uint64_t n_right = n - n_left;
    BestSplit cand{{SplitCondition{feature, FeatureKind::continuous, threshold, {}},
                    total_impurity(s_left, n_left, s_right, n_right)},
                   Score::of(s_left, n_left, s_right, n_right)};
    consider(best, std::move(cand));
  }
}

inline void scan_categorical(const Dataset& data, std::span<const RowIndex> rows, std::size_t feature,
                             std::size_t n_classes, std::optional<BestSplit>& best) {
  std::vector<std::pair<int, std::vector<std::size_t>>> by_category;
  for (RowIndex r : rows) {
    const int code = static_cast<int>(std::lround(data.value(r, feature)));
    auto it = std::lower_bound(by_category.begin(), by_category.end(), code,
                               [](const auto& e, int v) { return e.first < v; });
    if (it == by_category.end() || it->first != code)
      it = by_category.insert(it, {code, std::vector<std::size_t>(n_classes, 0)});
    ++it->second[data.label(r)];
  }
  const std::size_t q = by_category.size();
  if (q < 2) return;
  if (q > kMaxCategories)
    throw InputError("categorical feature '" + data.feature_names()[feature] + "' has " + std::to_string(q) +
                     " categories in one node; at most " + std::to_string(kMaxCategories) + " are supported");

  // The lowest present category always sits on the left, so each unordered
  // partition is visited once: 2^(q-1) - 1 proper subsets.
  const std::uint32_t n_masks = (std::uint32_t{1} << (q - 1)) - 1;
  for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
    std::vector<std::size_t> left = by_category[0].second;
    std::vector<std::size_t> right(n_classes, 0);
    std::vector<int> cats{by_category[0].first};
    for (std::size_t b = 1; b < q; ++b) {
      auto& target = (mask >> (b - 1)) & 1u ? left : right;
      for (std::size_t k = 0; k < n_classes; ++k) target[k] += by_category[b].second[k];
      if ((mask >> (b - 1)) & 1u) cats.push_back(by_category[b].first);
    }
    std::uint64_t n_left = 0;
    std::uint64_t n_right = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      n_left += left[k];
      n_right += right[k];
    }
    const auto s_left = sum_squares(left);
    const auto s_right = sum_squares(right);
    BestSplit cand{{SplitCondition{feature, FeatureKind::categorical, 0.0, std::move(cats)},
                    total_impurity(s_left, n_left, s_right, n_right)},
                   Score::of(s_left, n_left, s_right, n_right)};
    consider(best, std::move(cand));
  }
}

inline std::optional<BestSplit> find_best_split(const Dataset& data, std::span<const RowIndex> rows,
                                                std::span<const std::size_t> candidate_features,
                                                std::span<const std::size_t> parent_counts) {
  std::optional<BestSplit> best;
  if (rows.size() < 2) return best;
  std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());
  for (std::size_t j : features) {
    if (data.kind(j) == FeatureKind::continuous)
      scan_continuous(data, rows, j, parent_counts, best);
    else
      scan_categorical(data, rows, j, data.n_classes(), best);
  }
  return best;
}

// Renumbers nodes so that indices follow a pre-order walk from the root.
inline std::vector<TreeNode> preorder(std::vector<TreeNode> nodes) {
  std::vector<TreeNode> out;
  out.reserve(nodes.size());
  struct Item {
    std::size_t old_index, parent;
    bool left;
  };
  std::vector<Item> stack{{0, 0, false}};
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    const std::size_t index = out.size();
    if (index > 0) (item.left ? out[item.parent].left : out[item.parent].right) = index;
    out.push_back(std::move(nodes[item.old_index]));
    if (!out.back().is_leaf()) {
      stack.push_back({out.back().right, index, false});
      stack.push_back({out.back().left, index, true});
    }
  }
  return out;
}

inline ClassIndex majority_of(std::span<const std::size_t> counts) {
  ClassIndex best = 0;
  for (ClassIndex k = 1; k < counts.size(); ++k)
    if (counts[k] > counts[best]) best = k;
  return best;
}

}  // namespace detail

// Best split of `rows` over `candidate_features`, minimizing n1 Q1 + n2 Q2.
// Continuous thresholds sit at midpoints between consecutive distinct values.
// Ties go to the lowest feature index, then the smallest threshold or the
// lexicographically smallest left category set. Returns nullopt when every
// candidate feature is constant on `rows`.
inline std::optional<SplitCandidate> best_split(const Dataset& data, std::span<const RowIndex> rows,
                                                std::span<const std::size_t> candidate_features) {
  const auto counts = class_counts(data, rows);
  auto best = detail::find_best_split(data, rows, candidate_features, counts);
  if (!best) return std::nullopt;
  return std::move(best->candidate);
}

// Grows an unpruned tree on `rows`. A node becomes a leaf when n <= beta, when
// it is pure, or when no split strictly lowers the weighted impurity. With
// features_per_node = p < m, each node searches a fresh random p-subset.
inline Tree fit_tree(const Dataset& data, std::span<const RowIndex> rows, const TreeConfig& config) {
  if (rows.empty()) throw InputError("cannot fit a tree on zero rows");
  if (config.beta < 1) throw ConfigError("beta must be at least 1");
  const std::size_t m = data.n_features();
  const std::size_t k = data.n_classes();
  std::size_t p = m;
  if (config.features_per_node) {
    p = *config.features_per_node;
    if (p < 1 || p > m) throw ConfigError("features per node must lie in [1, " + std::to_string(m) + "]");
  }

  std::vector<RowIndex> work(rows.begin(), rows.end());
  std::vector<std::size_t> all_features(m);
  for (std::size_t j = 0; j < m; ++j) all_features[j] = j;
  Rng rng(config.seed);

  struct Task {
    std::size_t begin, end, node;
  };
  std::vector<TreeNode> nodes(1);
  std::vector<Task> stack{{0, work.size(), 0}};

  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    std::span<RowIndex> span(work.data() + task.begin, task.end - task.begin);
    const auto counts = class_counts(data, span);
    const std::size_t n = span.size();

    auto make_leaf = [&] {
      TreeNode& node = nodes[task.node];
      node.n_node = n;
      node.proportions.resize(k);
      for (std::size_t c = 0; c < k; ++c) node.proportions[c] = double(counts[c]) / double(n);
      node.majority = detail::majority_of(counts);
    };

    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (n <= config.beta || pure) {
      make_leaf();
      continue;
    }

    std::vector<std::size_t> candidates;
    if (p == m) {
      candidates = all_features;
    } else {
      candidates = all_features;
      for (std::size_t i = 0; i < p; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(m - i));
        std::swap(candidates[i], candidates[j]);
      }
      candidates.resize(p);
      std::sort(candidates.begin(), candidates.end());
    }

    auto best = detail::find_best_split(data, span, candidates, counts);
    const std::uint64_t s_parent = detail::sum_squares(counts);
    // Strict gain: S1/n1 + S2/n2 > S/n.
    if (!best || !(best->score > detail::Score{detail::Wide(s_parent), detail::Wide(n)})) {
      make_leaf();
      continue;
    }

    const auto& cond = best->candidate.condition;
    auto mid = std::stable_partition(span.begin(), span.end(),
                                     [&](RowIndex r) { return cond.goes_left(data.value(r, cond.feature)); });
    const std::size_t n_left = static_cast<std::size_t>(mid - span.begin());
    const std::size_t left_index = nodes.size();
    nodes.resize(nodes.size() + 2);
    TreeNode& node = nodes[task.node];
    node.n_node = n;
    node.split = cond;
    node.left = left_index;
    node.right = left_index + 1;
    const double parent_total = double(n) - double(s_parent) / double(n);
    node.impurity_decrease = std::max(0.0, parent_total - best->candidate.total_impurity);
    stack.push_back({task.begin + n_left, task.end, left_index + 1});
    stack.push_back({task.begin, task.begin + n_left, left_index});
  }
  return Tree(detail::preorder(std::move(nodes)), m, k);
}

// Per-feature sum of n * Q_parent - (n1 Q1 + n2 Q2) over the tree's splits.
inline std::vector<double> tree_gini_decreases(const Tree& tree) {
  std::vector<double> out(tree.n_features(), 0.0);
  for (const auto& node : tree.nodes())
    if (!node.is_leaf()) out[node.split->feature] += node.impurity_decrease;
  return out;
}

// Text form, one node per line in pre-order, children indented two spaces:
//   split n=4 decrease=2 feature=0 threshold=2.5 name=<feature name>
//   split n=9 decrease=1 feature=3 categories=0;2 name=<feature name>
//   leaf n=2 majority=0 proportions=1,0 label=<class name>
// Numbers use the shortest round-trip decimal form.
inline void write_tree(std::ostream& out, const Tree& tree, const std::vector<std::string>& feature_names,
                       const std::vector<std::string>& class_names) {
  struct Item {
    std::size_t node, depth;
  };
  std::vector<Item> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, depth] = stack.back();
    stack.pop_back();
    const auto& node = tree.nodes()[i];
    out << std::string(depth * 2, ' ');
    if (node.is_leaf()) {
      out << "leaf n=" << node.n_node << " majority=" << node.majority << " proportions=";
      for (std::size_t c = 0; c < node.proportions.size(); ++c)
        out << (c ? "," : "") << text::format_double(node.proportions[c]);
      out << " label=" << class_names.at(node.majority) << '\n';
      continue;
    }
    const auto& s = *node.split;
    out << "split n=" << node.n_node << " decrease=" << text::format_double(node.impurity_decrease)
        << " feature=" << s.feature;
    if (s.kind == FeatureKind::continuous) {
      out << " threshold=" << text::format_double(s.threshold);
    } else {
      out << " categories=";
      for (std::size_t c = 0; c < s.left_categories.size(); ++c) out << (c ? ";" : "") << s.left_categories[c];
    }
    out << " name=" << feature_names.at(s.feature) << '\n';
    stack.push_back({node.right, depth + 1});
    stack.push_back({node.left, depth + 1});
  }
}

namespace detail {

struct NodeLine {
  bool leaf = false;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : fields)
      if (k == key) return v;
    throw SchemaError("tree node line lacks '" + key + "'");
  }
};

inline NodeLine parse_node_line(std::string_view line) {
  line = text::trim(line);
  NodeLine out;
  const auto space = line.find(' ');
  const auto kind = line.substr(0, space);
  if (kind == "leaf")
    out.leaf = true;
  else if (kind != "split")
    throw SchemaError("expected 'split' or 'leaf', got '" + std::string(kind) + "'");
  std::string_view rest = space == std::string_view::npos ? std::string_view{} : line.substr(space + 1);
  while (!rest.empty()) {
    const auto eq = rest.find('=');
    if (eq == std::string_view::npos) throw SchemaError("malformed tree node field");
    std::string key(rest.substr(0, eq));
    rest.remove_prefix(eq + 1);
    if (key == "name" || key == "label") {
      out.fields.emplace_back(std::move(key), std::string(rest));
      break;
    }
    const auto next = rest.find(' ');
    out.fields.emplace_back(std::move(key), std::string(rest.substr(0, next)));
    rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next + 1);
  }
  return out;
}

template <typename T>
T parse_or_throw(const std::string& s) {
  if constexpr (std::is_floating_point_v<T>) {
    auto v = text::parse_double(s);
    if (!v) throw SchemaError("bad number '" + s + "' in tree");
    return *v;
  } else {
    auto v = text::parse_int<T>(s);
    if (!v) throw SchemaError("bad integer '" + s + "' in tree");
    return *v;
  }
}

}  // namespace detail

// Reads one tree written by write_tree. `kinds` gives the feature schema.
inline Tree read_tree(std::istream& in, const std::vector<FeatureKind>& kinds, std::size_t n_classes) {
  std::vector<TreeNode> nodes;
  // Pre-order: each split reserves slots for its two children as they appear.
  struct Pending {
    std::size_t parent;
    bool left;
  };
  std::vector<Pending> pending;
  std::size_t remaining = 1;
  std::string line;
  while (remaining > 0) {
    if (!text::next_line(in, line)) throw SchemaError("tree ended early");
    if (text::trim(line).empty()) continue;
    const auto parsed = detail::parse_node_line(line);
    const std::size_t index = nodes.size();
    nodes.emplace_back();
    if (!pending.empty()) {
      const auto p = pending.back();
      pending.pop_back();
      (p.left ? nodes[p.parent].left : nodes[p.parent].right) = index;
    }
    --remaining;
    TreeNode& node = nodes.back();
    node.n_node = detail::parse_or_throw<std::size_t>(parsed.get("n"));
    if (parsed.leaf) {
      node.majority = detail::parse_or_throw<std::size_t>(parsed.get("majority"));
      for (const auto& p : text::split(parsed.get("proportions"), ','))
        node.proportions.push_back(detail::parse_or_throw<double>(p));
      if (node.proportions.size() != n_classes || node.majority >= n_classes)
        throw SchemaError("leaf does not match the class count");
      continue;
    }
    SplitCondition cond;
    cond.feature = detail::parse_or_throw<std::size_t>(parsed.get("feature"));
    if (cond.feature >= kinds.size()) throw SchemaError("split feature index out of range");
    cond.kind = kinds[cond.feature];
    if (cond.kind == FeatureKind::continuous) {
      cond.threshold = detail::parse_or_throw<double>(parsed.get("threshold"));
    } else {
      for (const auto& c : text::split(parsed.get("categories"), ';'))
        cond.left_categories.push_back(detail::parse_or_throw<int>(c));
    }
    node.split = std::move(cond);
    node.impurity_decrease = detail::parse_or_throw<double>(parsed.get("decrease"));
    pending.push_back({index, false});
    pending.push_back({index, true});
    remaining += 2;
  }
  return Tree(std::move(nodes), kinds.size(), n_classes);
}

}  // namespace gradeforest
