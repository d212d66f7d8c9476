#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "gradeforest/errors.hpp"
#include "gradeforest/text.hpp"

namespace gradeforest {

enum class FeatureKind { continuous, categorical };

using RowIndex = std::size_t;
using ClassIndex = std::size_t;

// Column and class layout shared by a dataset and the models fitted on it.
struct Schema {
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<FeatureKind> kinds;

  bool operator==(const Schema&) const = default;
};

// A labeled table of n rows by m numeric predictors. Categorical predictors are
// stored as non-negative integer codes. Rows are held row-major.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<std::string> feature_names, std::vector<std::string> class_names,
          std::vector<FeatureKind> kinds = {})
      : feature_names_(std::move(feature_names)),
        class_names_(std::move(class_names)),
        kinds_(std::move(kinds)) {
    if (kinds_.empty()) kinds_.assign(feature_names_.size(), FeatureKind::continuous);
    if (kinds_.size() != feature_names_.size())
      throw SchemaError("feature kinds and names differ in length");
    check_unique(feature_names_, "feature");
    check_unique(class_names_, "class");
  }

  void add_row(std::span<const double> values, ClassIndex label) {
    if (values.size() != n_features())
      throw InputError("row width " + std::to_string(values.size()) + " does not match " +
                       std::to_string(n_features()) + " features");
    if (label >= n_classes())
      throw InputError("label index " + std::to_string(label) + " out of range");
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (kinds_[j] == FeatureKind::categorical &&
          (values[j] < 0 || values[j] != std::floor(values[j])))
        throw InputError("categorical feature '" + feature_names_[j] +
                         "' needs non-negative integer codes");
    }
    values_.insert(values_.end(), values.begin(), values.end());
    labels_.push_back(label);
  }

  std::size_t n_rows() const { return labels_.size(); }
  std::size_t n_features() const { return feature_names_.size(); }
  std::size_t n_classes() const { return class_names_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const double> row(RowIndex i) const {
    return {values_.data() + i * n_features(), n_features()};
  }
  double value(RowIndex i, std::size_t feature) const { return values_[i * n_features() + feature]; }
  ClassIndex label(RowIndex i) const { return labels_[i]; }
  const std::vector<ClassIndex>& labels() const { return labels_; }

  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<FeatureKind>& kinds() const { return kinds_; }
  FeatureKind kind(std::size_t feature) const { return kinds_[feature]; }
  Schema schema() const { return {feature_names_, class_names_, kinds_}; }

  std::vector<RowIndex> all_rows() const {
    std::vector<RowIndex> rows(n_rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
  }

 private:
  static void check_unique(const std::vector<std::string>& names, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& name : names)
      if (!seen.insert(name).second)
        throw SchemaError(std::string("duplicate ") + what + " name '" + name + "'");
  }

  std::vector<std::string> feature_names_;
  std::vector<std::string> class_names_;
  std::vector<FeatureKind> kinds_;
  std::vector<double> values_;
  std::vector<ClassIndex> labels_;
};

inline std::vector<std::size_t> class_counts(const Dataset& data, std::span<const RowIndex> rows) {
  std::vector<std::size_t> counts(data.n_classes(), 0);
  for (RowIndex r : rows) ++counts[data.label(r)];
  return counts;
}

// CSV layout: header `label,<feature>...`, one row per observation, label as
// class name. Class order is `class_order` when given, otherwise sorted names.
inline Dataset read_dataset_csv(std::istream& in, const std::vector<std::string>& class_order = {}) {
  std::string line;
  if (!text::next_line(in, line)) throw SchemaError("dataset file is empty (no header)");
  auto header = text::split_csv_line(line);
  if (header.empty() || text::trim(header.front()) != "label")
    throw SchemaError("dataset header must start with 'label'");
  std::vector<std::string> features(header.begin() + 1, header.end());

  std::vector<std::pair<std::string, std::vector<double>>> parsed;
  std::size_t line_no = 1;
  while (text::next_line(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto fields = text::split_csv_line(line);
    if (fields.size() != header.size())
      throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    std::vector<double> values;
    values.reserve(features.size());
    for (std::size_t j = 1; j < fields.size(); ++j) {
      auto v = text::parse_double(fields[j]);
      if (!v || !std::isfinite(*v))
        throw SchemaError("line " + std::to_string(line_no) + ": bad number in column '" +
                          header[j] + "'");
      values.push_back(*v);
    }
    parsed.emplace_back(fields[0], std::move(values));
  }

  std::vector<std::string> classes = class_order;
  if (classes.empty()) {
    std::set<std::string> names;
    for (const auto& [name, _] : parsed) names.insert(name);
    classes.assign(names.begin(), names.end());
  }
  std::map<std::string, ClassIndex> index;
  for (std::size_t c = 0; c < classes.size(); ++c) index[classes[c]] = c;

  Dataset data(std::move(features), std::move(classes));
  for (const auto& [name, values] : parsed) {
    auto it = index.find(name);
    if (it == index.end()) throw SchemaError("unknown class label '" + name + "'");
    data.add_row(values, it->second);
  }
  return data;
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "label";
  for (const auto& name : data.feature_names()) out << ',' << text::csv_escape(name);
  out << '\n';
  for (RowIndex i = 0; i < data.n_rows(); ++i) {
    out << text::csv_escape(data.class_names()[data.label(i)]);
    for (double v : data.row(i)) out << ',' << text::format_double(v);
    out << '\n';
  }
}

}  // namespace gradeforest
