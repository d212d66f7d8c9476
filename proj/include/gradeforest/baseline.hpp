#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gradeforest/dataset.hpp"
#include "gradeforest/errors.hpp"
#include "gradeforest/forest.hpp"
#include "gradeforest/text.hpp"

namespace gradeforest {

// P(class 1) = sigmoid(beta[0] + sum_i beta[i + 1] x_i).
struct LogisticModel {
  std::vector<double> beta;  // m + 1, intercept first
  Schema schema;
};

// Softmax over k linear scores; the last class is the reference and its row
// of coefficients is pinned at zero. Row c occupies beta[c * (m + 1) ...].
struct MultinomialModel {
  std::vector<double> beta;  // k * (m + 1)
  Schema schema;

  std::size_t n_classes() const { return schema.class_names.size(); }
  std::size_t n_features() const { return schema.feature_names.size(); }
};

struct TrainOptions {
  double learning_rate = 1.0;
  std::size_t max_iterations = 5000;
  double gradient_tolerance = 1e-6;
  double l2_penalty = 0.0;  // on non-intercept coefficients, standardized scale
};

// Row-major n x m predictors with class indices; the optimizer's working view.
struct Design {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> x;
  std::vector<ClassIndex> y;

  std::size_t n_rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * n_features, n_features}; }

  static Design from(const Dataset& data, std::span<const RowIndex> rows) {
    Design d;
    d.n_features = data.n_features();
    d.n_classes = data.n_classes();
    d.x.reserve(rows.size() * d.n_features);
    for (RowIndex r : rows) {
      const auto v = data.row(r);
      d.x.insert(d.x.end(), v.begin(), v.end());
      d.y.push_back(data.label(r));
    }
    return d;
  }
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double linear(std::span<const double> coef, std::span<const double> x) {
  double z = coef[0];
  for (std::size_t i = 0; i < x.size(); ++i) z += coef[i + 1] * x[i];
  return z;
}

inline void check_width(std::size_t got, std::size_t want) {
  if (got != want)
    throw InputError("input has " + std::to_string(got) + " values, model expects " + std::to_string(want));
}

// Max-shifted softmax of `scores` in place.
inline void softmax_inplace(std::vector<double>& scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (auto& s : scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (auto& s : scores) s /= total;
}

}  // namespace detail

inline double logit_predict_proba(const LogisticModel& model, std::span<const double> x) {
  detail::check_width(x.size() + 1, model.beta.size());
  return detail::sigmoid(detail::linear(model.beta, x));
}

inline std::vector<double> softmax_predict_proba(const MultinomialModel& model, std::span<const double> x) {
  const std::size_t m = model.n_features();
  detail::check_width(x.size(), m);
  std::vector<double> scores(model.n_classes());
  for (std::size_t c = 0; c < scores.size(); ++c)
    scores[c] = detail::linear(std::span<const double>(model.beta).subspan(c * (m + 1), m + 1), x);
  detail::softmax_inplace(scores);
  return scores;
}

// Class 1 iff P >= 0.5.
inline ClassIndex predict_logistic(const LogisticModel& model, std::span<const double> x) {
  return logit_predict_proba(model, x) >= 0.5 ? 1 : 0;
}

inline ClassIndex predict_multinomial(const MultinomialModel& model, std::span<const double> x) {
  const auto p = softmax_predict_proba(model, x);
  return static_cast<ClassIndex>(std::max_element(p.begin(), p.end()) - p.begin());
}

// Mean negative log-likelihood of the binary model (label 1 is the event)
// plus (l2 / 2) * sum of squared slopes, with its gradient.
inline LossAndGradient logistic_loss(const Design& d, std::span<const double> beta, double l2 = 0.0) {
  const std::size_t m = d.n_features;
  LossAndGradient out;
  out.gradient.assign(m + 1, 0.0);
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    const auto x = d.row(i);
    const double z = detail::linear(beta, x);
    const double y = d.y[i] == 1 ? 1.0 : 0.0;
    out.loss += detail::softplus(z) - y * z;
    const double r = detail::sigmoid(z) - y;
    out.gradient[0] += r;
    for (std::size_t j = 0; j < m; ++j) out.gradient[j + 1] += r * x[j];
  }
  const double n = static_cast<double>(std::max<std::size_t>(d.n_rows(), 1));
  out.loss /= n;
  for (auto& g : out.gradient) g /= n;
  for (std::size_t j = 1; j <= m; ++j) {
    out.loss += 0.5 * l2 * beta[j] * beta[j];
    out.gradient[j] += l2 * beta[j];
  }
  return out;
}

// Same for the reference-class softmax. Gradient entries of the reference
// row are zero.
inline LossAndGradient multinomial_loss(const Design& d, std::span<const double> beta, double l2 = 0.0) {
  const std::size_t m = d.n_features;
  const std::size_t k = d.n_classes;
  const std::size_t w = m + 1;
  LossAndGradient out;
  out.gradient.assign(k * w, 0.0);
  std::vector<double> scores(k);
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    const auto x = d.row(i);
    for (std::size_t c = 0; c < k; ++c) scores[c] = detail::linear(beta.subspan(c * w, w), x);
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double s : scores) total += std::exp(s - top);
    out.loss += top + std::log(total) - scores[d.y[i]];
    for (std::size_t c = 0; c + 1 < k; ++c) {
      const double r = std::exp(scores[c] - top) / total - (d.y[i] == c ? 1.0 : 0.0);
      out.gradient[c * w] += r;
      for (std::size_t j = 0; j < m; ++j) out.gradient[c * w + j + 1] += r * x[j];
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(d.n_rows(), 1));
  out.loss /= n;
  for (auto& g : out.gradient) g /= n;
  for (std::size_t c = 0; c + 1 < k; ++c)
    for (std::size_t j = 1; j <= m; ++j) {
      const double b = beta[c * w + j];
      out.loss += 0.5 * l2 * b * b;
      out.gradient[c * w + j] += l2 * b;
    }
  return out;
}

// Column z-scores of a design. Zero-variance columns keep scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Design& d) {
    Standardizer s;
    const std::size_t m = d.n_features;
    s.mean.assign(m, 0.0);
    s.scale.assign(m, 1.0);
    const double n = static_cast<double>(d.n_rows());
    if (d.n_rows() == 0) return s;
    for (std::size_t i = 0; i < d.n_rows(); ++i)
      for (std::size_t j = 0; j < m; ++j) s.mean[j] += d.x[i * m + j];
    for (auto& v : s.mean) v /= n;
    std::vector<double> ss(m, 0.0);
    for (std::size_t i = 0; i < d.n_rows(); ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double dev = d.x[i * m + j] - s.mean[j];
        ss[j] += dev * dev;
      }
    for (std::size_t j = 0; j < m; ++j) {
      const double sd = std::sqrt(ss[j] / n);
      s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Design apply(const Design& d) const {
    Design out = d;
    const std::size_t m = d.n_features;
    for (std::size_t i = 0; i < d.n_rows(); ++i)
      for (std::size_t j = 0; j < m; ++j) out.x[i * m + j] = (d.x[i * m + j] - mean[j]) / scale[j];
    return out;
  }

  // Coefficients on standardized inputs -> coefficients on raw inputs, for
  // one (intercept, slopes...) block.
  std::vector<double> to_raw(std::span<const double> block) const {
    std::vector<double> raw(block.begin(), block.end());
    for (std::size_t j = 0; j < mean.size(); ++j) {
      raw[j + 1] = block[j + 1] / scale[j];
      raw[0] -= block[j + 1] * mean[j] / scale[j];
    }
    return raw;
  }
};

namespace detail {

template <typename Objective>
std::vector<double> gradient_descent(Objective&& objective, std::vector<double> beta, const TrainOptions& opt) {
  if (!(opt.learning_rate > 0.0) || !(opt.gradient_tolerance > 0.0))
    throw ConfigError("learning rate and gradient tolerance must be positive");
  if (opt.max_iterations == 0) return beta;
  auto current = objective(beta);
  if (!std::isfinite(current.loss)) throw NumericError("non-finite loss at iteration 0");
  double step = opt.learning_rate;
  std::vector<double> candidate(beta.size());
  for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
    double norm = 0.0;
    for (double g : current.gradient) norm += g * g;
    if (std::sqrt(norm) <= opt.gradient_tolerance) break;
    while (true) {
      for (std::size_t i = 0; i < beta.size(); ++i) candidate[i] = beta[i] - step * current.gradient[i];
      auto next = objective(candidate);
      if (std::isfinite(next.loss) && next.loss <= current.loss) {
        beta.swap(candidate);
        current = std::move(next);
        step = std::min(step * 2.0, opt.learning_rate);
        break;
      }
      step /= 2.0;
      if (step < 1e-30) {
        if (!std::isfinite(next.loss))
          throw NumericError("non-finite loss at iteration " + std::to_string(it));
        return beta;  // no descent possible at working precision
      }
    }
  }
  return beta;
}

inline std::size_t distinct_labels(const Design& d) {
  std::vector<bool> seen(d.n_classes, false);
  std::size_t n = 0;
  for (auto y : d.y)
    if (!seen[y]) {
      seen[y] = true;
      ++n;
    }
  return n;
}

}  // namespace detail

inline LogisticModel fit_logistic(const Dataset& data, std::span<const RowIndex> train_rows,
                                  const TrainOptions& options = {}) {
  if (data.n_classes() != 2)
    throw TaskMismatchError("logistic regression needs exactly 2 classes, data has " +
                            std::to_string(data.n_classes()) + "; use multinomial");
  const Design raw = Design::from(data, train_rows);
  if (detail::distinct_labels(raw) < 2) throw DegenerateDataError("training rows hold a single class");
  const auto scaler = Standardizer::fit(raw);
  const Design z = scaler.apply(raw);
  auto beta = detail::gradient_descent([&](std::span<const double> b) { return logistic_loss(z, b, options.l2_penalty); },
                                       std::vector<double>(data.n_features() + 1, 0.0), options);
  return {scaler.to_raw(beta), data.schema()};
}

inline MultinomialModel fit_multinomial(const Dataset& data, std::span<const RowIndex> train_rows,
                                        const TrainOptions& options = {}) {
  const Design raw = Design::from(data, train_rows);
  if (detail::distinct_labels(raw) < 2) throw DegenerateDataError("training rows hold a single class");
  const auto scaler = Standardizer::fit(raw);
  const Design z = scaler.apply(raw);
  const std::size_t w = data.n_features() + 1;
  auto beta = detail::gradient_descent(
      [&](std::span<const double> b) { return multinomial_loss(z, b, options.l2_penalty); },
      std::vector<double>(data.n_classes() * w, 0.0), options);
  MultinomialModel model{std::vector<double>(beta.size(), 0.0), data.schema()};
  for (std::size_t c = 0; c + 1 < data.n_classes(); ++c) {
    const auto block = scaler.to_raw(std::span<const double>(beta).subspan(c * w, w));
    std::copy(block.begin(), block.end(), model.beta.begin() + static_cast<std::ptrdiff_t>(c * w));
  }
  return model;
}

// ---- persistence ---------------------------------------------------------

inline constexpr std::string_view kLogisticMagic = "gradeforest-model logistic v1";
inline constexpr std::string_view kMultinomialMagic = "gradeforest-model multinomial v1";

inline void write_logistic(std::ostream& out, const LogisticModel& model) {
  out << kLogisticMagic << '\n';
  write_schema(out, model.schema);
  out << "event_class = " << model.schema.class_names.at(1) << '\n';
  out << "term,coefficient\n";
  out << "(intercept)," << text::format_double(model.beta[0]) << '\n';
  for (std::size_t j = 0; j < model.schema.feature_names.size(); ++j)
    out << text::csv_escape(model.schema.feature_names[j]) << ',' << text::format_double(model.beta[j + 1]) << '\n';
}

inline void write_multinomial(std::ostream& out, const MultinomialModel& model) {
  const std::size_t k = model.n_classes();
  const std::size_t w = model.n_features() + 1;
  out << kMultinomialMagic << '\n';
  write_schema(out, model.schema);
  out << "reference_class = " << model.schema.class_names.back() << '\n';
  out << "term";
  for (const auto& c : model.schema.class_names) out << ',' << text::csv_escape(c);
  out << '\n';
  for (std::size_t j = 0; j < w; ++j) {
    out << (j == 0 ? std::string("(intercept)") : text::csv_escape(model.schema.feature_names[j - 1]));
    for (std::size_t c = 0; c < k; ++c) out << ',' << text::format_double(model.beta[c * w + j]);
    out << '\n';
  }
}

namespace detail {

inline std::vector<double> read_coefficient_row(std::istream& in, std::size_t expected) {
  const auto fields = text::split_csv_line(expect_line(in));
  if (fields.size() != expected + 1) throw SchemaError("coefficient row has the wrong width");
  std::vector<double> out;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    auto v = text::parse_double(fields[i]);
    if (!v) throw SchemaError("bad coefficient '" + fields[i] + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

inline LogisticModel read_logistic_body(std::istream& in) {
  LogisticModel model;
  model.schema = read_schema(in);
  detail::expect_key(in, "event_class");
  detail::expect_line(in);  // header
  for (std::size_t j = 0; j <= model.schema.feature_names.size(); ++j)
    model.beta.push_back(detail::read_coefficient_row(in, 1).front());
  return model;
}

inline MultinomialModel read_multinomial_body(std::istream& in) {
  MultinomialModel model;
  model.schema = read_schema(in);
  detail::expect_key(in, "reference_class");
  detail::expect_line(in);  // header
  const std::size_t k = model.n_classes();
  const std::size_t w = model.n_features() + 1;
  model.beta.assign(k * w, 0.0);
  for (std::size_t j = 0; j < w; ++j) {
    const auto row = detail::read_coefficient_row(in, k);
    for (std::size_t c = 0; c < k; ++c) model.beta[c * w + j] = row[c];
  }
  return model;
}

}  // namespace gradeforest
