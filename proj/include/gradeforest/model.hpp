#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <variant>

#include "gradeforest/baseline.hpp"
#include "gradeforest/forest.hpp"

namespace gradeforest {

// Any persisted classifier.
using Model = std::variant<Forest, LogisticModel, MultinomialModel>;

inline const Schema& schema_of(const Model& model) {
  return std::visit([](const auto& m) -> const Schema& { return m.schema; }, model);
}

inline ClassIndex predict(const Model& model, std::span<const double> x) {
  struct Visitor {
    std::span<const double> x;
    ClassIndex operator()(const Forest& f) const { return f.predict(x); }
    ClassIndex operator()(const LogisticModel& m) const { return predict_logistic(m, x); }
    ClassIndex operator()(const MultinomialModel& m) const { return predict_multinomial(m, x); }
  };
  return std::visit(Visitor{x}, model);
}

inline void write_model(std::ostream& out, const Model& model) {
  struct Visitor {
    std::ostream& out;
    void operator()(const Forest& f) const { write_forest(out, f); }
    void operator()(const LogisticModel& m) const { write_logistic(out, m); }
    void operator()(const MultinomialModel& m) const { write_multinomial(out, m); }
  };
  std::visit(Visitor{out}, model);
}

inline Model read_model(std::istream& in) {
  const auto magic = std::string(text::trim(detail::expect_line(in)));
  if (magic == kForestMagic) return read_forest_body(in);
  if (magic == kLogisticMagic) return read_logistic_body(in);
  if (magic == kMultinomialMagic) return read_multinomial_body(in);
  throw SchemaError("unrecognized model file header '" + magic + "'");
}

}  // namespace gradeforest
