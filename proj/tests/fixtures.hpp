#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradeforest/dataset.hpp"
#include "gradeforest/ingest.hpp"
#include "gradeforest/random.hpp"
#include "gradeforest/synthgen.hpp"

namespace fixtures {

using namespace gradeforest;

// generate -> build_cohort, in memory.
inline ingest::Cohort synth_cohort(const synth::SynthConfig& config) {
  return ingest::build_cohort(synth::generate(config).records);
}

// m continuous predictors; the label is a noisy threshold on the first three
// (just the first when m < 3).
inline Dataset random_numeric(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) names.push_back("x" + std::to_string(j));
  Dataset d(names, {"a", "b", "c"});
  Rng rng(seed);
  std::vector<double> row(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = rng.normal();
    const double interaction = m > 2 ? row[1] * row[2] : 0.0;
    const double z = row[0] + 0.5 * interaction + 0.3 * rng.normal();
    d.add_row(row, z < -0.4 ? 0 : (z < 0.6 ? 1 : 2));
  }
  return d;
}

}  // namespace fixtures
