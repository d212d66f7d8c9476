#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "gradeforest/importance.hpp"
#include "gradeforest/synthgen.hpp"

using namespace gradeforest;

namespace {

synth::SynthConfig config(std::size_t n, std::uint64_t seed) {
  synth::SynthConfig c;
  c.n_students = n;
  c.seed = seed;
  return c;
}

std::string records_text(const synth::SynthOutput& out) {
  std::ostringstream s;
  ingest::write_records_csv(s, out.records);
  return s.str();
}

}  // namespace

TEST(Synth, ZeroStudents) {
  const auto out = synth::generate(config(0, 1));
  EXPECT_TRUE(out.records.empty());
  EXPECT_TRUE(out.truth.empty());
}

TEST(Synth, DeterministicInSeed) {
  const auto a = synth::generate(config(300, 4));
  const auto b = synth::generate(config(300, 4));
  const auto c = synth::generate(config(300, 5));
  EXPECT_EQ(records_text(a), records_text(b));
  EXPECT_EQ(a.dropout_intercept, b.dropout_intercept);
  EXPECT_NE(records_text(a), records_text(c));
}

TEST(Synth, RecordsParseWithoutRejects) {
  const auto out = synth::generate(config(500, 2));
  std::istringstream in(records_text(out));
  const auto parsed = ingest::parse_records(in);
  EXPECT_TRUE(parsed.rejects.empty());
  EXPECT_EQ(parsed.records.size(), out.records.size());
  for (const auto& r : parsed.records) {
    EXPECT_GE(r.grade, 0.0);
    EXPECT_LE(r.grade, 100.0);
    EXPECT_GT(r.credit_value, 0.0);
  }
}

// Labels recovered by ingest agree with the generator's truth, and base rates
// land on the targets.
TEST(Synth, IngestRecoversTheTruth) {
  for (auto scenario : {synth::Scenario::logistic, synth::Scenario::xor_interaction}) {
    auto c = config(3000, 8);
    c.scenario = scenario;
    const auto out = synth::generate(c);
    const auto cohort = ingest::build_cohort(out.records);
    ASSERT_EQ(cohort.audit.decisions.size(), out.truth.size());
    std::map<std::string, const synth::TruthLabel*> truth;
    for (const auto& t : out.truth) truth[t.student_id] = &t;
    std::size_t agree = 0, majors_agree = 0, completed = 0;
    for (const auto& d : cohort.audit.decisions) {
      const auto& t = *truth.at(d.student_id);
      agree += d.label == t.completion;
      if (d.label == ingest::Completion::completed && t.completion == d.label) {
        ++completed;
        majors_agree += d.major == t.major;
      }
    }
    EXPECT_GE(double(agree), 0.99 * double(out.truth.size()));
    EXPECT_GE(double(majors_agree), 0.9 * double(completed));
    const double labeled = double(cohort.audit.completed + cohort.audit.dropout);
    EXPECT_NEAR(double(cohort.audit.dropout) / labeled, c.dropout_rate, 0.02);
    EXPECT_NEAR(double(cohort.audit.excluded) / double(out.truth.size()), c.excluded_fraction, 0.02);
  }
}

TEST(Synth, PlantedGradeEffectRanksFirst) {
  // Everyone takes LOWG, so its grade column carries the effect rather than
  // the zero grade of students who skipped it.
  auto c = config(2500, 3);
  c.grade_coefficients = {{"LOWG", -1.5}};
  c.required_department = "LOWG";
  const auto cohort = fixtures::synth_cohort(c);
  const auto& d = cohort.completion;
  std::vector<RowIndex> train, test;
  for (RowIndex r = 0; r < d.n_rows(); ++r) (r % 4 ? train : test).push_back(r);
  auto fc = preset("rf3");
  fc.n_trees = 60;
  fc.seed = 1;
  const auto forest = fit_forest(d, train, fc);
  const auto top = top_k(permutation_importance(forest, d, test, 2), 1);
  EXPECT_EQ(top.front().name, "LOWG G");
}

TEST(Synth, RequiredDepartmentAndUniformFirstYear) {
  auto c = config(400, 6);
  c.required_department = "LOWG";
  const auto req = fixtures::synth_cohort(c);
  const auto& d = req.completion;
  const auto col = std::find(d.feature_names().begin(), d.feature_names().end(), "LOWG") - d.feature_names().begin();
  for (RowIndex r = 0; r < d.n_rows(); ++r) EXPECT_GE(d.value(r, col), 1.0);

  c.required_department.clear();
  c.uniform_first_year = true;
  const auto uni = fixtures::synth_cohort(c);
  for (RowIndex r = 0; r < uni.completion.n_rows(); ++r)
    for (std::size_t j = 0; j < uni.completion.n_features(); j += 2) EXPECT_EQ(uni.completion.value(r, j), 1.0);
}

TEST(Synth, InvalidConfigurations) {
  auto c = config(10, 1);
  c.dropout_rate = 1.5;
  EXPECT_THROW(synth::generate(c), ConfigError);
  c = config(10, 1);
  c.grade_coefficients = {{"NOPE", 1.0}};
  EXPECT_THROW(synth::generate(c), ConfigError);
  c = config(10, 1);
  c.departments.resize(1);
  EXPECT_THROW(synth::generate(c), ConfigError);
}

TEST(SynthConfigFile, RequiresSeed) {
  std::istringstream in("n_students = 10\n");
  EXPECT_THROW(synth::config_from(KeyValues::parse(in)), ConfigError);
}

TEST(SynthConfigFile, ParsesAndRoundTrips) {
  std::istringstream in(
      "seed = 12\n"
      "n_students = 50\n"
      "scenario = xor\n"
      "departments = AAA:60:10, BBB:70:5, CCC:75:8\n"
      "xor_departments = AAA, CCC\n"
      "grade_coefficient.BBB = 0.5\n"
      "archetype.one = 2 | AAA:3, BBB:1\n"
      "archetype.two = 1 |\n"
      "uniform_first_year = yes\n");
  const auto c = synth::config_from(KeyValues::parse(in));
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.scenario, synth::Scenario::xor_interaction);
  ASSERT_EQ(c.departments.size(), 3u);
  EXPECT_EQ(c.departments[1].grade_mean, 70.0);
  EXPECT_EQ(c.xor_second, "CCC");
  EXPECT_EQ(c.grade_coefficients, (std::map<std::string, double>{{"BBB", 0.5}}));
  ASSERT_EQ(c.archetypes.size(), 2u);
  EXPECT_EQ(c.archetypes[0].preference.at("AAA"), 3.0);
  EXPECT_TRUE(c.uniform_first_year);

  std::ostringstream written;
  synth::to_key_values(c).write(written);
  std::istringstream back(written.str());
  const auto again = synth::config_from(KeyValues::parse(back));
  std::ostringstream rewritten;
  synth::to_key_values(again).write(rewritten);
  EXPECT_EQ(rewritten.str(), written.str());
  EXPECT_EQ(records_text(synth::generate(c)), records_text(synth::generate(again)));
}

TEST(SynthConfigFile, BadValues) {
  for (const char* text : {"seed = 1\nscenario = tree\n", "seed = 1\ndepartments = A:1\n",
                           "seed = x\n", "seed = 1\nuniform_first_year = maybe\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(synth::config_from(KeyValues::parse(in)), ConfigError) << text;
  }
}
