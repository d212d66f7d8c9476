#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "gradeforest/config.hpp"
#include "gradeforest/errors.hpp"
#include "gradeforest/ingest.hpp"
#include "gradeforest/random.hpp"
#include "gradeforest/text.hpp"

namespace gradeforest::synth {

struct DepartmentProfile {
  std::string code;
  double grade_mean = 70.0;
  double grade_sd = 12.0;
};

// A kind of student. `preference` weights course choice and, squared, the
// choice of major; departments not listed weigh 1.
struct Archetype {
  std::string name;
  double weight = 1.0;
  std::map<std::string, double> preference;
};

enum class Scenario {
  // Dropout log-odds linear in first-year department grade averages.
  logistic,
  // Dropout log-odds driven by the XOR of taking two departments in first year,
  // plus a linear grade term. A linear model cannot represent the XOR part.
  xor_interaction,
};

struct SynthConfig {
  std::size_t n_students = 2000;
  std::uint64_t seed = 0;
  std::vector<DepartmentProfile> departments = {
      {"LOWG", 58, 15}, {"HIGG", 80, 7}, {"MAT", 63, 15}, {"ECO", 65, 14},
      {"PSY", 73, 11},  {"ENG", 75, 10}, {"CHM", 67, 13}, {"HIS", 74, 10}};
  std::vector<Archetype> archetypes = {
      {"science", 1.0, {{"MAT", 4}, {"CHM", 4}, {"LOWG", 2}}},
      {"social", 1.0, {{"ECO", 4}, {"PSY", 4}, {"HIGG", 2}}},
      {"humanities", 1.0, {{"ENG", 4}, {"HIS", 4}, {"HIGG", 2}}},
      {"undecided", 0.5, {}},
  };
  Scenario scenario = Scenario::logistic;
  double dropout_rate = 0.32;          // share of dropouts among labeled students
  double excluded_fraction = 0.05;     // students who register for under 5 credits
  std::map<std::string, double> grade_coefficients = {{"LOWG", -1.0}};  // per 10 grade points
  std::string required_department;     // if set: 1.0 first-year credit there for everyone
  bool uniform_first_year = false;     // every student: one 0.5 course per department in each of two terms
  std::string xor_first = "CHM";
  std::string xor_second = "HIS";
  double xor_strength = 5.0;
  double ability_weight = 0.6;         // within-student grade correlation
  double major_focus = 0.6;            // share of later courses taken in the major
  double summer_probability = 0.15;
  int first_cohort_year = 2000;
  int cohort_years = 4;
};

struct TruthLabel {
  std::string student_id;
  ingest::Completion completion = ingest::Completion::excluded;
  std::string major;  // completed students only
};

struct SynthOutput {
  std::vector<ingest::GradeRecord> records;
  std::vector<TruthLabel> truth;
  double dropout_intercept = 0.0;  // calibrated so the realized dropout share hits the target
};

inline void validate(const SynthConfig& c) {
  if (c.departments.size() < 2) throw ConfigError("synthetic data needs at least 2 departments");
  if (c.archetypes.empty()) throw ConfigError("synthetic data needs at least one archetype");
  for (double p : {c.dropout_rate, c.excluded_fraction, c.ability_weight, c.major_focus, c.summer_probability})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synthetic probabilities and shares must lie in [0, 1]");
  auto known = [&](const std::string& code) {
    return std::any_of(c.departments.begin(), c.departments.end(), [&](const auto& d) { return d.code == code; });
  };
  for (const auto& [code, _] : c.grade_coefficients)
    if (!known(code)) throw ConfigError("grade coefficient for unknown department '" + code + "'");
  if (!c.required_department.empty() && !known(c.required_department))
    throw ConfigError("unknown required department '" + c.required_department + "'");
  if (c.scenario == Scenario::xor_interaction && (!known(c.xor_first) || !known(c.xor_second)))
    throw ConfigError("unknown xor department");
  for (const auto& a : c.archetypes) {
    if (!(a.weight >= 0.0)) throw ConfigError("archetype weights must be non-negative");
    for (const auto& [code, w] : a.preference) {
      if (!known(code)) throw ConfigError("archetype '" + a.name + "' prefers unknown department '" + code + "'");
      if (!(w >= 0.0)) throw ConfigError("archetype preferences must be non-negative");
    }
  }
  if (c.cohort_years < 1) throw ConfigError("cohort_years must be at least 1");
}

namespace detail {

inline ingest::Semester next_semester(ingest::Semester s, Rng& rng, double summer_probability) {
  using ingest::Term;
  switch (s.term) {
    case Term::fall: return {s.year + 1, Term::winter};
    case Term::winter: return rng.bernoulli(summer_probability) ? ingest::Semester{s.year, Term::summer}
                                                                 : ingest::Semester{s.year, Term::fall};
    default: return {s.year, Term::fall};
  }
}

struct Student {
  std::string id;
  bool excluded = false;
  std::size_t archetype = 0;
  std::size_t major = 0;
  double ability = 0.0;
  std::vector<ingest::GradeRecord> records;
  ingest::Semester last;
  double dropout_score = 0.0;  // log-odds before the intercept
  double draw = 0.0;           // uniform used for the dropout decision
};

class Builder {
 public:
  explicit Builder(const SynthConfig& c) : c_(c) {
    for (std::size_t d = 0; d < c.departments.size(); ++d) index_[c.departments[d].code] = d;
    for (const auto& a : c.archetypes) {
      std::vector<double> pref(c.departments.size(), 1.0);
      for (const auto& [code, w] : a.preference) pref[index_.at(code)] = w;
      preference_.push_back(pref);
      std::vector<double> sq(pref.size());
      for (std::size_t i = 0; i < pref.size(); ++i) sq[i] = pref[i] * pref[i];
      major_preference_.push_back(std::move(sq));
      archetype_weight_.push_back(a.weight);
    }
  }

  double grade(std::size_t dept, double ability, Rng& rng) const {
    const auto& p = c_.departments[dept];
    const double aw = c_.ability_weight;
    const double z = aw * ability + std::sqrt(1.0 - aw * aw) * rng.normal();
    return std::clamp(std::round(p.grade_mean + p.grade_sd * z), 0.0, 100.0);
  }

  void add_course(Student& s, std::size_t dept, ingest::Semester sem, double credit, int level, Rng& rng) const {
    ingest::GradeRecord r;
    r.student_id = s.id;
    r.department = c_.departments[dept].code;
    r.course_title = r.department + std::to_string(level * 100 + static_cast<int>(rng.below(100)));
    r.semester = sem;
    r.credit_value = credit;
    r.grade = grade(dept, s.ability, rng);
    s.records.push_back(std::move(r));
  }

  std::size_t free_choice(const Student& s, Rng& rng) const {
    auto pref = preference_[s.archetype];
    for (std::size_t d : reserved_) pref[d] = 0.0;
    return rng.weighted(pref);
  }

  double free_credit(Rng& rng) const { return rng.bernoulli(0.15) ? 1.0 : 0.5; }

  Student first_year(std::size_t i, Rng& rng) {
    Student s;
    char id[16];
    std::snprintf(id, sizeof(id), "S%06zu", i + 1);
    s.id = id;
    s.excluded = rng.bernoulli(c_.excluded_fraction);
    s.archetype = rng.weighted(archetype_weight_);
    s.major = rng.weighted(major_preference_[s.archetype]);
    s.ability = rng.normal();
    ingest::Semester sem{c_.first_cohort_year + static_cast<int>(rng.below(static_cast<std::uint64_t>(c_.cohort_years))),
                         ingest::Term::fall};

    if (s.excluded) {
      const auto n = 1 + rng.below(4);
      for (std::uint64_t k = 0; k < n; ++k) add_course(s, free_choice(s, rng), sem, 0.5, 1, rng);
      s.last = sem;
      s.draw = rng.uniform();
      return s;
    }

    if (c_.uniform_first_year) {
      for (int term = 0; term < 2; ++term) {
        for (std::size_t d = 0; d < c_.departments.size(); ++d) add_course(s, d, sem, 0.5, 1, rng);
        s.last = sem;
        sem = next_semester(sem, rng, c_.summer_probability);
      }
      // Short department lists need more terms to reach the 5-credit window.
      while (0.5 * static_cast<double>(s.records.size()) < 5.0) {
        for (std::size_t d = 0; d < c_.departments.size(); ++d) add_course(s, d, sem, 0.5, 1, rng);
        s.last = sem;
        sem = next_semester(sem, rng, c_.summer_probability);
      }
      s.dropout_score = score(s);
      s.draw = rng.uniform();
      return s;
    }

    std::vector<std::size_t> mandatory;
    if (!c_.required_department.empty()) mandatory.assign(2, index_.at(c_.required_department));
    if (c_.scenario == Scenario::xor_interaction) {
      for (const auto& code : {c_.xor_first, c_.xor_second})
        if (rng.bernoulli(0.5)) mandatory.insert(mandatory.end(), 2, index_.at(code));
    }
    double attempted = 0.0;
    std::size_t next_mandatory = 0;
    while (attempted < 5.0) {
      const auto load = 4 + rng.below(3);
      for (std::uint64_t k = 0; k < load; ++k) {
        if (next_mandatory < mandatory.size()) {
          add_course(s, mandatory[next_mandatory++], sem, 0.5, 1, rng);
          attempted += 0.5;
        } else {
          const double credit = free_credit(rng);
          add_course(s, free_choice(s, rng), sem, credit, 1, rng);
          attempted += credit;
        }
      }
      s.last = sem;
      sem = next_semester(sem, rng, c_.summer_probability);
    }
    s.dropout_score = score(s);
    s.draw = rng.uniform();
    return s;
  }

  // Dropout log-odds contribution of the first-year record (no intercept).
  double score(const Student& s) const {
    const std::size_t n_dept = c_.departments.size();
    std::vector<double> credits(n_dept, 0.0), grade_sum(n_dept, 0.0);
    std::vector<int> courses(n_dept, 0);
    for (const auto& r : s.records) {
      const auto d = index_.at(r.department);
      credits[d] += r.credit_value;
      grade_sum[d] += r.grade;
      ++courses[d];
    }
    auto mean_grade = [&](std::size_t d) { return courses[d] ? grade_sum[d] / courses[d] : 0.0; };
    double z = 0.0;
    for (const auto& [code, coef] : c_.grade_coefficients) z += coef * (mean_grade(index_.at(code)) - 60.0) / 10.0;
    if (c_.scenario == Scenario::logistic) return z;
    const bool a = credits[index_.at(c_.xor_first)] >= 1.0 - 1e-9;
    const bool b = credits[index_.at(c_.xor_second)] >= 1.0 - 1e-9;
    return z + c_.xor_strength * (a != b ? 1.0 : -1.0);
  }

  void later_years(Student& s, bool dropout, Rng& rng) const {
    ingest::Semester sem = next_semester(s.last, rng, c_.summer_probability);
    if (dropout) {
      const auto extra = rng.below(3);
      for (std::uint64_t t = 0; t < extra; ++t) {
        const auto load = 3 + rng.below(3);
        for (std::uint64_t k = 0; k < load; ++k) add_course(s, free_choice(s, rng), sem, 0.5, 2, rng);
        s.last = sem;
        sem = next_semester(sem, rng, c_.summer_probability);
      }
      return;
    }
    double completed = 0.0;
    for (const auto& r : s.records)
      if (r.grade >= 50.0) completed += r.credit_value;
    for (int t = 0; completed < 19.5 && t < 40; ++t) {
      const auto load = 4 + rng.below(2);
      const int level = std::min(4, 2 + t / 3);
      for (std::uint64_t k = 0; k < load; ++k) {
        const std::size_t dept = rng.bernoulli(c_.major_focus) ? s.major : free_choice(s, rng);
        add_course(s, dept, sem, 0.5, level, rng);
        if (s.records.back().grade >= 50.0) completed += 0.5;
      }
      s.last = sem;
      sem = next_semester(sem, rng, c_.summer_probability);
    }
  }

  void reserve_departments() {
    if (!c_.required_department.empty()) reserved_.push_back(index_.at(c_.required_department));
    if (c_.scenario == Scenario::xor_interaction) {
      reserved_.push_back(index_.at(c_.xor_first));
      reserved_.push_back(index_.at(c_.xor_second));
    }
  }

 private:
  const SynthConfig& c_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<double>> preference_;
  std::vector<std::vector<double>> major_preference_;
  std::vector<double> archetype_weight_;
  std::vector<std::size_t> reserved_;
};

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Draws a synthetic registrar file. Each student gets a first-year record
// (semesters until 5 attempted credits), a dropout decision from the scenario's
// log-odds, and then either a short tail of courses or enough further courses
// to pass 18 credits, mostly in the chosen major. The dropout intercept is
// calibrated so the number of dropouts equals round(dropout_rate * labeled).
inline SynthOutput generate(const SynthConfig& config) {
  validate(config);
  detail::Builder builder(config);
  builder.reserve_departments();

  std::vector<detail::Student> students;
  students.reserve(config.n_students);
  for (std::size_t i = 0; i < config.n_students; ++i) {
    Rng rng(mix_seed(config.seed, i, 1));
    students.push_back(builder.first_year(i, rng));
  }

  std::size_t labeled = 0;
  for (const auto& s : students) labeled += !s.excluded;
  const auto target = static_cast<std::size_t>(std::floor(config.dropout_rate * static_cast<double>(labeled) + 0.5));
  auto dropouts_at = [&](double intercept) {
    std::size_t n = 0;
    for (const auto& s : students)
      if (!s.excluded && s.draw < detail::logistic(s.dropout_score + intercept)) ++n;
    return n;
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dropouts_at(mid) >= target ? hi : lo) = mid;
  }
  SynthOutput out;
  out.dropout_intercept = hi;

  for (std::size_t i = 0; i < students.size(); ++i) {
    auto& s = students[i];
    TruthLabel truth{s.id, ingest::Completion::excluded, {}};
    if (!s.excluded) {
      const bool dropout = s.draw < detail::logistic(s.dropout_score + out.dropout_intercept);
      Rng rng(mix_seed(config.seed, i, 2));
      builder.later_years(s, dropout, rng);
      truth.completion = dropout ? ingest::Completion::dropout : ingest::Completion::completed;
      if (!dropout) truth.major = config.departments[s.major].code;
    }
    out.truth.push_back(std::move(truth));
    out.records.insert(out.records.end(), s.records.begin(), s.records.end());
  }
  return out;
}

inline void write_truth_csv(std::ostream& out, const std::vector<TruthLabel>& truth) {
  out << "student_id,completion,major\n";
  for (const auto& t : truth) out << t.student_id << ',' << ingest::to_string(t.completion) << ',' << t.major << '\n';
}

// ---- config file ---------------------------------------------------------
//
//   n_students = 2000
//   seed = 7
//   scenario = logistic | xor
//   dropout_rate = 0.32
//   excluded_fraction = 0.05
//   departments = LOWG:58:15, HIGG:80:7, ...       (code:grade_mean:grade_sd)
//   grade_coefficient.LOWG = -1.0                   (replaces the default set)
//   archetype.science = 1.0 | MAT:4, CHM:4          (replaces the default set)
//   required_department = LOWG
//   uniform_first_year = false
//   xor_departments = CHM, HIS
//   xor_strength, ability_weight, major_focus,
//   summer_probability, first_cohort_year, cohort_years

inline SynthConfig config_from(const KeyValues& kv) {
  SynthConfig c;
  c.n_students = kv.get_int<std::size_t>("n_students", c.n_students);
  if (!kv.has("seed")) throw ConfigError("synthetic generation needs an explicit seed");
  c.seed = kv.get_int<std::uint64_t>("seed", 0);
  const auto scenario = kv.get_or("scenario", "logistic");
  if (scenario == "logistic")
    c.scenario = Scenario::logistic;
  else if (scenario == "xor")
    c.scenario = Scenario::xor_interaction;
  else
    throw ConfigError("unknown scenario '" + scenario + "' (expected logistic or xor)");
  c.dropout_rate = kv.get_double("dropout_rate", c.dropout_rate);
  c.excluded_fraction = kv.get_double("excluded_fraction", c.excluded_fraction);
  c.xor_strength = kv.get_double("xor_strength", c.xor_strength);
  c.ability_weight = kv.get_double("ability_weight", c.ability_weight);
  c.major_focus = kv.get_double("major_focus", c.major_focus);
  c.summer_probability = kv.get_double("summer_probability", c.summer_probability);
  c.first_cohort_year = kv.get_int<int>("first_cohort_year", c.first_cohort_year);
  c.cohort_years = kv.get_int<int>("cohort_years", c.cohort_years);
  c.required_department = kv.get_or("required_department", "");
  c.uniform_first_year = kv.get_bool("uniform_first_year", false);

  auto parse_number = [](const std::string& s, const std::string& what) {
    auto v = text::parse_double(s);
    if (!v) throw ConfigError("bad number '" + s + "' in " + what);
    return *v;
  };
  if (auto deps = kv.get("departments")) {
    c.departments.clear();
    for (const auto& item : text::split(*deps, ',')) {
      const auto parts = text::split(text::trim(item), ':');
      if (parts.size() != 3) throw ConfigError("departments entries must be code:mean:sd");
      c.departments.push_back({std::string(text::trim(parts[0])), parse_number(parts[1], "departments"),
                               parse_number(parts[2], "departments")});
    }
  }
  if (auto xs = kv.get("xor_departments")) {
    const auto parts = text::split(*xs, ',');
    if (parts.size() != 2) throw ConfigError("xor_departments needs two codes");
    c.xor_first = std::string(text::trim(parts[0]));
    c.xor_second = std::string(text::trim(parts[1]));
  }
  // Defaults that name departments a custom list dropped no longer apply.
  auto known = [&](const std::string& code) {
    return std::any_of(c.departments.begin(), c.departments.end(), [&](const auto& d) { return d.code == code; });
  };
  std::erase_if(c.grade_coefficients, [&](const auto& e) { return !known(e.first); });
  for (auto& a : c.archetypes) std::erase_if(a.preference, [&](const auto& e) { return !known(e.first); });
  const auto coefs = kv.with_prefix("grade_coefficient");
  if (!coefs.empty()) {
    c.grade_coefficients.clear();
    for (const auto& [code, v] : coefs) c.grade_coefficients[code] = parse_number(v, "grade_coefficient");
  }
  const auto archetypes = kv.with_prefix("archetype");
  if (!archetypes.empty()) {
    c.archetypes.clear();
    for (const auto& [name, spec] : archetypes) {
      Archetype a;
      a.name = name;
      const auto bar = spec.find('|');
      a.weight = parse_number(spec.substr(0, bar), "archetype weight");
      if (bar != std::string::npos) {
        for (const auto& item : text::split(spec.substr(bar + 1), ',')) {
          if (text::trim(item).empty()) continue;
          const auto parts = text::split(text::trim(item), ':');
          if (parts.size() != 2) throw ConfigError("archetype preferences must be code:weight");
          a.preference[std::string(text::trim(parts[0]))] = parse_number(parts[1], "archetype preference");
        }
      }
      c.archetypes.push_back(std::move(a));
    }
  }
  validate(c);
  return c;
}

// Inverse of config_from: every effective value, for run manifests.
inline KeyValues to_key_values(const SynthConfig& c) {
  KeyValues kv;
  const auto num = [](double v) { return text::format_double(v); };
  kv.set("n_students", std::to_string(c.n_students));
  kv.set("seed", std::to_string(c.seed));
  kv.set("scenario", c.scenario == Scenario::logistic ? "logistic" : "xor");
  kv.set("dropout_rate", num(c.dropout_rate));
  kv.set("excluded_fraction", num(c.excluded_fraction));
  kv.set("xor_strength", num(c.xor_strength));
  kv.set("xor_departments", c.xor_first + "," + c.xor_second);
  kv.set("ability_weight", num(c.ability_weight));
  kv.set("major_focus", num(c.major_focus));
  kv.set("summer_probability", num(c.summer_probability));
  kv.set("first_cohort_year", std::to_string(c.first_cohort_year));
  kv.set("cohort_years", std::to_string(c.cohort_years));
  kv.set("required_department", c.required_department);
  kv.set("uniform_first_year", c.uniform_first_year ? "true" : "false");
  std::string deps;
  for (const auto& d : c.departments)
    deps += (deps.empty() ? "" : ",") + d.code + ":" + num(d.grade_mean) + ":" + num(d.grade_sd);
  kv.set("departments", deps);
  for (const auto& [code, v] : c.grade_coefficients) kv.set("grade_coefficient." + code, num(v));
  for (const auto& a : c.archetypes) {
    std::string spec = num(a.weight) + " |";
    bool first = true;
    for (const auto& [code, w] : a.preference) {
      spec += std::string(first ? " " : ", ") + code + ":" + num(w);
      first = false;
    }
    kv.set("archetype." + a.name, spec);
  }
  return kv;
}

}  // namespace gradeforest::synth
