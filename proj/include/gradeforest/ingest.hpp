#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <compare>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradeforest/dataset.hpp"
#include "gradeforest/errors.hpp"
#include "gradeforest/text.hpp"

namespace gradeforest::ingest {

enum class Term { winter = 0, summer = 1, fall = 2 };

struct Semester {
  int year = 0;
  Term term = Term::fall;

  // Position in the winter, summer, fall calendar.
  int ordinal() const { return year * 3 + static_cast<int>(term); }
  // Position in a winter, fall calendar; a summer term shares winter's slot.
  int ordinal_without_summer() const { return year * 2 + (term == Term::fall ? 1 : 0); }

  auto operator<=>(const Semester& o) const { return ordinal() <=> o.ordinal(); }
  bool operator==(const Semester& o) const { return ordinal() == o.ordinal(); }
};

// Accepts "2004F", "2004 Fall", "2004-W", "2004 summer" and similar.
inline std::optional<Semester> parse_semester(std::string_view s) {
  s = text::trim(s);
  if (s.size() < 5) return std::nullopt;
  auto year = text::parse_int<int>(s.substr(0, 4));
  if (!year) return std::nullopt;
  std::string rest;
  for (char c : s.substr(4))
    if (c != ' ' && c != '-' && c != '_') rest.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (rest == "w" || rest == "winter") return Semester{*year, Term::winter};
  if (rest == "s" || rest == "summer") return Semester{*year, Term::summer};
  if (rest == "f" || rest == "fall") return Semester{*year, Term::fall};
  return std::nullopt;
}

inline std::string format_semester(Semester s) {
  static constexpr char kCode[] = {'W', 'S', 'F'};
  return std::to_string(s.year) + kCode[static_cast<int>(s.term)];
}

struct GradeRecord {
  std::string student_id;
  std::string course_title;
  std::string department;
  Semester semester;
  double credit_value = 0.0;  // full-course equivalents
  double grade = 0.0;         // 0..100

  bool passed(double pass_threshold) const { return grade >= pass_threshold; }
  bool operator==(const GradeRecord&) const = default;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct ParsedRecords {
  std::vector<GradeRecord> records;
  std::vector<RejectedRow> rejects;
};

inline constexpr std::array<std::string_view, 6> kRecordColumns = {
    "student_id", "course_title", "department", "semester", "credit_value", "grade"};

// Reads `student_id,course_title,department,semester,credit_value,grade`
// (columns in any order). Bad rows are collected with their line numbers.
inline ParsedRecords parse_records(std::istream& in) {
  std::string line;
  if (!text::next_line(in, line)) return {};  // a zero-byte file holds no records
  const auto header = text::split_csv_line(line);
  std::array<std::size_t, 6> col{};
  std::vector<std::string> missing;
  for (std::size_t c = 0; c < kRecordColumns.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return text::trim(h) == kRecordColumns[c]; });
    if (it == header.end())
      missing.emplace_back(kRecordColumns[c]);
    else
      col[c] = static_cast<std::size_t>(it - header.begin());
  }
  if (!missing.empty()) {
    std::string msg = "missing column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }

  ParsedRecords out;
  std::size_t line_no = 1;
  while (text::next_line(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    auto reject = [&](std::string reason) { out.rejects.push_back({line_no, std::move(reason)}); };
    if (f.size() != header.size()) {
      reject("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
      continue;
    }
    GradeRecord r;
    r.student_id = std::string(text::trim(f[col[0]]));
    r.course_title = std::string(text::trim(f[col[1]]));
    r.department = std::string(text::trim(f[col[2]]));
    if (r.student_id.empty()) {
      reject("missing student_id");
      continue;
    }
    if (r.department.empty()) {
      reject("missing department");
      continue;
    }
    const auto sem = parse_semester(f[col[3]]);
    if (!sem) {
      reject("unparseable semester '" + f[col[3]] + "'");
      continue;
    }
    r.semester = *sem;
    const auto credit = text::parse_double(f[col[4]]);
    if (!credit || !std::isfinite(*credit)) {
      reject("unparseable credit_value");
      continue;
    }
    if (*credit <= 0.0) {
      reject("credit_value must be positive");
      continue;
    }
    r.credit_value = *credit;
    const auto grade = text::parse_double(f[col[5]]);
    if (!grade || !std::isfinite(*grade)) {
      reject("unparseable grade");
      continue;
    }
    if (*grade < 0.0 || *grade > 100.0) {
      reject("grade out of range");
      continue;
    }
    r.grade = *grade;
    out.records.push_back(std::move(r));
  }
  return out;
}

inline void write_records_csv(std::ostream& out, const std::vector<GradeRecord>& records) {
  out << "student_id,course_title,department,semester,credit_value,grade\n";
  for (const auto& r : records)
    out << text::csv_escape(r.student_id) << ',' << text::csv_escape(r.course_title) << ','
        << text::csv_escape(r.department) << ',' << format_semester(r.semester) << ','
        << text::format_double(r.credit_value) << ',' << text::format_double(r.grade) << '\n';
}

struct IngestOptions {
  double pass_threshold = 50.0;      // grade at or above which a course counts as completed
  double window_credits = 5.0;       // attempted credits that close the first-year window
  double min_attempted_credits = 5.0;
  double completion_credits = 18.0;
  int dropout_gap_semesters = 3;
  bool summer_in_calendar = true;
  std::optional<Semester> horizon;   // default: latest semester in the records
};

inline constexpr double kCreditEps = 1e-9;

struct StudentHistory {
  std::string student_id;
  std::vector<GradeRecord> records;  // sorted by semester, file order within a semester
  double attempted_credits = 0.0;
  double completed_credits = 0.0;
};

// Groups records by student (ascending id) with per-student totals.
inline std::vector<StudentHistory> group_histories(const std::vector<GradeRecord>& records,
                                                   const IngestOptions& options = {}) {
  std::map<std::string, StudentHistory> by_id;
  for (const auto& r : records) {
    auto& h = by_id[r.student_id];
    h.student_id = r.student_id;
    h.records.push_back(r);
  }
  std::vector<StudentHistory> out;
  out.reserve(by_id.size());
  for (auto& [_, h] : by_id) {
    std::stable_sort(h.records.begin(), h.records.end(),
                     [](const GradeRecord& a, const GradeRecord& b) { return a.semester < b.semester; });
    for (const auto& r : h.records) {
      h.attempted_credits += r.credit_value;
      if (r.passed(options.pass_threshold)) h.completed_credits += r.credit_value;
    }
    out.push_back(std::move(h));
  }
  return out;
}

struct FirstYearWindow {
  std::vector<GradeRecord> records;
};

// Every semester up to and including the first one at which cumulative
// attempted credits reach `window_credits`; the whole history if never.
inline FirstYearWindow first_year_window(const StudentHistory& history, double window_credits = 5.0) {
  FirstYearWindow w;
  double attempted = 0.0;
  std::size_t i = 0;
  while (i < history.records.size()) {
    const Semester sem = history.records[i].semester;
    for (; i < history.records.size() && history.records[i].semester == sem; ++i) {
      attempted += history.records[i].credit_value;
      w.records.push_back(history.records[i]);
    }
    if (attempted + kCreditEps >= window_credits) break;
  }
  return w;
}

enum class Completion { completed, dropout, excluded };

inline const char* to_string(Completion c) {
  switch (c) {
    case Completion::completed: return "completed";
    case Completion::dropout: return "dropout";
    default: return "excluded";
  }
}

struct LabelDecision {
  Completion label = Completion::excluded;
  std::string reason;
};

inline int semester_gap(Semester last, Semester horizon, bool summer_in_calendar) {
  return summer_in_calendar ? horizon.ordinal() - last.ordinal()
                            : horizon.ordinal_without_summer() - last.ordinal_without_summer();
}

// completed iff >= 18 completed credits; dropout iff >= 5 attempted, < 18
// completed and at least 3 empty calendar semesters between the last record
// and the horizon; excluded otherwise (too few credits, or right-censored).
inline LabelDecision label_completion(const StudentHistory& history, Semester horizon,
                                      const IngestOptions& options = {}) {
  if (history.records.empty()) throw ContractError("label_completion needs a nonempty history");
  const auto credits = [](double v) { return text::format_double(v); };
  if (history.completed_credits + kCreditEps >= options.completion_credits)
    return {Completion::completed, "completed " + credits(history.completed_credits) + " credits"};
  if (history.attempted_credits + kCreditEps < options.min_attempted_credits)
    return {Completion::excluded, "attempted only " + credits(history.attempted_credits) + " credits"};
  const int gap = semester_gap(history.records.back().semester, horizon, options.summer_in_calendar);
  if (gap >= options.dropout_gap_semesters)
    return {Completion::dropout, "completed " + credits(history.completed_credits) + " credits, inactive for " +
                                     std::to_string(gap) + " semesters"};
  return {Completion::excluded, "right-censored: last record " + format_semester(history.records.back().semester) +
                                    " is within " + std::to_string(options.dropout_gap_semesters) +
                                    " semesters of the horizon"};
}

// Department with the most completed credits over the whole history; ties go
// to the lexicographically smallest code.
inline std::string label_major(const StudentHistory& history, const IngestOptions& options = {}) {
  if (history.completed_credits + kCreditEps < options.completion_credits)
    throw ContractError("label_major called for student '" + history.student_id + "' who did not complete");
  std::map<std::string, double> credits;
  for (const auto& r : history.records)
    if (r.passed(options.pass_threshold)) credits[r.department] += r.credit_value;
  std::string best;
  double best_credits = -1.0;
  for (const auto& [dept, c] : credits)
    if (c > best_credits + kCreditEps) {
      best = dept;
      best_credits = c;
    }
  return best;
}

// Predictor names for a department list: "<D>" for attempted credits and
// "<D> G" for the mean grade.
inline std::vector<std::string> feature_names(const std::vector<std::string>& departments) {
  std::vector<std::string> names;
  for (const auto& d : departments) {
    names.push_back(d);
    names.push_back(d + " G");
  }
  return names;
}

// Slot 2d holds attempted credits in department d within the window, slot
// 2d + 1 the unweighted mean grade there (0 when no course was taken).
inline std::vector<double> build_features(const FirstYearWindow& window, const std::vector<std::string>& departments) {
  std::map<std::string, std::size_t> index;
  for (std::size_t d = 0; d < departments.size(); ++d) index[departments[d]] = d;
  std::vector<double> credits(departments.size(), 0.0), grade_sum(departments.size(), 0.0);
  std::vector<std::size_t> courses(departments.size(), 0);
  for (const auto& r : window.records) {
    auto it = index.find(r.department);
    if (it == index.end()) throw InputError("unknown department '" + r.department + "'");
    credits[it->second] += r.credit_value;
    grade_sum[it->second] += r.grade;
    ++courses[it->second];
  }
  std::vector<double> x(2 * departments.size(), 0.0);
  for (std::size_t d = 0; d < departments.size(); ++d) {
    x[2 * d] = credits[d];
    x[2 * d + 1] = courses[d] ? grade_sum[d] / static_cast<double>(courses[d]) : 0.0;
  }
  return x;
}

struct StudentDecision {
  std::string student_id;
  Completion label = Completion::excluded;
  std::string reason;
  std::string major;  // completed students only
};

struct CohortAudit {
  std::size_t completed = 0;
  std::size_t dropout = 0;
  std::size_t excluded = 0;
  std::vector<StudentDecision> decisions;  // ascending student id
};

struct Cohort {
  Dataset completion;  // classes: completed, dropout
  Dataset major;       // classes: sorted major department codes
  CohortAudit audit;
  std::vector<std::string> departments;
  std::optional<Semester> horizon;
};

inline Semester latest_semester(const std::vector<GradeRecord>& records) {
  Semester s = records.front().semester;
  for (const auto& r : records) s = std::max(s, r.semester);
  return s;
}

// Labels every student and builds the completion and major datasets from
// first-year windows. `departments` fixes the predictor layout; by default it
// is every department code in the records, sorted.
inline Cohort build_cohort(const std::vector<GradeRecord>& records, const IngestOptions& options = {},
                           std::vector<std::string> departments = {}) {
  Cohort cohort;
  if (departments.empty()) {
    std::set<std::string> codes;
    for (const auto& r : records) codes.insert(r.department);
    departments.assign(codes.begin(), codes.end());
  }
  cohort.departments = departments;
  const auto names = feature_names(departments);

  const auto histories = group_histories(records, options);
  if (!records.empty()) cohort.horizon = options.horizon.value_or(latest_semester(records));

  struct Row {
    std::vector<double> x;
    Completion label;
    std::string major;
  };
  std::vector<Row> rows;
  std::set<std::string> majors;
  for (const auto& h : histories) {
    const auto decision = label_completion(h, *cohort.horizon, options);
    StudentDecision sd{h.student_id, decision.label, decision.reason, {}};
    switch (decision.label) {
      case Completion::completed: ++cohort.audit.completed; break;
      case Completion::dropout: ++cohort.audit.dropout; break;
      case Completion::excluded: ++cohort.audit.excluded; break;
    }
    if (decision.label != Completion::excluded) {
      Row row{build_features(first_year_window(h, options.window_credits), departments), decision.label, {}};
      if (decision.label == Completion::completed) {
        row.major = label_major(h, options);
        sd.major = row.major;
        majors.insert(row.major);
      }
      rows.push_back(std::move(row));
    }
    cohort.audit.decisions.push_back(std::move(sd));
  }

  cohort.completion = Dataset(names, {"completed", "dropout"});
  cohort.major = Dataset(names, std::vector<std::string>(majors.begin(), majors.end()));
  std::map<std::string, ClassIndex> major_index;
  for (const auto& m : majors) major_index.emplace(m, major_index.size());
  for (const auto& row : rows) {
    cohort.completion.add_row(row.x, row.label == Completion::completed ? 0 : 1);
    if (row.label == Completion::completed) cohort.major.add_row(row.x, major_index.at(row.major));
  }
  return cohort;
}

// One JSON object per student: {"student_id", "label", "reason"[, "major"]}.
inline void write_audit_jsonl(std::ostream& out, const CohortAudit& audit) {
  for (const auto& d : audit.decisions) {
    nlohmann::ordered_json j;
    j["student_id"] = d.student_id;
    j["label"] = to_string(d.label);
    j["reason"] = d.reason;
    if (d.label == Completion::completed) j["major"] = d.major;
    out << j.dump() << '\n';
  }
}

}  // namespace gradeforest::ingest
