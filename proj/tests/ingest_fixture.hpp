#pragma once

// Five hand-built students and their hand-computed datasets.
//
// S1 completes 18.5 credits, most of them in CHM. Window: 2000F + 2001W
//    (3.0 then 5.0 attempted). CHM 2.5 credits, mean(80, 90, 60); ENG 0.5, 45;
//    MAT 2.0, mean(70, 40).
// S2 attempts 5.5 credits by 2001W, passes 3.5, and is silent through the
//    horizon 2003F (8 empty semesters): dropout.
// S3 attempts only 1.5 credits: excluded.
// S4 attempts 6 credits but its last term 2003W is 2 semesters before the
//    horizon: excluded as right-censored.
// S5 passes 9 ENG and 9 MAT credits (the failed MAT 45 does not count); the tie
//    goes to ENG. Window: 2000F, 2001W, 2001S (3, 4, then 6 credits).

#include <sstream>
#include <string>

#include "gradeforest/dataset.hpp"
#include "gradeforest/ingest.hpp"

namespace ingest_fixture {

inline const char* const kRecords =
    "student_id,course_title,department,semester,credit_value,grade\n"
    "S1,CHM101,CHM,2000F,1.0,80\n"
    "S1,CHM102,CHM,2000F,0.5,90\n"
    "S1,MAT101,MAT,2000F,1.0,70\n"
    "S1,ENG101,ENG,2000F,0.5,45\n"
    "S1,CHM201,CHM,2001W,1.0,60\n"
    "S1,MAT201,MAT,2001W,1.0,40\n"
    "S1,CHM301,CHM,2001F,1.0,75\n"
    "S1,CHM302,CHM,2001F,1.0,85\n"
    "S1,MAT301,MAT,2001F,1.0,65\n"
    "S1,ENG201,ENG,2001F,1.0,55\n"
    "S1,CHM401,CHM,2002W,1.0,70\n"
    "S1,CHM402,CHM,2002W,1.0,72\n"
    "S1,MAT401,MAT,2002W,1.0,68\n"
    "S1,ENG301,ENG,2002W,1.0,58\n"
    "S1,CHM411,CHM,2002F,1.0,66\n"
    "S1,CHM412,CHM,2002F,1.0,77\n"
    "S1,MAT411,MAT,2002F,1.0,50\n"
    "S1,ENG311,ENG,2002F,1.0,49\n"
    "S1,CHM421,CHM,2003W,1.0,80\n"
    "S1,MAT421,MAT,2003W,1.0,60\n"
    "S1,CHM431,CHM,2003F,1.0,90\n"
    "S1,ENG331,ENG,2003F,1.0,70\n"
    "S2,MAT101,MAT,2000F,1.0,55\n"
    "S2,MAT102,MAT,2000F,1.0,65\n"
    "S2,ENG101,ENG,2000F,1.0,50\n"
    "S2,ENG102,ENG,2000F,1.0,30\n"
    "S2,MAT201,MAT,2001W,1.0,40\n"
    "S2,ENG201,ENG,2001W,0.5,60\n"
    "S3,ENG101,ENG,2001W,1.0,70\n"
    "S3,CHM101,CHM,2001W,0.5,80\n"
    "S4,MAT101,MAT,2002F,1.0,70\n"
    "S4,MAT102,MAT,2002F,1.0,75\n"
    "S4,CHM101,CHM,2002F,1.0,65\n"
    "S4,MAT201,MAT,2003W,1.0,80\n"
    "S4,CHM201,CHM,2003W,1.0,60\n"
    "S4,ENG201,ENG,2003W,1.0,55\n"
    "S5,ENG101,ENG,2000F,1.0,60\n"
    "S5,MAT101,MAT,2000F,1.0,62\n"
    "S5,ENG102,ENG,2000F,1.0,70\n"
    "S5,MAT102,MAT,2001W,1.0,58\n"
    "S5,ENG201,ENG,2001S,1.0,75\n"
    "S5,MAT201,MAT,2001S,1.0,45\n"
    "S5,ENG301,ENG,2001F,1.0,65\n"
    "S5,ENG302,ENG,2001F,1.0,66\n"
    "S5,ENG303,ENG,2001F,1.0,67\n"
    "S5,MAT301,MAT,2001F,1.0,70\n"
    "S5,MAT302,MAT,2001F,1.0,71\n"
    "S5,MAT303,MAT,2001F,1.0,72\n"
    "S5,ENG401,ENG,2002W,1.0,60\n"
    "S5,ENG402,ENG,2002W,1.0,61\n"
    "S5,ENG403,ENG,2002W,1.0,62\n"
    "S5,MAT401,MAT,2002W,1.0,80\n"
    "S5,MAT402,MAT,2002W,1.0,81\n"
    "S5,MAT403,MAT,2002W,1.0,82\n"
    "S5,MAT404,MAT,2002W,1.0,83\n";

inline const char* const kCompletion =
    "label,CHM,CHM G,ENG,ENG G,MAT,MAT G\n"
    "completed,2.5,76.66666666666667,0.5,45,2,55\n"
    "dropout,0,0,2.5,46.666666666666664,3,53.333333333333336\n"
    "completed,0,0,3,68.33333333333333,3,55\n";

inline const char* const kMajor =
    "label,CHM,CHM G,ENG,ENG G,MAT,MAT G\n"
    "CHM,2.5,76.66666666666667,0.5,45,2,55\n"
    "ENG,0,0,3,68.33333333333333,3,55\n";

inline const char* const kLabels[] = {"completed", "dropout", "excluded", "excluded", "completed"};

struct Outputs {
  std::string completion, major, audit;
};

inline Outputs run_once() {
  std::istringstream in(kRecords);
  const auto parsed = gradeforest::ingest::parse_records(in);
  const auto cohort = gradeforest::ingest::build_cohort(parsed.records);
  std::ostringstream c, m, a;
  gradeforest::write_dataset_csv(c, cohort.completion);
  gradeforest::write_dataset_csv(m, cohort.major);
  gradeforest::ingest::write_audit_jsonl(a, cohort.audit);
  return {c.str(), m.str(), a.str()};
}

// Empty string on success, otherwise a description of the first mismatch.
inline std::string check() {
  std::istringstream in(kRecords);
  const auto parsed = gradeforest::ingest::parse_records(in);
  if (!parsed.rejects.empty()) return "fixture rows were rejected";
  const auto cohort = gradeforest::ingest::build_cohort(parsed.records);
  if (cohort.audit.decisions.size() != 5) return "expected 5 students";
  for (std::size_t i = 0; i < 5; ++i)
    if (gradeforest::ingest::to_string(cohort.audit.decisions[i].label) != kLabels[i])
      return "student S" + std::to_string(i + 1) + " labeled " +
             gradeforest::ingest::to_string(cohort.audit.decisions[i].label);
  if (cohort.audit.decisions[0].major != "CHM" || cohort.audit.decisions[4].major != "ENG") return "wrong majors";
  const auto first = run_once();
  if (first.completion != kCompletion) return "completion dataset differs:\n" + first.completion;
  if (first.major != kMajor) return "major dataset differs:\n" + first.major;
  const auto second = run_once();
  if (first.completion != second.completion || first.major != second.major || first.audit != second.audit)
    return "rerun is not byte-identical";
  return "";
}

}  // namespace ingest_fixture
