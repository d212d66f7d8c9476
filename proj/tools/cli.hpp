#pragma once

// Command-line front end: synth, ingest, split, train, evaluate, importance.
// Every command takes flags and/or `--config FILE` (flat key = value; flags
// win), and writes a manifest of the effective parameters next to its output.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gradeforest/baseline.hpp"
#include "gradeforest/config.hpp"
#include "gradeforest/dataset.hpp"
#include "gradeforest/forest.hpp"
#include "gradeforest/importance.hpp"
#include "gradeforest/ingest.hpp"
#include "gradeforest/model.hpp"
#include "gradeforest/sampling.hpp"
#include "gradeforest/synthgen.hpp"

namespace gradeforest::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kSchema = 2,
  kDegenerate = 3,
  kTaskMismatch = 4,
  kNumeric = 5,
};

inline constexpr std::string_view kVersion = "0.1.0";

namespace fs = std::filesystem;

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

inline std::string require(const KeyValues& kv, const std::string& key, const std::string& why = "") {
  auto v = kv.get(key);
  if (!v || v->empty()) throw ConfigError("missing required '" + key + "'" + (why.empty() ? "" : " (" + why + ")"));
  return *v;
}

inline std::uint64_t require_seed(const KeyValues& kv) {
  if (!kv.has("seed")) throw ConfigError("an explicit --seed is required; runs are never seeded from the clock");
  return kv.get_int<std::uint64_t>("seed", 0);
}

inline unsigned workers_from(const KeyValues& kv) {
  return kv.get_int<unsigned>("workers", std::max(1u, std::thread::hardware_concurrency()));
}

inline void write_manifest(const std::string& path, const std::string& command, KeyValues kv) {
  kv.set("command", command);
  kv.set("version", std::string(kVersion));
  auto out = open_out(path);
  out << "# gradeforest run manifest\n";
  kv.write(out);
}

// ---- split files -------------------------------------------------------

inline std::string join_rows(const std::vector<RowIndex>& rows) {
  std::string s;
  for (std::size_t i = 0; i < rows.size(); ++i) s += (i ? " " : "") + std::to_string(rows[i]);
  return s;
}

inline std::vector<RowIndex> parse_rows(const std::string& s) {
  std::vector<RowIndex> rows;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    auto v = text::parse_int<RowIndex>(tok);
    if (!v) throw SchemaError("bad row index '" + tok + "' in split file");
    rows.push_back(*v);
  }
  return rows;
}

struct SplitFile {
  std::size_t n_rows = 0;
  std::vector<RowIndex> train, validation, test;

  std::vector<RowIndex> rows(const std::string& which) const {
    if (which == "train") return train;
    if (which == "validation") return validation;
    if (which == "test") return test;
    throw ConfigError("unknown row set '" + which + "' (expected train, validation, test or all)");
  }
};

inline SplitFile read_split(const std::string& path, std::size_t expected_rows) {
  auto in = open_in(path);
  const auto kv = KeyValues::parse(in);
  SplitFile s;
  s.n_rows = kv.get_int<std::size_t>("n_rows", 0);
  if (s.n_rows != expected_rows)
    throw SchemaError("split file covers " + std::to_string(s.n_rows) + " rows but the dataset has " +
                      std::to_string(expected_rows));
  s.train = parse_rows(kv.get_or("train", ""));
  s.validation = parse_rows(kv.get_or("validation", ""));
  s.test = parse_rows(kv.get_or("test", ""));
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (auto r : *part)
      if (r >= expected_rows) throw SchemaError("split file row index out of range");
  return s;
}

// Rows named by `rows` (default: test with a split, all without), plus the
// training rows of the split (all rows without one).
struct RowSelection {
  std::string name;
  std::vector<RowIndex> rows;
  std::vector<RowIndex> train;
};

inline RowSelection select_rows(const KeyValues& kv, const Dataset& data) {
  RowSelection sel;
  const auto split_path = kv.get("split");
  sel.name = kv.get_or("rows", split_path ? "test" : "all");
  if (!split_path) {
    if (sel.name != "all") throw ConfigError("--rows " + sel.name + " needs --split");
    sel.rows = data.all_rows();
    sel.train = sel.rows;
    return sel;
  }
  const auto split = read_split(*split_path, data.n_rows());
  sel.train = split.train;
  sel.rows = sel.name == "all" ? data.all_rows() : split.rows(sel.name);
  return sel;
}

inline Dataset load_dataset(const std::string& path, const std::vector<std::string>& class_order = {}) {
  auto in = open_in(path);
  return read_dataset_csv(in, class_order);
}

inline Model load_model(const std::string& path) {
  auto in = open_in(path);
  return read_model(in);
}

// ---- commands ----------------------------------------------------------

inline int cmd_synth(const KeyValues& kv, std::ostream& out, std::ostream&) {
  const auto dir = require(kv, "out");
  const auto config = synth::config_from(kv);
  const auto result = synth::generate(config);
  {
    auto f = open_out((fs::path(dir) / "records.csv").string());
    ingest::write_records_csv(f, result.records);
  }
  {
    auto f = open_out((fs::path(dir) / "truth.csv").string());
    synth::write_truth_csv(f, result.truth);
  }
  auto manifest = synth::to_key_values(config);
  manifest.set("out", dir);
  manifest.set("records", std::to_string(result.records.size()));
  manifest.set("dropout_intercept", text::format_double(result.dropout_intercept));
  write_manifest((fs::path(dir) / "synth.manifest").string(), "synth", manifest);
  out << "synth: " << config.n_students << " students, " << result.records.size() << " records -> " << dir << '\n';
  return kOk;
}

inline int cmd_ingest(const KeyValues& kv, std::ostream& out, std::ostream& err) {
  const auto input = require(kv, "input");
  const auto dir = require(kv, "out");
  ingest::IngestOptions opt;
  opt.pass_threshold = kv.get_double("pass_threshold", opt.pass_threshold);
  opt.summer_in_calendar = !kv.get_bool("exclude_summer", false);
  if (auto h = kv.get("horizon")) {
    opt.horizon = ingest::parse_semester(*h);
    if (!opt.horizon) throw ConfigError("bad horizon semester '" + *h + "'");
  }
  std::vector<std::string> departments;
  if (auto d = kv.get("departments"))
    for (const auto& code : text::split(*d, ',')) departments.emplace_back(text::trim(code));

  auto in = open_in(input);
  const auto parsed = ingest::parse_records(in);
  if (parsed.records.empty()) err << "warning: no usable records in '" << input << "'\n";
  for (const auto& r : parsed.rejects) err << "warning: line " << r.line << " rejected: " << r.reason << '\n';
  const auto cohort = ingest::build_cohort(parsed.records, opt, departments);

  const fs::path base(dir);
  {
    auto f = open_out((base / "completion.csv").string());
    write_dataset_csv(f, cohort.completion);
  }
  {
    auto f = open_out((base / "major.csv").string());
    write_dataset_csv(f, cohort.major);
  }
  {
    auto f = open_out((base / "audit.jsonl").string());
    ingest::write_audit_jsonl(f, cohort.audit);
  }
  {
    auto f = open_out((base / "rejects.csv").string());
    f << "line,reason\n";
    for (const auto& r : parsed.rejects) f << r.line << ',' << text::csv_escape(r.reason) << '\n';
  }
  KeyValues manifest = kv;
  manifest.set("pass_threshold", text::format_double(opt.pass_threshold));
  manifest.set("exclude_summer", opt.summer_in_calendar ? "false" : "true");
  manifest.set("horizon", cohort.horizon ? ingest::format_semester(*cohort.horizon) : "");
  manifest.set("records", std::to_string(parsed.records.size()));
  manifest.set("rejected", std::to_string(parsed.rejects.size()));
  manifest.set("students_completed", std::to_string(cohort.audit.completed));
  manifest.set("students_dropout", std::to_string(cohort.audit.dropout));
  manifest.set("students_excluded", std::to_string(cohort.audit.excluded));
  manifest.set("departments", [&] {
    std::string s;
    for (const auto& d : cohort.departments) s += (s.empty() ? "" : ",") + d;
    return s;
  }());
  write_manifest((base / "ingest.manifest").string(), "ingest", manifest);
  out << "ingest: " << parsed.records.size() << " records (" << parsed.rejects.size() << " rejected); students: "
      << cohort.audit.completed << " completed, " << cohort.audit.dropout << " dropout, " << cohort.audit.excluded
      << " excluded\n";
  return kOk;
}

inline int cmd_split(const KeyValues& kv, std::ostream& out, std::ostream& err) {
  const auto data_path = require(kv, "data");
  const auto out_path = require(kv, "out");
  const auto seed = require_seed(kv);
  SplitRatios ratios;
  if (auto r = kv.get("ratios")) {
    const auto parts = text::split(*r, ',');
    if (parts.size() != 3) throw ConfigError("--ratios needs three comma-separated fractions");
    double v[3];
    for (int i = 0; i < 3; ++i) {
      auto d = text::parse_double(parts[i]);
      if (!d) throw ConfigError("bad ratio '" + parts[i] + "'");
      v[i] = *d;
    }
    ratios = {v[0], v[1], v[2]};
  }
  const bool stratify = !kv.get_bool("no_stratify", false);
  const auto data = load_dataset(data_path);
  const auto split = stratified_split(data, ratios, seed, stratify);
  for (const auto& w : split.warnings) err << "warning: " << w << '\n';

  KeyValues file = kv;
  file.set("ratios", text::format_double(ratios.train) + "," + text::format_double(ratios.validation) + "," +
                         text::format_double(ratios.test));
  file.set("stratify", stratify ? "true" : "false");
  file.set("n_rows", std::to_string(data.n_rows()));
  file.set("train", join_rows(split.train));
  file.set("validation", join_rows(split.validation));
  file.set("test", join_rows(split.test));
  write_manifest(out_path, "split", file);
  out << "split: " << split.train.size() << " train, " << split.validation.size() << " validation, "
      << split.test.size() << " test -> " << out_path << '\n';
  return kOk;
}

inline ForestConfig forest_config_from(const KeyValues& kv) {
  ForestConfig c = preset(require(kv, "preset"));
  c.seed = require_seed(kv);
  c.beta = kv.get_int<std::size_t>("beta", c.beta);
  c.n_trees = kv.get_int<std::size_t>("trees", c.n_trees);
  c.sample_fraction = kv.get_double("fraction", c.sample_fraction);
  c.with_replacement = kv.get_bool("with_replacement", c.with_replacement);
  if (kv.has("p")) {
    if (c.feature_mode == FeatureMode::all) throw ConfigError("--p applies to rf2 and rf3; rf1 searches every feature");
    c.features_per_node = kv.get_int<std::size_t>("p", 0);
  }
  return c;
}

inline TrainOptions train_options_from(const KeyValues& kv) {
  TrainOptions o;
  o.learning_rate = kv.get_double("learning_rate", o.learning_rate);
  o.max_iterations = kv.get_int<std::size_t>("max_iterations", o.max_iterations);
  o.gradient_tolerance = kv.get_double("tolerance", o.gradient_tolerance);
  o.l2_penalty = kv.get_double("l2", o.l2_penalty);
  return o;
}

inline int cmd_train(const KeyValues& kv, std::ostream& out, std::ostream&) {
  const auto data_path = require(kv, "data");
  const auto out_path = require(kv, "out");
  const bool has_preset = kv.has("preset");
  const bool has_model = kv.has("model");
  if (has_preset == has_model) throw ConfigError("give exactly one of --preset or --model");

  const auto data = load_dataset(data_path);
  auto sel = select_rows(kv, data);
  const auto& rows = sel.train;
  if (rows.empty()) throw DegenerateDataError("no training rows");
  const auto counts = class_counts(data, rows);
  if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2)
    throw DegenerateDataError("training rows hold a single class");

  KeyValues manifest = kv;
  manifest.set("train_rows", std::to_string(rows.size()));
  Model model;
  if (has_preset) {
    const auto config = forest_config_from(kv);
    const auto workers = workers_from(kv);
    auto forest = fit_forest(data, rows, config, workers);
    const auto& c = forest.config;
    manifest.set("preset", c.name);
    manifest.set("n_trees", std::to_string(c.n_trees));
    manifest.set("sample_fraction", text::format_double(c.sample_fraction));
    manifest.set("with_replacement", c.with_replacement ? "true" : "false");
    manifest.set("feature_mode", c.feature_mode == FeatureMode::all ? "all" : "per_node_random");
    manifest.set("features_per_node", std::to_string(resolved_features_per_node(c, data.n_features())));
    manifest.set("beta", std::to_string(c.beta));
    manifest.set("seed", std::to_string(c.seed));
    manifest.set("workers", std::to_string(workers));
    out << "train: " << c.name << " with " << c.n_trees << " trees on " << rows.size() << " rows\n";
    model = std::move(forest);
  } else {
    const auto kind = require(kv, "model");
    const auto opt = train_options_from(kv);
    manifest.set("learning_rate", text::format_double(opt.learning_rate));
    manifest.set("max_iterations", std::to_string(opt.max_iterations));
    manifest.set("tolerance", text::format_double(opt.gradient_tolerance));
    manifest.set("l2", text::format_double(opt.l2_penalty));
    if (kind == "logit" || kind == "logistic") {
      model = fit_logistic(data, rows, opt);
    } else if (kind == "multinomial") {
      model = fit_multinomial(data, rows, opt);
    } else {
      throw ConfigError("unknown --model '" + kind + "' (expected logit or multinomial)");
    }
    out << "train: " << kind << " on " << rows.size() << " rows\n";
  }
  {
    auto f = open_out(out_path);
    write_model(f, model);
  }
  write_manifest(out_path + ".manifest", "train", manifest);
  return kOk;
}

inline std::string format_report(const EvaluationReport& r, const std::vector<std::string>& classes,
                                 const std::string& rows_name) {
  std::ostringstream s;
  s << "rows: " << rows_name << " (n=" << r.n_rows << ")\n";
  s << "overall_accuracy: " << text::format_double(r.overall_accuracy) << '\n';
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::size_t n = 0;
    for (auto v : r.confusion[c]) n += v;
    s << "class " << classes[c] << ": accuracy "
      << (std::isnan(r.per_class_accuracy[c]) ? std::string("NA") : text::format_double(r.per_class_accuracy[c]))
      << " (n=" << n << ")\n";
  }
  s << "confusion (rows actual, columns predicted):\n";
  for (std::size_t c = 0; c < classes.size(); ++c) {
    s << classes[c] << ':';
    for (auto v : r.confusion[c]) s << ' ' << v;
    s << '\n';
  }
  return s.str();
}

inline void write_report_csv(std::ostream& out, const EvaluationReport& r, const std::vector<std::string>& classes) {
  out << "class,n,accuracy";
  for (const auto& c : classes) out << ",pred_" << text::csv_escape(c);
  out << '\n';
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::size_t n = 0;
    for (auto v : r.confusion[c]) n += v;
    out << text::csv_escape(classes[c]) << ',' << n << ','
        << (std::isnan(r.per_class_accuracy[c]) ? std::string("NA") : text::format_double(r.per_class_accuracy[c]));
    for (auto v : r.confusion[c]) out << ',' << v;
    out << '\n';
  }
  out << "overall," << r.n_rows << ',' << text::format_double(r.overall_accuracy);
  for (std::size_t c = 0; c < classes.size(); ++c) out << ',';
  out << '\n';
}

inline void check_features(const Schema& model, const Dataset& data) {
  if (model.feature_names != data.feature_names())
    throw SchemaError("dataset columns do not match the model's features");
}

inline int cmd_evaluate(const KeyValues& kv, std::ostream& out, std::ostream&) {
  const auto data_path = require(kv, "data");
  const bool has_model = kv.has("model");
  const bool has_dummy = kv.has("dummy");
  if (has_model == has_dummy) throw ConfigError("give exactly one of --model or --dummy");

  EvaluationReport report;
  std::vector<std::string> classes;
  std::string rows_name;
  KeyValues manifest = kv;
  if (has_model) {
    const auto model = load_model(require(kv, "model"));
    const auto& schema = schema_of(model);
    const auto data = load_dataset(data_path, schema.class_names);
    check_features(schema, data);
    const auto sel = select_rows(kv, data);
    report = evaluate([&](std::span<const double> x) { return predict(model, x); }, data, sel.rows);
    classes = data.class_names();
    rows_name = sel.name;
  } else {
    const auto data = load_dataset(data_path);
    const auto sel = select_rows(kv, data);
    const auto counts = class_counts(data, sel.train);
    const auto kind = require(kv, "dummy");
    if (kind == "majority") {
      const ClassIndex majority = detail::majority_of(counts);
      report = evaluate([&](std::span<const double>) { return majority; }, data, sel.rows);
    } else if (kind == "weighted") {
      // Independent draws from the training class proportions.
      Rng rng(require_seed(kv));
      std::vector<double> weights(counts.begin(), counts.end());
      report = evaluate([&](std::span<const double>) { return rng.weighted(weights); }, data, sel.rows);
      double expected = 0.0;
      const auto eval_counts = class_counts(data, sel.rows);
      double n_train = 0.0;
      for (auto c : counts) n_train += double(c);
      for (std::size_t c = 0; c < counts.size(); ++c)
        expected += double(counts[c]) / n_train * double(eval_counts[c]) / double(sel.rows.size());
      manifest.set("expected_accuracy", text::format_double(expected));
    } else {
      throw ConfigError("unknown --dummy '" + kind + "' (expected majority or weighted)");
    }
    classes = data.class_names();
    rows_name = sel.name;
  }

  const auto text_report = format_report(report, classes, rows_name);
  out << text_report;
  if (auto prefix = kv.get("out")) {
    {
      auto f = open_out(*prefix + ".txt");
      f << text_report;
    }
    {
      auto f = open_out(*prefix + ".csv");
      write_report_csv(f, report, classes);
    }
    manifest.set("rows", rows_name);
    manifest.set("overall_accuracy", text::format_double(report.overall_accuracy));
    write_manifest(*prefix + ".manifest", "evaluate", manifest);
  }
  return kOk;
}

inline int cmd_importance(const KeyValues& kv, std::ostream& out, std::ostream& err) {
  const auto model = load_model(require(kv, "model"));
  const auto* forest = std::get_if<Forest>(&model);
  if (!forest) throw TaskMismatchError("variable importance needs a forest model");
  const auto data = load_dataset(require(kv, "data"), forest->schema.class_names);
  check_features(forest->schema, data);
  const auto prefix = require(kv, "out");
  const auto method = kv.get_or("method", "permutation");
  std::size_t top = kv.get_int<std::size_t>("top", 15);
  if (top > data.n_features()) {
    err << "warning: --top " << top << " exceeds the " << data.n_features() << " features; showing all\n";
    top = data.n_features();
  }

  KeyValues manifest = kv;
  ImportanceReport report;
  if (method == "permutation") {
    const auto seed = require_seed(kv);
    const auto sel = select_rows(kv, data);
    const auto reps = kv.get_int<std::size_t>("permutations", 1);
    report = permutation_importance(*forest, data, sel.rows, seed, reps, workers_from(kv));
    manifest.set("rows", sel.name);
    manifest.set("permutations", std::to_string(reps));
  } else if (method == "gini") {
    report = gini_importance(*forest);
    if (mixed_feature_types(data))
      err << "warning: predictors are of mixed types; Gini importance overestimates predictors with many "
             "split points. Prefer --method permutation.\n";
  } else {
    throw ConfigError("unknown --method '" + method + "' (expected permutation or gini)");
  }

  const auto ranked = top_k(report, top);
  {
    auto f = open_out(prefix + ".csv");
    write_importance_csv(f, ranked);
  }
  {
    auto f = open_out(prefix + ".svg");
    write_importance_svg(f, ranked, (method == "gini" ? "Gini decrease importance" : "Permutation decrease importance") +
                                        std::string(" (top ") + std::to_string(top) + ")");
  }
  {
    auto f = open_out(prefix + ".per_tree.csv");
    f << "tree";
    for (const auto& name : report.feature_names) f << ',' << text::csv_escape(name);
    f << '\n';
    for (std::size_t t = 0; t < report.per_tree.size(); ++t) {
      f << t;
      for (double v : report.per_tree[t]) f << ',' << text::format_double(v);
      f << '\n';
    }
  }
  manifest.set("method", method);
  manifest.set("top", std::to_string(top));
  write_manifest(prefix + ".manifest", "importance", manifest);
  for (std::size_t i = 0; i < ranked.size(); ++i)
    out << i + 1 << ". " << ranked[i].name << "  " << text::format_double(ranked[i].mean) << '\n';
  return kOk;
}

// ---- dispatch ----------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Random-forest and logistic baselines for student-record classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, bool>> flags;
  std::map<std::string, CLI::App*> subs;

  auto add_command = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    subs[name] = sub;
    sub->add_option("--config", values[name]["config"], "key = value file; flags override it");
    return sub;
  };
  auto opt = [&](const std::string& cmd, const std::string& flag, const std::string& key, const std::string& help) {
    subs[cmd]->add_option(flag, values[cmd][key], help);
  };
  auto flag = [&](const std::string& cmd, const std::string& name, const std::string& key, const std::string& help) {
    subs[cmd]->add_flag(name, flags[cmd][key], help);
  };

  add_command("synth", "Generate a synthetic grade-record file and its ground truth");
  opt("synth", "--out", "out", "Output directory");
  opt("synth", "--seed", "seed", "Random seed (required here or in the config)");
  opt("synth", "--n-students", "n_students", "Number of students");
  opt("synth", "--scenario", "scenario", "logistic or xor");

  add_command("ingest", "Turn grade records into completion and major datasets");
  opt("ingest", "--input", "input", "Grade-record CSV");
  opt("ingest", "--out", "out", "Output directory");
  opt("ingest", "--pass-threshold", "pass_threshold", "Passing grade (default 50)");
  opt("ingest", "--horizon", "horizon", "Last observed semester, e.g. 2010F (default: latest in file)");
  opt("ingest", "--departments", "departments", "Comma-separated department order (default: sorted codes)");
  flag("ingest", "--exclude-summer", "exclude_summer", "Leave summer terms out of the inactivity calendar");

  add_command("split", "Split a dataset into train/validation/test");
  opt("split", "--data", "data", "Dataset CSV");
  opt("split", "--out", "out", "Split file to write");
  opt("split", "--seed", "seed", "Random seed");
  opt("split", "--ratios", "ratios", "train,validation,test (default 0.9,0.05,0.05)");
  flag("split", "--no-stratify", "no_stratify", "Shuffle all rows together instead of per class");

  add_command("train", "Fit a forest preset or a logistic baseline");
  opt("train", "--data", "data", "Dataset CSV");
  opt("train", "--split", "split", "Split file; trains on its train rows");
  opt("train", "--preset", "preset", "rf1, rf2 or rf3");
  opt("train", "--model", "model", "logit or multinomial");
  opt("train", "--seed", "seed", "Random seed (forests)");
  opt("train", "--beta", "beta", "Minimum node size for splitting");
  opt("train", "--p", "p", "Predictors searched per node (rf2, rf3)");
  opt("train", "--trees", "trees", "Number of trees");
  opt("train", "--fraction", "fraction", "Subsample fraction per tree");
  opt("train", "--workers", "workers", "Threads used for fitting");
  opt("train", "--learning-rate", "learning_rate", "Gradient-descent step size");
  opt("train", "--max-iterations", "max_iterations", "Gradient-descent iteration cap");
  opt("train", "--tolerance", "tolerance", "Gradient-norm stopping tolerance");
  opt("train", "--l2", "l2", "L2 penalty on slopes");
  opt("train", "--out", "out", "Model file to write");
  flag("train", "--with-replacement", "with_replacement", "Bootstrap with replacement");

  add_command("evaluate", "Accuracy, per-class accuracy and confusion matrix");
  opt("evaluate", "--model", "model", "Model file");
  opt("evaluate", "--dummy", "dummy", "majority or weighted baseline instead of a model");
  opt("evaluate", "--data", "data", "Dataset CSV");
  opt("evaluate", "--split", "split", "Split file");
  opt("evaluate", "--rows", "rows", "train, validation, test or all");
  opt("evaluate", "--seed", "seed", "Random seed (weighted dummy)");
  opt("evaluate", "--out", "out", "Report prefix (writes .txt, .csv, .manifest)");

  add_command("importance", "Permutation or Gini variable importance of a forest");
  opt("importance", "--model", "model", "Forest model file");
  opt("importance", "--data", "data", "Dataset CSV");
  opt("importance", "--split", "split", "Split file");
  opt("importance", "--rows", "rows", "train, validation, test or all");
  opt("importance", "--method", "method", "permutation or gini");
  opt("importance", "--top", "top", "Number of features to report (default 15)");
  opt("importance", "--seed", "seed", "Random seed (permutation)");
  opt("importance", "--permutations", "permutations", "Independent shuffles per predictor");
  opt("importance", "--workers", "workers", "Threads");
  opt("importance", "--out", "out", "Report prefix (writes .csv, .svg, .per_tree.csv, .manifest)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      KeyValues kv;
      const auto& config_path = values[name]["config"];
      if (!config_path.empty()) {
        auto in = open_in(config_path);
        kv = KeyValues::parse(in);
      }
      for (const auto& [key, value] : values[name])
        if (key != "config" && sub->count("--" + [&] {
              std::string f = key;
              std::replace(f.begin(), f.end(), '_', '-');
              return f;
            }()) > 0)
          kv.set(key, value);
      for (const auto& [key, on] : flags[name])
        if (on) kv.set(key, "true");
      if (name == "synth") return cmd_synth(kv, out, err);
      if (name == "ingest") return cmd_ingest(kv, out, err);
      if (name == "split") return cmd_split(kv, out, err);
      if (name == "train") return cmd_train(kv, out, err);
      if (name == "evaluate") return cmd_evaluate(kv, out, err);
      if (name == "importance") return cmd_importance(kv, out, err);
    }
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const DegenerateDataError& e) {
    err << "degenerate data: " << e.what() << '\n';
    return kDegenerate;
  } catch (const TaskMismatchError& e) {
    err << "model/task mismatch: " << e.what() << '\n';
    return kTaskMismatch;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace gradeforest::cli
