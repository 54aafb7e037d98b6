#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "warmopf/acopf.hpp"
#include "warmopf/bench.hpp"
#include "warmopf/casefile.hpp"
#include "warmopf/dataset.hpp"
#include "warmopf/error.hpp"
#include "warmopf/forest.hpp"
#include "warmopf/parallel.hpp"
#include "warmopf/util.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace warmopf::cli {

namespace {

// Seed streams below the root seed, one per stochastic stage.
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kForestStream = 3;

struct Options {
  std::uint64_t seed = kDefaultSeed;
  int threads = 0;
  bool json = false;
  bool quiet = false;

  std::string case_path;
  std::string data_dir;
  std::string model_path;
  std::string out;

  // gen-data
  std::size_t n = 2000;
  double scale_low = 0.8, scale_high = 1.2;
  bool global_factor = false;
  double train_fraction = 0.8;
  std::string profile = "robust";

  // tune / train
  std::vector<int> grid_trees{200, 300, 400, 500};
  std::vector<int> grid_depth{10, 15, 20};
  std::vector<int> grid_mss{2, 3, 4, 5};
  int folds = 3;
  int n_estimators = 400;
  int max_depth = 15;
  int min_samples_split = 2;
  int max_features = 0;
  bool no_bootstrap = false;
  std::string params_path;

  // predict / solve / bench
  std::string start = "flat";
  std::string learned_angles = "zero";
  bool line_limits = false;
  std::string trace_path;
  std::vector<std::string> starts{"learned", "dc", "flat"};
  std::vector<std::string> profiles{"robust"};
  std::size_t trace_samples = 10;
  std::size_t max_samples = 0;
};

class App : public CLI::App {
 public:
  App();
  Options o;
  CLI::App* gen_data;
  CLI::App* tune;
  CLI::App* train;
  CLI::App* predict;
  CLI::App* solve;
  CLI::App* bench;
};

const std::map<std::string, std::string> kProfiles{{"robust", "robust"}, {"fragile", "fragile"}};

App::App() : CLI::App("Learned warm starts for AC optimal power flow", "warmopf") {
  require_subcommand(1);
  fallthrough();
  set_help_all_flag("--help-all", "Show help for every subcommand");
  add_option("--seed", o.seed, "Root seed for every random stage")->capture_default_str();
  add_option("--threads", o.threads, "Worker threads; 0 uses $WARMOPF_THREADS or the core count")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  add_flag("--json", o.json, "Print results as JSON on stdout");
  add_flag("-q,--quiet", o.quiet, "No progress output on stderr");

  auto case_opt = [&](CLI::App* sub) {
    return sub->add_option("--case", o.case_path, "Case file, or a bundled case name such as case14")->required();
  };
  auto data_opt = [&](CLI::App* sub) {
    return sub->add_option("--data", o.data_dir, "Dataset directory written by gen-data")->required();
  };

  gen_data = add_subcommand("gen-data", "Solve perturbed-load ACOPF samples and store a split dataset");
  case_opt(gen_data);
  gen_data->add_option("-n,--n", o.n, "Number of converged samples to collect")->capture_default_str()->check(
      CLI::PositiveNumber);
  gen_data->add_option("--out", o.out, "Output dataset directory")->required();
  gen_data->add_option("--scale-low", o.scale_low, "Lower load scaling factor")->capture_default_str();
  gen_data->add_option("--scale-high", o.scale_high, "Upper load scaling factor")->capture_default_str();
  gen_data->add_flag("--global-factor", o.global_factor, "Scale all loads by one shared factor per sample");
  gen_data->add_option("--train-fraction", o.train_fraction, "Share of rows in the training split")->capture_default_str();
  gen_data->add_option("--profile", o.profile, "Solver profile used for the samples")
      ->capture_default_str()
      ->transform(CLI::IsMember(kProfiles, CLI::ignore_case));

  tune = add_subcommand("tune", "Grid search forest hyperparameters by k-fold cross-validation");
  data_opt(tune);
  tune->add_option("--out", o.out, "Output directory for cv_report.csv and best.json")->required();
  tune->add_option("--n-estimators", o.grid_trees, "Candidate tree counts")->delimiter(',')->capture_default_str();
  tune->add_option("--max-depth", o.grid_depth, "Candidate depth limits")->delimiter(',')->capture_default_str();
  tune->add_option("--min-samples-split", o.grid_mss, "Candidate minimum node sizes for a split")
      ->delimiter(',')
      ->capture_default_str();
  tune->add_option("--folds", o.folds, "Number of cross-validation folds")->capture_default_str()->check(
      CLI::Range(2, 1000));

  train = add_subcommand("train", "Fit a forest on the training split");
  data_opt(train);
  train->add_option("--out", o.out, "Output model file (JSON)")->required();
  train->add_option("--n-estimators", o.n_estimators, "Number of trees")->capture_default_str();
  train->add_option("--max-depth", o.max_depth, "Depth limit; 0 for unlimited")->capture_default_str();
  train->add_option("--min-samples-split", o.min_samples_split, "Minimum node size for a split")->capture_default_str();
  train->add_option("--max-features", o.max_features, "Features tried per split; 0 for all")->capture_default_str();
  train->add_flag("--no-bootstrap", o.no_bootstrap, "Fit every tree on the full training split");
  train->add_option("--params", o.params_path, "best.json from tune; overrides the tree options")->check(
      CLI::ExistingFile);

  predict = add_subcommand("predict", "Predict optimal voltages and dispatch from loads");
  case_opt(predict);
  predict->add_option("--model", o.model_path, "Model file written by train")->required();
  predict->add_option("--data", o.data_dir, "Dataset whose test split is predicted; without it the case loads are used");
  predict->add_option("--out", o.out, "CSV file for the predictions");

  solve = add_subcommand("solve", "Solve one ACOPF from a chosen start");
  case_opt(solve);
  solve->add_option("--start", o.start, "Start point: flat, dc or learned")
      ->capture_default_str()
      ->check(CLI::IsMember({"flat", "dc", "learned"}, CLI::ignore_case));
  solve->add_option("--model", o.model_path, "Model file for the learned start");
  solve->add_option("--profile", o.profile, "Solver profile")
      ->capture_default_str()
      ->transform(CLI::IsMember(kProfiles, CLI::ignore_case));
  solve->add_option("--learned-angles", o.learned_angles, "Angles of the learned start: zero or case")
      ->capture_default_str()
      ->check(CLI::IsMember({"zero", "case"}, CLI::ignore_case));
  solve->add_flag("--line-limits", o.line_limits, "Enforce branch flow ratings");
  solve->add_option("--out", o.out, "JSON file for the full solution");
  solve->add_option("--trace", o.trace_path, "CSV file for the per-iteration trace");

  bench = add_subcommand("bench", "Compare warm starts over the test split and write reports");
  case_opt(bench);
  data_opt(bench);
  bench->add_option("--model", o.model_path, "Model file; required for the learned start");
  bench->add_option("--out", o.out, "Report directory")->required();
  bench->add_option("--starts", o.starts, "Starts to compare: learned, dc, flat")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::IsMember({"learned", "dc", "flat"}, CLI::ignore_case));
  bench->add_option("--profiles", o.profiles, "Solver profiles: robust, fragile")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::IsMember({"robust", "fragile"}, CLI::ignore_case));
  bench->add_option("--trace-samples", o.trace_samples, "Test samples whose violation traces are kept")
      ->capture_default_str();
  bench->add_option("--max-samples", o.max_samples, "Limit on test samples; 0 runs all")->capture_default_str();
  bench->add_option("--learned-angles", o.learned_angles, "Angles of the learned start: zero or case")
      ->capture_default_str()
      ->check(CLI::IsMember({"zero", "case"}, CLI::ignore_case));
  bench->add_flag("--line-limits", o.line_limits, "Enforce branch flow ratings");
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

fs::path resolve_case(const std::string& arg) {
  const fs::path p(arg);
  if (fs::is_regular_file(p)) return p;
  std::vector<fs::path> dirs{fs::current_path()};
  if (const char* env = std::getenv("WARMOPF_DATA_DIR")) dirs.emplace_back(env);
#ifdef WARMOPF_DEFAULT_DATA_DIR
  dirs.emplace_back(WARMOPF_DEFAULT_DATA_DIR);
#endif
  for (const fs::path& d : dirs) {
    if (fs::is_regular_file(d / p)) return d / p;
    if (fs::is_regular_file(d / (arg + ".m"))) return d / (arg + ".m");
  }
  throw Error(ErrorCode::IoError, "case file not found: " + arg);
}

SolverProfile profile_of(const std::string& s) { return *parse_profile(lower(s)); }

class Progress {
 public:
  Progress(std::ostream& err, bool quiet, std::string label) : err_(err), quiet_(quiet), label_(std::move(label)) {}
  void operator()(std::size_t done, std::size_t total) {
    if (quiet_) return;
    err_ << "\r" << label_ << " " << done << "/" << total << std::flush;
    dirty_ = true;
  }
  ~Progress() {
    if (dirty_) err_ << "\n";
  }

 private:
  std::ostream& err_;
  bool quiet_;
  std::string label_;
  bool dirty_ = false;
};

struct Ctx {
  const Options& o;
  std::ostream& out;
  std::ostream& err;
  int threads;
  void note(const std::string& line) const {
    if (!o.quiet) err << line << "\n";
  }
  void warn_all(const std::vector<std::string>& warnings) const {
    for (const std::string& w : warnings) err << "warning: " << w << "\n";
  }
};

Dataset read_dataset(const Ctx& c, const CaseData* data) {
  Dataset ds = load_dataset(c.o.data_dir, data);
  c.warn_all(ds.warnings);
  return ds;
}

int cmd_gen_data(const Ctx& c) {
  const CaseData data = load_case(resolve_case(c.o.case_path));
  c.warn_all(data.warnings);
  SampleSpec spec;
  spec.n_samples = c.o.n;
  spec.scale_low = c.o.scale_low;
  spec.scale_high = c.o.scale_high;
  spec.per_bus_independent = !c.o.global_factor;
  spec.seed = derive_seed(c.o.seed, kSampleStream);
  Progress progress(c.err, c.o.quiet, "samples");
  GenerateOptions opts;
  opts.profile = profile_of(c.o.profile);
  opts.threads = c.threads;
  opts.progress = [&](std::size_t rows, std::size_t) { progress(rows, spec.n_samples); };
  Dataset ds = generate(data, spec, opts);
  split(ds, c.o.train_fraction, derive_seed(c.o.seed, kSplitStream));
  save_dataset(ds, c.o.out);
  const std::string hash = dataset_hash(ds);
  if (c.o.json) {
    c.out << Json{{"seed", c.o.seed},       {"out", c.o.out},           {"rows", ds.rows()},
                  {"train", ds.train.size()}, {"test", ds.test.size()}, {"attempts", ds.meta.attempts},
                  {"discards", ds.meta.discards}, {"dataset_hash", hash}}
                 .dump(2)
          << "\n";
  } else {
    c.out << "rows: " << ds.rows() << " (train " << ds.train.size() << ", test " << ds.test.size() << ")\n"
          << "discarded: " << ds.meta.discards << " of " << ds.meta.attempts << " attempts\n"
          << "dataset hash: " << hash << "\n"
          << "written to " << c.o.out << "\n";
  }
  return kExitOk;
}

Json params_json(const Hyperparams& p) {
  return Json{{"n_estimators", p.n_estimators}, {"max_depth", p.max_depth},     {"min_samples_split", p.min_samples_split},
              {"max_features", p.max_features}, {"bootstrap", p.bootstrap}, {"seed", p.seed}};
}

int cmd_tune(const Ctx& c) {
  const Dataset ds = read_dataset(c, nullptr);
  if (ds.train.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no training rows");
  ParamGrid grid{c.o.grid_trees, c.o.grid_depth, c.o.grid_mss};
  Hyperparams base;
  base.seed = derive_seed(c.o.seed, kForestStream);
  c.note("grid: " + std::to_string(grid.size()) + " combinations, " + std::to_string(c.o.folds) + " folds");
  const CvResult cv = grid_search_cv(ds.rows_of(ds.X, ds.train), ds.rows_of(ds.T, ds.train), grid, base, c.o.folds,
                                     c.threads);
  fs::create_directories(c.o.out);
  write_text_file(fs::path(c.o.out) / "cv_report.csv", cv_report_csv(cv));
  double best_score = 0.0;
  for (const CvRow& r : cv.table)
    if (r.params == cv.best) best_score = r.mean;
  const Json best{{"params", params_json(cv.best)}, {"mean_score", best_score}, {"folds", c.o.folds}};
  write_text_file(fs::path(c.o.out) / "best.json", best.dump(2) + "\n");
  if (c.o.json) {
    c.out << Json{{"seed", c.o.seed}, {"best", best}, {"out", c.o.out}}.dump(2) << "\n";
  } else {
    c.out << "best: n_estimators=" << cv.best.n_estimators << " max_depth=" << cv.best.max_depth
          << " min_samples_split=" << cv.best.min_samples_split << " mean R2=" << format_double(best_score) << "\n";
  }
  return kExitOk;
}

int cmd_train(const Ctx& c) {
  const Dataset ds = read_dataset(c, nullptr);
  Hyperparams p;
  p.n_estimators = c.o.n_estimators;
  p.max_depth = c.o.max_depth;
  p.min_samples_split = c.o.min_samples_split;
  p.max_features = c.o.max_features;
  p.bootstrap = !c.o.no_bootstrap;
  if (!c.o.params_path.empty()) {
    const Json j = Json::parse(read_text_file(c.o.params_path));
    const Json& q = j.contains("params") ? j.at("params") : j;
    p.n_estimators = q.value("n_estimators", p.n_estimators);
    p.max_depth = q.value("max_depth", p.max_depth);
    p.min_samples_split = q.value("min_samples_split", p.min_samples_split);
    p.max_features = q.value("max_features", p.max_features);
    p.bootstrap = q.value("bootstrap", p.bootstrap);
  }
  p.seed = derive_seed(c.o.seed, kForestStream);
  const auto t0 = std::chrono::steady_clock::now();
  const ForestModel model = fit_forest(ds, p, c.threads);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_model(model, c.o.out);
  Json result{{"seed", c.o.seed}, {"params", params_json(p)}, {"train_rows", ds.train.size()}, {"out", c.o.out},
              {"fit_time_s", secs}};
  if (!ds.test.empty()) {
    const Matrix pred = model.predict(ds.rows_of(ds.X, ds.test), c.threads);
    const Matrix truth = ds.rows_of(ds.T, ds.test);
    const ErrorMetric e = relative_error(pred, truth, static_cast<std::size_t>(ds.X.cols() / 2));
    result["test_r2"] = mean_r2(truth, pred);
    result["test_voltage_error"] = e.voltage_mean;
    result["test_power_error"] = e.power_mean;
  }
  if (c.o.json) {
    c.out << result.dump(2) << "\n";
  } else {
    c.out << "trained " << p.n_estimators << " trees on " << ds.train.size() << " rows in " << secs << " s\n";
    if (result.contains("test_r2")) {
      c.out << "test R2: " << result["test_r2"].get<double>()
            << ", mean relative error: voltage " << 100 * result["test_voltage_error"].get<double>() << "%, power "
            << 100 * result["test_power_error"].get<double>() << "%\n";
    }
    c.out << "written to " << c.o.out << "\n";
  }
  return kExitOk;
}

void check_model_case(const ForestModel& model, const CaseData& data) {
  model.check_schema(feature_names(data), target_names(data));
  if (!model.case_hash.empty() && model.case_hash != case_hash(data)) {
    throw Error(ErrorCode::SchemaMismatch, "model was trained on a different case");
  }
}

int cmd_predict(const Ctx& c) {
  const CaseData data = load_case(resolve_case(c.o.case_path));
  const ForestModel model = load_model(c.o.model_path);
  check_model_case(model, data);
  const std::size_t nv = data.num_buses();
  Matrix X;
  Matrix truth;
  if (!c.o.data_dir.empty()) {
    const Dataset ds = read_dataset(c, &data);
    if (const auto why = case_mismatch(ds, data)) throw Error(ErrorCode::SchemaMismatch, *why);
    if (ds.test.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no test rows");
    X = ds.rows_of(ds.X, ds.test);
    truth = ds.rows_of(ds.T, ds.test);
  } else {
    const std::vector<double> x = load_features(data);
    X = Eigen::Map<const Matrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  }
  const Matrix pred = model.predict(X, c.threads);
  if (!c.o.out.empty()) {
    std::string csv;
    for (std::size_t k = 0; k < model.schema.targets.size(); ++k) csv += (k ? "," : "") + model.schema.targets[k];
    csv += "\n";
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
      for (Eigen::Index k = 0; k < pred.cols(); ++k) csv += (k ? "," : "") + format_double(pred(r, k));
      csv += "\n";
    }
    write_text_file(c.o.out, csv);
  }
  Json result{{"seed", c.o.seed}, {"rows", pred.rows()}};
  if (truth.size() > 0) {
    const ErrorMetric e = relative_error(pred, truth, nv);
    result["voltage_error"] = e.voltage_mean;
    result["power_error"] = e.power_mean;
    result["excluded"] = e.excluded;
  }
  if (pred.rows() == 1) {
    Json row = Json::object();
    for (std::size_t k = 0; k < model.schema.targets.size(); ++k) row[model.schema.targets[k]] = pred(0, static_cast<Eigen::Index>(k));
    result["prediction"] = row;
  }
  if (c.o.json) {
    c.out << result.dump(2) << "\n";
    return kExitOk;
  }
  if (pred.rows() == 1) {
    for (std::size_t k = 0; k < model.schema.targets.size(); ++k) {
      c.out << model.schema.targets[k] << " " << format_double(pred(0, static_cast<Eigen::Index>(k))) << "\n";
    }
  } else {
    c.out << "predicted " << pred.rows() << " rows\n";
  }
  if (result.contains("voltage_error")) {
    c.out << "mean relative error: voltage " << 100 * result["voltage_error"].get<double>() << "%, power "
          << 100 * result["power_error"].get<double>() << "% (" << result["excluded"].get<std::size_t>()
          << " entries excluded)\n";
  }
  return kExitOk;
}

int cmd_solve(const Ctx& c) {
  const CaseData data = load_case(resolve_case(c.o.case_path));
  c.warn_all(data.warnings);
  const OpfProblem problem(data, c.o.line_limits);
  const StartLabel label = *parse_start_label(lower(c.o.start));
  const auto t0 = std::chrono::steady_clock::now();
  StartPoint start;
  std::string warning;
  if (label == StartLabel::Flat) {
    start = make_flat_start(problem);
  } else if (label == StartLabel::DC) {
    start = dc_start_or_flat(problem, &warning);
  } else {
    if (c.o.model_path.empty()) throw Error(ErrorCode::InvalidValue, "the learned start needs --model");
    const ForestModel model = load_model(c.o.model_path);
    check_model_case(model, data);
    start = make_learned_start(problem, model.predict(load_features(data)), *parse_learned_angles(lower(c.o.learned_angles)));
  }
  const double start_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!warning.empty()) c.err << "warning: " << warning << "\n";
  const double initial = max_constraint_violation(problem, start);
  const OpfSolution sol = solve_acopf(problem, start, profile_of(c.o.profile));
  if (!c.o.out.empty()) write_text_file(c.o.out, solution_to_json(problem, sol).dump(2) + "\n");
  if (!c.o.trace_path.empty()) write_text_file(c.o.trace_path, trace_to_csv(sol));
  if (c.o.json) {
    c.out << Json{{"seed", c.o.seed},
                  {"case", data.name},
                  {"start", to_string(start.label)},
                  {"profile", to_string(profile_of(c.o.profile))},
                  {"status", to_string(sol.status)},
                  {"objective", sol.objective},
                  {"iterations", sol.iterations},
                  {"initial_violation", initial},
                  {"final_violation", max_constraint_violation(problem, sol)},
                  {"start_time_s", start_time},
                  {"solve_time_s", sol.wall_time}}
                 .dump(2)
          << "\n";
  } else {
    c.out << "status: " << to_string(sol.status) << "\n"
          << "objective: " << format_double(sol.objective) << "\n"
          << "iterations: " << sol.iterations << "\n"
          << "start: " << to_string(start.label) << " (initial violation " << initial << ")\n";
  }
  return kExitOk;
}

int cmd_bench(const Ctx& c) {
  const CaseData data = load_case(resolve_case(c.o.case_path));
  const Dataset ds = read_dataset(c, &data);
  BenchConfig cfg;
  cfg.starts.clear();
  for (const std::string& s : c.o.starts) cfg.starts.push_back(*parse_start_label(lower(s)));
  cfg.profiles.clear();
  for (const std::string& s : c.o.profiles) cfg.profiles.push_back(profile_of(s));
  cfg.output_dir = c.o.out;
  cfg.seed = c.o.seed;
  cfg.threads = c.threads;
  cfg.trace_samples = c.o.trace_samples;
  cfg.max_samples = c.o.max_samples;
  cfg.enforce_line_limits = c.o.line_limits;
  cfg.learned_angles = *parse_learned_angles(lower(c.o.learned_angles));
  std::optional<ForestModel> model;
  if (!c.o.model_path.empty()) model = load_model(c.o.model_path);
  Progress progress(c.err, c.o.quiet, "samples");
  cfg.progress = [&](std::size_t done, std::size_t total) { progress(done, total); };
  const BenchReport report = run_bench(data, ds, model ? &*model : nullptr, cfg);
  emit_reports(report, c.o.out);
  c.warn_all(report.warnings);
  const auto summary = report.summary();
  if (c.o.json) {
    Json rows = Json::array();
    for (const SummaryRow& r : summary) {
      rows.push_back({{"start", to_string(r.start)},
                      {"profile", to_string(r.profile)},
                      {"samples", r.samples},
                      {"converged", r.converged},
                      {"percent_converged", r.percent_converged},
                      {"total_time_s", r.total_time},
                      {"mean_iterations", r.mean_iterations},
                      {"mean_initial_violation", r.mean_initial_violation}});
    }
    c.out << Json{{"seed", c.o.seed}, {"out", c.o.out}, {"summary", rows}}.dump(2) << "\n";
  } else {
    c.out << read_text_file(fs::path(c.o.out) / "summary.csv");
    c.out << "reports written to " << c.o.out << "\n";
  }
  return kExitOk;
}

}  // namespace

std::unique_ptr<CLI::App> build_app() { return std::make_unique<App>(); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  App app;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }
  const Options& o = app.o;
  err << "warmopf: root seed " << o.seed << "\n";
  const Ctx c{o, out, err, resolve_threads(o.threads)};
  try {
    if (*app.gen_data) return cmd_gen_data(c);
    if (*app.tune) return cmd_tune(c);
    if (*app.train) return cmd_train(c);
    if (*app.predict) return cmd_predict(c);
    if (*app.solve) return cmd_solve(c);
    if (*app.bench) return cmd_bench(c);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << "\n";
    return exit_code_for(ErrorCode::IoError);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(ErrorCode::IoError);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
  return kExitUsage;
}

}  // namespace warmopf::cli
