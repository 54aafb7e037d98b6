#include "warmopf/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "warmopf/error.hpp"
#include "warmopf/parallel.hpp"
#include "warmopf/svg.hpp"
#include "warmopf/util.hpp"

namespace warmopf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

OpfStatus parse_status(const std::string& s) {
  for (OpfStatus st : {OpfStatus::Converged, OpfStatus::MaxIterations, OpfStatus::NumericalFailure}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::IoError, "unknown status '" + s + "' in records");
}

CaseData with_row_loads(const CaseData& data, const Dataset& ds, std::size_t row) {
  CaseData out = data;
  const std::size_t n = data.num_buses();
  const auto r = static_cast<Eigen::Index>(row);
  for (std::size_t m = 0; m < n; ++m) {
    out.buses[m].p_load = ds.X(r, static_cast<Eigen::Index>(m));
    out.buses[m].q_load = ds.X(r, static_cast<Eigen::Index>(n + m));
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<BenchRecord>& records) {
  std::vector<SummaryRow> rows;
  std::vector<double> iter_sum, viol_sum;
  for (const BenchRecord& r : records) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const SummaryRow& s) { return s.start == r.start && s.profile == r.profile; });
    if (it == rows.end()) {
      SummaryRow s;
      s.start = r.start;
      s.profile = r.profile;
      rows.push_back(s);
      iter_sum.push_back(0.0);
      viol_sum.push_back(0.0);
      it = rows.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - rows.begin());
    ++it->samples;
    if (r.status == OpfStatus::Converged) ++it->converged;
    it->total_time += r.total_time;
    iter_sum[k] += r.iterations;
    viol_sum[k] += r.initial_violation;
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto n = static_cast<double>(rows[k].samples);
    rows[k].percent_converged = 100.0 * static_cast<double>(rows[k].converged) / n;
    rows[k].mean_time = rows[k].total_time / n;
    rows[k].mean_iterations = iter_sum[k] / n;
    rows[k].mean_initial_violation = viol_sum[k] / n;
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void BenchConfig::validate() const {
  if (starts.empty()) throw Error(ErrorCode::InvalidValue, "select at least one start");
  if (profiles.empty()) throw Error(ErrorCode::InvalidValue, "select at least one solver profile");
  for (StartLabel s : starts) {
    if (s == StartLabel::Custom) throw Error(ErrorCode::InvalidValue, "custom starts cannot be benchmarked");
  }
}

std::vector<SummaryRow> BenchReport::summary() const { return summarize(records); }

PredictionTiming prediction_timing(const ForestModel& model, const Matrix& X, int repeats) {
  PredictionTiming t;
  if (X.rows() == 0 || repeats < 1) return t;
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i) rows.emplace_back(X.row(i).data(), X.row(i).data() + X.cols());
  volatile double sink = 0.0;
  for (const auto& x : rows) sink = sink + model.predict(x)[0];
  std::vector<double> samples;
  for (int r = 0; r < repeats; ++r) {
    for (const auto& x : rows) {
      const auto t0 = Clock::now();
      const auto y = model.predict(x);
      samples.push_back(seconds_since(t0));
      sink = sink + y[0];
    }
  }
  t.measurements = samples.size();
  t.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double s : samples) ss += (s - t.mean) * (s - t.mean);
  t.stddev = samples.size() > 1 ? std::sqrt(ss / static_cast<double>(samples.size() - 1)) : 0.0;
  return t;
}

BenchReport run_bench(const CaseData& data, const Dataset& ds, const ForestModel* model, const BenchConfig& config) {
  config.validate();
  if (ds.meta.case_hash != case_hash(data)) {
    throw Error(ErrorCode::SchemaMismatch, "dataset was generated from case '" + ds.meta.case_name +
                                               "', which differs from '" + data.name + "'");
  }
  if (ds.feature_names != feature_names(data) || ds.target_names != target_names(data)) {
    throw Error(ErrorCode::SchemaMismatch, "dataset columns do not match the case");
  }
  const bool learned =
      std::find(config.starts.begin(), config.starts.end(), StartLabel::Learned) != config.starts.end();
  if (learned && !model) throw Error(ErrorCode::InvalidValue, "the learned start needs a model");
  if (model) {
    model->check_schema(ds.feature_names, ds.target_names);
    if (!model->case_hash.empty() && model->case_hash != ds.meta.case_hash) {
      throw Error(ErrorCode::SchemaMismatch, "model was trained for a different case");
    }
  }
  if (ds.test.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no test rows");

  BenchReport report;
  report.case_name = data.name;
  report.target_names = ds.target_names;
  report.voltage_targets = data.num_buses();
  report.test_rows = ds.test;
  if (config.max_samples > 0 && report.test_rows.size() > config.max_samples) report.test_rows.resize(config.max_samples);
  const int threads = std::max(1, config.threads);

  if (model) {
    const Matrix Xt = ds.rows_of(ds.X, report.test_rows);
    report.truth = ds.rows_of(ds.T, report.test_rows);
    report.predicted = model->predict(Xt, threads);
    report.errors = relative_error(report.predicted, report.truth, report.voltage_targets);
    report.timing = prediction_timing(*model, Xt);
  }

  std::ofstream out;
  if (!config.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    out.open(config.output_dir / "records.csv", std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (config.output_dir / "records.csv").string());
    out << records_csv_header();
    out.flush();
  }

  const std::size_t per_sample = config.starts.size() * config.profiles.size();
  const std::size_t total = report.test_rows.size();
  std::vector<std::vector<BenchRecord>> slots(total);
  std::vector<std::string> slot_warnings(total);
  auto run_one = [&](std::size_t pos) {
    const std::size_t row = report.test_rows[pos];
    const OpfProblem problem(with_row_loads(data, ds, row), config.enforce_line_limits);
    const bool keep_trace = pos < config.trace_samples;
    for (StartLabel label : config.starts) {
      const auto t0 = Clock::now();
      StartPoint start;
      bool fallback = false;
      switch (label) {
        case StartLabel::Flat:
          start = make_flat_start(problem);
          break;
        case StartLabel::DC: {
          std::string warning;
          start = dc_start_or_flat(problem, &warning);
          fallback = start.label != StartLabel::DC;
          if (fallback) slot_warnings[pos] = "sample " + std::to_string(row) + ": " + warning;
          break;
        }
        case StartLabel::Learned: {
          const auto r = static_cast<Eigen::Index>(row);
          const std::vector<double> x(ds.X.row(r).data(), ds.X.row(r).data() + ds.X.cols());
          start = make_learned_start(problem, model->predict(x), config.learned_angles);
          break;
        }
        case StartLabel::Custom:
          break;
      }
      const double start_time = seconds_since(t0);
      const double initial = max_constraint_violation(problem, start);
      for (SolverProfile profile : config.profiles) {
        const OpfSolution sol = solve_acopf(problem, start, profile);
        BenchRecord rec;
        rec.position = pos;
        rec.sample = row;
        rec.start = label;
        rec.profile = profile;
        rec.status = sol.status;
        rec.iterations = sol.iterations;
        rec.objective = sol.objective;
        rec.start_time = start_time;
        rec.solve_time = sol.wall_time;
        rec.total_time = rec.start_time + rec.solve_time;
        rec.initial_violation = initial;
        rec.final_violation = max_constraint_violation(problem, sol);
        rec.fallback = fallback;
        if (keep_trace) {
          for (const auto& it : sol.trace) rec.violation_trace.push_back(it.max_violation);
        }
        slots[pos].push_back(std::move(rec));
      }
    }
  };

  const auto batch = static_cast<std::size_t>(threads);
  for (std::size_t first = 0; first < total; first += batch) {
    const std::size_t count = std::min(batch, total - first);
    parallel_for(count, threads, [&](std::size_t i) { run_one(first + i); });
    for (std::size_t pos = first; pos < first + count; ++pos) {
      for (BenchRecord& r : slots[pos]) {
        if (out) out << record_csv_row(r);
        report.records.push_back(std::move(r));
      }
      if (!slot_warnings[pos].empty()) report.warnings.push_back(slot_warnings[pos]);
    }
    if (out) out.flush();
    if (config.progress) config.progress(first + count, total);
  }
  if (report.records.size() != total * per_sample) {
    throw Error(ErrorCode::NumericalFailure, "record count does not match samples x starts x profiles");
  }
  return report;
}

std::string records_csv_header() {
  return "position,sample,start,profile,status,iterations,objective,start_time_s,solve_time_s,total_time_s,"
         "initial_violation,final_violation,dc_fallback\n";
}

std::string record_csv_row(const BenchRecord& r) {
  return std::to_string(r.position) + "," + std::to_string(r.sample) + "," + std::string(to_string(r.start)) + "," +
         std::string(to_string(r.profile)) + "," + std::string(to_string(r.status)) + "," +
         std::to_string(r.iterations) + "," + format_double(r.objective) + "," + format_double(r.start_time) + "," +
         format_double(r.solve_time) + "," + format_double(r.total_time) + "," + format_double(r.initial_violation) +
         "," + format_double(r.final_violation) + "," + (r.fallback ? "1" : "0") + "\n";
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s =
      "start,profile,samples,converged,percent_converged,total_time_s,mean_time_s,mean_iterations,"
      "mean_initial_violation\n";
  for (const SummaryRow& r : rows) {
    s += std::string(to_string(r.start)) + "," + std::string(to_string(r.profile)) + "," + std::to_string(r.samples) +
         "," + std::to_string(r.converged) + "," + format_double(r.percent_converged) + "," +
         format_double(r.total_time) + "," + format_double(r.mean_time) + "," + format_double(r.mean_iterations) + "," +
         format_double(r.mean_initial_violation) + "\n";
  }
  return s;
}

std::vector<SummaryRow> summary_from_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line + "\n" != records_csv_header()) throw Error(ErrorCode::IoError, "unexpected records.csv header");
  std::vector<BenchRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 13) throw Error(ErrorCode::IoError, "records.csv row with " + std::to_string(c.size()) + " cells");
    BenchRecord r;
    r.position = std::stoul(c[0]);
    r.sample = std::stoul(c[1]);
    const auto start = parse_start_label(c[2]);
    const auto profile = parse_profile(c[3]);
    if (!start || !profile) throw Error(ErrorCode::IoError, "bad start or profile in records.csv");
    r.start = *start;
    r.profile = *profile;
    r.status = parse_status(c[4]);
    r.iterations = std::stoi(c[5]);
    r.objective = std::stod(c[6]);
    r.start_time = std::stod(c[7]);
    r.solve_time = std::stod(c[8]);
    r.total_time = std::stod(c[9]);
    r.initial_violation = std::stod(c[10]);
    r.final_violation = std::stod(c[11]);
    r.fallback = c[12] == "1";
    records.push_back(r);
  }
  return summarize(records);
}

void emit_reports(const BenchReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::string records = records_csv_header();
  for (const BenchRecord& r : report.records) records += record_csv_row(r);
  write_text_file(dir / "records.csv", records);
  write_text_file(dir / "summary.csv", summary_csv(report.summary()));

  std::string errors = "target,group,mean_relative_error,retained,excluded\n";
  const bool have_errors = report.errors.errors.size() > 0;
  if (have_errors) {
    for (std::size_t t = 0; t < report.target_names.size(); ++t) {
      std::size_t kept = 0;
      for (const auto& row : report.errors.included) kept += row[t] ? 1 : 0;
      errors += report.target_names[t] + "," + (t < report.voltage_targets ? "voltage" : "power") + "," +
                (kept ? format_double(report.errors.per_target_mean[t]) : std::string("nan")) + "," +
                std::to_string(kept) + "," + std::to_string(report.errors.included.size() - kept) + "\n";
    }
  }
  write_text_file(dir / "error_by_target.csv", errors);

  std::string traces = "position,sample,start,profile,iteration,max_violation\n";
  for (const BenchRecord& r : report.records) {
    for (std::size_t i = 0; i < r.violation_trace.size(); ++i) {
      traces += std::to_string(r.position) + "," + std::to_string(r.sample) + "," + std::string(to_string(r.start)) +
                "," + std::string(to_string(r.profile)) + "," + std::to_string(i) + "," +
                format_double(r.violation_trace[i]) + "\n";
    }
  }
  write_text_file(dir / "violation_traces.csv", traces);

  nlohmann::json metrics{{"case", report.case_name},
                         {"test_samples", report.test_rows.size()},
                         {"warnings", report.warnings}};
  if (have_errors) {
    metrics["relative_error"] = {{"voltage_mean", report.errors.voltage_mean},
                                 {"power_mean", report.errors.power_mean},
                                 {"excluded_entries", report.errors.excluded}};
    metrics["prediction_time_s"] = {{"mean", report.timing.mean},
                                    {"stddev", report.timing.stddev},
                                    {"measurements", report.timing.measurements}};
  }
  write_text_file(dir / "metrics.json", metrics.dump(2) + "\n");

  // voltage error per bus
  std::vector<std::string> bus_labels;
  std::vector<double> bus_err;
  for (std::size_t t = 0; t < report.voltage_targets && have_errors; ++t) {
    bus_labels.push_back(report.target_names[t]);
    bus_err.push_back(100.0 * report.errors.per_target_mean[t]);
  }
  write_text_file(dir / "voltage_error.svg",
                  svg::bar_chart({"Mean relative error of predicted voltage magnitude", "bus", "error (%)", false},
                                 bus_labels, bus_err));

  // power error per sample
  svg::Series power{"active power", {}, {}, svg::palette(1)};
  if (have_errors) {
    for (Eigen::Index i = 0; i < report.errors.errors.rows(); ++i) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t t = report.voltage_targets; t < report.target_names.size(); ++t) {
        if (!report.errors.included[static_cast<std::size_t>(i)][t]) continue;
        sum += report.errors.errors(i, static_cast<Eigen::Index>(t));
        ++n;
      }
      power.x.push_back(static_cast<double>(i));
      power.y.push_back(n ? 100.0 * sum / static_cast<double>(n) : std::nan(""));
    }
  }
  write_text_file(dir / "power_error.svg",
                  svg::line_chart({"Mean relative error of predicted generation per test sample", "test sample",
                                   "error (%)", false},
                                  {power}));

  // iterations per sample, first profile only
  std::vector<svg::Series> iters;
  if (!report.records.empty()) {
    const SolverProfile first = report.records.front().profile;
    std::map<StartLabel, std::size_t> index;
    for (const BenchRecord& r : report.records) {
      if (r.profile != first) continue;
      auto [it, fresh] = index.emplace(r.start, iters.size());
      if (fresh) iters.push_back({std::string(to_string(r.start)), {}, {}, svg::palette(iters.size())});
      iters[it->second].x.push_back(static_cast<double>(r.position));
      iters[it->second].y.push_back(r.iterations);
    }
    write_text_file(dir / "iterations.svg",
                    svg::line_chart({"Interior-point iterations per test sample (" + std::string(to_string(first)) +
                                         " profile)",
                                     "test sample", "iterations", false},
                                    iters));
  } else {
    write_text_file(dir / "iterations.svg", svg::line_chart({"Interior-point iterations per test sample", "test sample",
                                                             "iterations", false},
                                                            {}));
  }

  // violation traces
  std::vector<svg::Series> lines;
  std::map<StartLabel, std::size_t> colors;
  for (const BenchRecord& r : report.records) {
    if (r.violation_trace.empty() || r.profile != report.records.front().profile) continue;
    const std::size_t c = colors.emplace(r.start, colors.size()).first->second;
    svg::Series s{std::string(to_string(r.start)), {}, r.violation_trace, svg::palette(c)};
    for (std::size_t i = 0; i < r.violation_trace.size(); ++i) s.x.push_back(static_cast<double>(i));
    lines.push_back(std::move(s));
  }
  write_text_file(dir / "violation_traces.svg",
                  svg::line_chart({"Maximum constraint violation per iteration", "iteration", "max violation (p.u.)", true},
                                  lines));
}

}  // namespace warmopf
