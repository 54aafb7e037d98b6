#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "warmopf/acopf.hpp"
#include "warmopf/dataset.hpp"
#include "warmopf/forest.hpp"

namespace warmopf {

struct BenchConfig {
  std::vector<StartLabel> starts{StartLabel::Learned, StartLabel::DC, StartLabel::Flat};
  std::vector<SolverProfile> profiles{SolverProfile::Robust};
  /// When set, records.csv is appended as samples finish.
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Test samples (in split order) whose violation traces are kept.
  std::size_t trace_samples = 10;
  /// Cap on the number of test samples; 0 runs all of them.
  std::size_t max_samples = 0;
  bool enforce_line_limits = false;
  LearnedAngles learned_angles = LearnedAngles::Zero;
  std::function<void(std::size_t done, std::size_t total)> progress;

  /// Throws InvalidValue when no start or no profile is selected.
  void validate() const;
};

struct BenchRecord {
  std::size_t position = 0;  // index in the test split
  std::size_t sample = 0;    // dataset row
  StartLabel start = StartLabel::Flat;
  SolverProfile profile = SolverProfile::Robust;
  OpfStatus status = OpfStatus::NumericalFailure;
  int iterations = 0;
  double objective = 0.0;
  /// DC OPF solve for DC, forest prediction for Learned; seconds.
  double start_time = 0.0;
  double solve_time = 0.0;
  double total_time = 0.0;  // start_time + solve_time
  double initial_violation = 0.0;
  double final_violation = 0.0;
  /// Set when the DC start fell back to flat.
  bool fallback = false;
  std::vector<double> violation_trace;  // kept for trace samples only
};

struct SummaryRow {
  StartLabel start = StartLabel::Flat;
  SolverProfile profile = SolverProfile::Robust;
  std::size_t samples = 0;
  std::size_t converged = 0;
  double percent_converged = 0.0;
  double total_time = 0.0;
  double mean_time = 0.0;
  double mean_iterations = 0.0;
  double mean_initial_violation = 0.0;
};

struct PredictionTiming {
  double mean = 0.0;    // seconds per sample
  double stddev = 0.0;
  std::size_t measurements = 0;
};

struct BenchReport {
  std::string case_name;
  std::vector<std::string> target_names;
  std::size_t voltage_targets = 0;
  std::vector<std::size_t> test_rows;
  std::vector<BenchRecord> records;  // by position, then start, then profile
  /// Forest predictions and optimal targets on the test rows (empty without a model).
  Matrix predicted, truth;
  ErrorMetric errors;
  PredictionTiming timing;
  std::vector<std::string> warnings;

  std::vector<SummaryRow> summary() const;
};

/// Solves every test row of `dataset` from each configured start under each
/// profile. `model` may be null when Learned is not requested. Throws
/// SchemaMismatch when case, dataset and model disagree.
BenchReport run_bench(const CaseData& data, const Dataset& dataset, const ForestModel* model,
                      const BenchConfig& config);

/// Single-sample prediction time over `repeats` passes of X after one
/// warm-up pass.
PredictionTiming prediction_timing(const ForestModel& model, const Matrix& X, int repeats = 10);

std::string records_csv_header();
std::string record_csv_row(const BenchRecord& record);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Recomputes the summary from the rows of a records.csv file.
std::vector<SummaryRow> summary_from_records_csv(const std::string& text);

/// Writes records.csv, summary.csv, error_by_target.csv,
/// violation_traces.csv, metrics.json and four SVG plots into `dir`.
void emit_reports(const BenchReport& report, const std::filesystem::path& dir);

}  // namespace warmopf
