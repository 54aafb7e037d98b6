#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "warmopf/acopf.hpp"
#include "warmopf/casefile.hpp"

namespace warmopf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kDatasetSchemaVersion = 1;

struct SampleSpec {
  std::size_t n_samples = 2000;
  double scale_low = 0.8;
  double scale_high = 1.2;
  std::uint64_t seed = 0;
  /// One factor per bus; when false a single factor scales every bus.
  bool per_bus_independent = true;
};

struct DatasetMeta {
  int schema_version = kDatasetSchemaVersion;
  std::string case_name;
  std::string case_hash;
  SampleSpec spec;
  std::string profile = "robust";
  std::size_t attempts = 0;
  std::size_t discards = 0;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
};

/// Loads X (p_load per bus, then q_load per bus) and optimal targets T (vm per
/// bus, then pg per generator), all p.u. `aux` keeps the rest of each
/// solution (va per bus, qg per generator, objective) so rows can be
/// re-verified against the power flow equations.
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::vector<std::string> aux_names;
  Matrix X, T, aux;
  std::vector<std::size_t> train, test;
  DatasetMeta meta;
  std::vector<std::string> warnings;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  Matrix rows_of(const Matrix& m, const std::vector<std::size_t>& idx) const;
};

std::vector<std::string> feature_names(const CaseData& data);
std::vector<std::string> target_names(const CaseData& data);
/// Feature row of the case's own loads, in feature_names order.
std::vector<double> load_features(const CaseData& data);

/// Copy of `data` with bus m's p_load and q_load multiplied by factors[m].
CaseData scale_loads(const CaseData& data, const std::vector<double>& factors);

/// Load factors drawn for one attempt; depends only on (spec.seed, attempt).
std::vector<double> draw_factors(const SampleSpec& spec, std::size_t n_buses, std::size_t attempt);

struct GenerateOptions {
  SolverProfile profile = SolverProfile::Robust;
  int threads = 1;
  /// Called after each batch with (rows collected, attempts so far).
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Samples perturbed loads, solves each from a flat start and keeps converged
/// solutions, until spec.n_samples rows or 3*n_samples attempts. Throws
/// SanityGateFailed when the default-load problem does not converge and
/// BudgetExhausted when the attempt budget runs out. The result is identical
/// for any thread count. The split is left empty.
Dataset generate(const CaseData& data, const SampleSpec& spec, const GenerateOptions& options = {});

/// Seeded permutation; the first floor(fraction * n) rows go to train.
void split(Dataset& dataset, double train_fraction = 0.8, std::uint64_t seed = 0);

/// Directory layout: meta.json, X.csv, T.csv, aux.csv and SHA256SUMS.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Verifies checksums and schema version. When `data` is given and its hash
/// differs from the recorded one, a warning is appended.
Dataset load_dataset(const std::filesystem::path& dir, const CaseData* data = nullptr);

/// Warning text when the dataset was built from a different network.
std::optional<std::string> case_mismatch(const Dataset& dataset, const CaseData& data);

/// Mismatch norms (p, q) of row `row` re-evaluated on `data` with the row's
/// loads substituted: vm from T, va and qg from aux, pg from T.
std::pair<double, double> row_mismatch(const CaseData& data, const Dataset& dataset, std::size_t row);

nlohmann::json meta_to_json(const Dataset& dataset);

/// Digest of the three matrices and names, used to tie models to data.
std::string dataset_hash(const Dataset& dataset);

}  // namespace warmopf
