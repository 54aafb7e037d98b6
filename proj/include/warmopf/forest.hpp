#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "warmopf/dataset.hpp"

namespace warmopf {

inline constexpr int kModelFormatVersion = 1;

struct Hyperparams {
  int n_estimators = 100;
  /// 0 means unlimited.
  int max_depth = 0;
  int min_samples_split = 2;
  /// 0 means all features.
  int max_features = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  /// Throws InvalidValue; max_features is checked against `n_features`.
  void validate(std::size_t n_features) const;
  bool operator==(const Hyperparams&) const = default;
};

struct TreeNode {
  /// -1 for a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Training rows reaching the node, bootstrap duplicates included.
  double weight = 0.0;
  int depth = 0;
  /// Offset of the node's mean target vector in Tree::values, -1 if not kept.
  std::int64_t value = -1;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Regression tree stored as a node array; node 0 is the root. Samples with
/// x[feature] <= threshold go left.
struct Tree {
  std::size_t n_targets = 0;
  std::vector<TreeNode> nodes;
  std::vector<double> values;

  const double* leaf_value(const double* x) const;
  /// Node reached when growth is cut at `max_depth` (0 = unlimited) and at
  /// nodes lighter than `min_samples_split`. Needs internal values.
  const double* truncated_value(const double* x, int max_depth, int min_samples_split) const;
  /// Drops the mean vectors of internal nodes.
  void strip_internal_values();
  bool operator==(const Tree&) const = default;
};

/// Fits one CART tree on rows `rows` of (X, T); duplicates act as weights.
/// Split feature order at each node is drawn from a stream derived from
/// `seed` and the node's path, so a shallower tree grown from the same seed
/// is a truncation of a deeper one.
Tree fit_tree(const Matrix& X, const Matrix& T, const std::vector<std::size_t>& rows, const Hyperparams& params,
              std::uint64_t seed, bool keep_internal_values = false);

struct ModelSchema {
  std::vector<std::string> features;
  std::vector<std::string> targets;
  bool operator==(const ModelSchema&) const = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  Hyperparams params;
  ModelSchema schema;
  std::string dataset_hash;
  std::string case_hash;
  std::string created;

  std::vector<double> predict(const std::vector<double>& x) const;
  Matrix predict(const Matrix& X, int threads = 1) const;
  /// Throws SchemaMismatch unless the names match exactly.
  void check_schema(const std::vector<std::string>& features, const std::vector<std::string>& targets) const;
};

/// Tree i uses the stream derive_seed(params.seed, i) for its bootstrap and
/// splits. Thread count does not affect the result.
ForestModel fit_forest(const Matrix& X, const Matrix& T, const Hyperparams& params, const ModelSchema& schema = {},
                       int threads = 1, bool keep_internal_values = false);
ForestModel fit_forest(const Dataset& dataset, const Hyperparams& params, int threads = 1);

nlohmann::json model_to_json(const ForestModel& model);
ForestModel model_from_json(const nlohmann::json& j);
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

struct ParamGrid {
  std::vector<int> n_estimators{200, 300, 400, 500};
  std::vector<int> max_depth{10, 15, 20};
  std::vector<int> min_samples_split{2, 3, 4, 5};
  std::size_t size() const { return n_estimators.size() * max_depth.size() * min_samples_split.size(); }
};

struct CvRow {
  Hyperparams params;
  std::vector<double> fold_scores;
  double mean = 0.0;
};

struct CvResult {
  Hyperparams best;
  std::vector<CvRow> table;  // grid order: n_estimators, max_depth, min_samples_split
};

/// Mean over targets of R^2; a constant target scores 1 when predicted
/// exactly and 0 otherwise.
double mean_r2(const Matrix& truth, const Matrix& predicted);
std::vector<double> r2_per_target(const Matrix& truth, const Matrix& predicted);

/// k-fold grid search on (X, T). Rows are shuffled with base.seed and cut into
/// k contiguous folds, the first n % k one row larger. Ties go to the smallest
/// (n_estimators, max_depth, min_samples_split).
CvResult grid_search_cv(const Matrix& X, const Matrix& T, const ParamGrid& grid, const Hyperparams& base, int k = 3,
                        int threads = 1);
std::string cv_report_csv(const CvResult& result);

struct ErrorMetric {
  /// |pred - truth| / |truth| per (sample, target); 0 where excluded.
  Matrix errors;
  std::vector<std::vector<bool>> included;
  std::size_t excluded = 0;
  std::size_t voltage_targets = 0;
  double voltage_mean = 0.0;
  double power_mean = 0.0;
  /// Mean over retained samples per target; NaN when a target has none.
  std::vector<double> per_target_mean;
};

/// The first `voltage_targets` columns form the voltage block, the rest the
/// power block. Entries with |truth| < epsilon are excluded and counted.
ErrorMetric relative_error(const Matrix& predicted, const Matrix& truth, std::size_t voltage_targets,
                           double epsilon = 1e-6);
ErrorMetric relative_error(const std::vector<double>& predicted, const std::vector<double>& truth,
                           std::size_t voltage_targets, double epsilon = 1e-6);

}  // namespace warmopf
