#include "warmopf/forest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <numeric>
#include <set>

#include "warmopf/error.hpp"
#include "warmopf/parallel.hpp"
#include "warmopf/util.hpp"

namespace warmopf {

namespace {

using Json = nlohmann::json;

constexpr std::uint64_t kFoldStream = 0x666f6c6473ULL;

Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

void require_finite(const Matrix& X, const Matrix& T) {
  if (!X.allFinite() || !T.allFinite()) throw Error(ErrorCode::InvalidValue, "training data contains non-finite values");
  if (X.rows() != T.rows()) throw Error(ErrorCode::DimensionMismatch, "X and T row counts differ");
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Matrix& T, const Hyperparams& params, bool keep_internal)
      : X_(X), T_(T), params_(params), keep_internal_(keep_internal) {
    const auto nf = static_cast<std::size_t>(X.cols());
    n_features_ = params.max_features > 0 ? std::min<std::size_t>(nf, static_cast<std::size_t>(params.max_features)) : nf;
    tree_.n_targets = static_cast<std::size_t>(T.cols());
  }

  Tree run(std::vector<std::size_t> rows, std::uint64_t seed) {
    work_ = std::move(rows);
    grow(0, work_.size(), 0, seed);
    return std::move(tree_);
  }

 private:
  int grow(std::size_t begin, std::size_t end, int depth, std::uint64_t seed) {
    const std::size_t n = end - begin;
    const auto m = static_cast<std::size_t>(T_.cols());
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[id].weight = static_cast<double>(n);
    tree_.nodes[id].depth = depth;

    std::vector<long double> sum(m, 0.0L);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t t = 0; t < m; ++t) sum[t] += T_(static_cast<Eigen::Index>(work_[i]), static_cast<Eigen::Index>(t));
    }
    std::vector<double> mean(m);
    for (std::size_t t = 0; t < m; ++t) mean[t] = static_cast<double>(sum[t] / static_cast<long double>(n));

    const auto split = (params_.max_depth > 0 && depth >= params_.max_depth) ||
                               n < static_cast<std::size_t>(params_.min_samples_split) || constant_targets(begin, end)
                           ? Split{}
                           : best_split(begin, end, mean, seed);
    if (split.feature < 0) {
      tree_.nodes[id].value = static_cast<std::int64_t>(tree_.values.size());
      tree_.values.insert(tree_.values.end(), mean.begin(), mean.end());
      return id;
    }
    if (keep_internal_) {
      tree_.nodes[id].value = static_cast<std::int64_t>(tree_.values.size());
      tree_.values.insert(tree_.values.end(), mean.begin(), mean.end());
    }
    const auto f = static_cast<Eigen::Index>(split.feature);
    const auto mid = std::stable_partition(work_.begin() + static_cast<std::ptrdiff_t>(begin),
                                           work_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t r) {
                                             return X_(static_cast<Eigen::Index>(r), f) <= split.threshold;
                                           });
    const auto cut = static_cast<std::size_t>(mid - work_.begin());
    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    const int left = grow(begin, cut, depth + 1, derive_seed(seed, 1));
    const int right = grow(cut, end, depth + 1, derive_seed(seed, 2));
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
  };

  bool constant_targets(std::size_t begin, std::size_t end) const {
    const auto first = static_cast<Eigen::Index>(work_[begin]);
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (T_.row(static_cast<Eigen::Index>(work_[i])) != T_.row(first)) return false;
    }
    return true;
  }

  Split best_split(std::size_t begin, std::size_t end, const std::vector<double>& mean, std::uint64_t seed) {
    const std::size_t n = end - begin;
    const auto m = static_cast<std::size_t>(T_.cols());
    // deviations from the node mean keep the score differences well conditioned
    std::vector<double> dev(n * m);
    long double sse = 0.0L;
    std::vector<long double> total(m, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < m; ++t) {
        const double d = T_(static_cast<Eigen::Index>(work_[begin + i]), static_cast<Eigen::Index>(t)) - mean[t];
        dev[i * m + t] = d;
        sse += static_cast<long double>(d) * d;
        total[t] += d;
      }
    }
    long double parent = 0.0L;
    for (std::size_t t = 0; t < m; ++t) parent += total[t] * total[t] / static_cast<long double>(n);
    const long double min_gain = sse * 1e-12L;

    Rng rng(seed);
    std::vector<std::size_t> order(static_cast<std::size_t>(X_.cols()));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < n_features_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
      std::swap(order[i], order[j]);
    }

    Split best;
    long double best_gain = 0.0L;
    std::vector<std::pair<double, std::size_t>> keyed(n);
    std::vector<long double> left(m);
    for (std::size_t c = 0; c < n_features_; ++c) {
      const auto f = static_cast<Eigen::Index>(order[c]);
      for (std::size_t i = 0; i < n; ++i) keyed[i] = {X_(static_cast<Eigen::Index>(work_[begin + i]), f), i};
      std::sort(keyed.begin(), keyed.end());
      if (keyed.front().first == keyed.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0L);
      for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        const double* d = &dev[keyed[pos].second * m];
        for (std::size_t t = 0; t < m; ++t) left[t] += d[t];
        if (!(keyed[pos].first < keyed[pos + 1].first)) continue;
        const auto nl = static_cast<long double>(pos + 1);
        const auto nr = static_cast<long double>(n - pos - 1);
        long double score = 0.0L;
        for (std::size_t t = 0; t < m; ++t) {
          const long double r = total[t] - left[t];
          score += left[t] * left[t] / nl + r * r / nr;
        }
        const long double gain = score - parent;
        if (gain > best_gain && gain > min_gain) {
          best_gain = gain;
          const double lo = keyed[pos].first, hi = keyed[pos + 1].first;
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi)) thr = lo;
          best.feature = static_cast<int>(order[c]);
          best.threshold = thr;
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  const Matrix& T_;
  const Hyperparams& params_;
  bool keep_internal_;
  std::size_t n_features_ = 0;
  std::vector<std::size_t> work_;
  Tree tree_;
};

Json node_to_json(const Tree& tree, int id) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.is_leaf()) {
    const auto* v = &tree.values[static_cast<std::size_t>(node.value)];
    return Json{{"n", node.weight}, {"v", std::vector<double>(v, v + tree.n_targets)}};
  }
  return Json{{"f", node.feature},
              {"t", node.threshold},
              {"n", node.weight},
              {"l", node_to_json(tree, node.left)},
              {"r", node_to_json(tree, node.right)}};
}

int node_from_json(const Json& j, Tree& tree, int depth, std::size_t n_features) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[id].weight = j.at("n").get<double>();
  tree.nodes[id].depth = depth;
  if (j.contains("v")) {
    const auto v = j.at("v").get<std::vector<double>>();
    if (v.size() != tree.n_targets) throw Error(ErrorCode::SchemaMismatch, "leaf value length differs from target count");
    tree.nodes[id].value = static_cast<std::int64_t>(tree.values.size());
    tree.values.insert(tree.values.end(), v.begin(), v.end());
    return id;
  }
  const int f = j.at("f").get<int>();
  if (f < 0 || static_cast<std::size_t>(f) >= n_features) throw Error(ErrorCode::SchemaMismatch, "split feature out of range");
  tree.nodes[id].feature = f;
  tree.nodes[id].threshold = j.at("t").get<double>();
  const int left = node_from_json(j.at("l"), tree, depth + 1, n_features);
  const int right = node_from_json(j.at("r"), tree, depth + 1, n_features);
  tree.nodes[id].left = left;
  tree.nodes[id].right = right;
  return id;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void Hyperparams::validate(std::size_t n_features) const {
  if (n_estimators < 1) throw Error(ErrorCode::InvalidValue, "n_estimators must be >= 1");
  if (max_depth < 0) throw Error(ErrorCode::InvalidValue, "max_depth must be >= 1 (0 for unlimited)");
  if (min_samples_split < 2) throw Error(ErrorCode::InvalidValue, "min_samples_split must be >= 2");
  if (max_features < 0 || static_cast<std::size_t>(max_features) > n_features) {
    throw Error(ErrorCode::InvalidValue, "max_features must lie in [1, " + std::to_string(n_features) + "] (0 for all)");
  }
}

const double* Tree::leaf_value(const double* x) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& n = nodes[id];
    id = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return &values[static_cast<std::size_t>(nodes[id].value)];
}

const double* Tree::truncated_value(const double* x, int max_depth, int min_samples_split) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf() && (max_depth <= 0 || nodes[id].depth < max_depth) &&
         nodes[id].weight >= static_cast<double>(min_samples_split)) {
    const TreeNode& n = nodes[id];
    id = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  if (nodes[id].value < 0) throw Error(ErrorCode::InvalidValue, "tree was fit without internal values");
  return &values[static_cast<std::size_t>(nodes[id].value)];
}

void Tree::strip_internal_values() {
  std::vector<double> kept;
  for (TreeNode& n : nodes) {
    if (!n.is_leaf()) {
      n.value = -1;
      continue;
    }
    const auto* v = &values[static_cast<std::size_t>(n.value)];
    n.value = static_cast<std::int64_t>(kept.size());
    kept.insert(kept.end(), v, v + n_targets);
  }
  values = std::move(kept);
}

Tree fit_tree(const Matrix& X, const Matrix& T, const std::vector<std::size_t>& rows, const Hyperparams& params,
              std::uint64_t seed, bool keep_internal_values) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "cannot fit a tree on zero samples");
  if (T.cols() == 0) throw Error(ErrorCode::EmptyInput, "no targets");
  params.validate(static_cast<std::size_t>(X.cols()));
  return TreeBuilder(X, T, params, keep_internal_values).run(rows, seed);
}

std::vector<double> ForestModel::predict(const std::vector<double>& x) const {
  if (x.size() != schema.features.size()) {
    throw Error(ErrorCode::SchemaMismatch, "feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                                               std::to_string(schema.features.size()));
  }
  const std::size_t m = schema.targets.size();
  std::vector<double> out(m, 0.0);
  for (const Tree& tree : trees) {
    const double* v = tree.leaf_value(x.data());
    for (std::size_t t = 0; t < m; ++t) out[t] += v[t];
  }
  for (double& v : out) v /= static_cast<double>(trees.size());
  return out;
}

Matrix ForestModel::predict(const Matrix& X, int threads) const {
  if (static_cast<std::size_t>(X.cols()) != schema.features.size()) {
    throw Error(ErrorCode::SchemaMismatch, "feature matrix has " + std::to_string(X.cols()) + " columns, model expects " +
                                               std::to_string(schema.features.size()));
  }
  Matrix out(X.rows(), static_cast<Eigen::Index>(schema.targets.size()));
  parallel_for(static_cast<std::size_t>(X.rows()), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    const std::vector<double> x(X.row(r).data(), X.row(r).data() + X.cols());
    const std::vector<double> y = predict(x);
    for (std::size_t t = 0; t < y.size(); ++t) out(r, static_cast<Eigen::Index>(t)) = y[t];
  });
  return out;
}

void ForestModel::check_schema(const std::vector<std::string>& features, const std::vector<std::string>& targets) const {
  if (features != schema.features) throw Error(ErrorCode::SchemaMismatch, "feature names differ from the model's");
  if (targets != schema.targets) throw Error(ErrorCode::SchemaMismatch, "target names differ from the model's");
}

ForestModel fit_forest(const Matrix& X, const Matrix& T, const Hyperparams& params, const ModelSchema& schema,
                       int threads, bool keep_internal_values) {
  if (X.rows() == 0) throw Error(ErrorCode::EmptyInput, "training set is empty");
  require_finite(X, T);
  params.validate(static_cast<std::size_t>(X.cols()));
  ForestModel model;
  model.params = params;
  model.schema = schema;
  if (model.schema.features.empty()) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) model.schema.features.push_back("x" + std::to_string(j));
  }
  if (model.schema.targets.empty()) {
    for (Eigen::Index j = 0; j < T.cols(); ++j) model.schema.targets.push_back("y" + std::to_string(j));
  }
  if (model.schema.features.size() != static_cast<std::size_t>(X.cols()) ||
      model.schema.targets.size() != static_cast<std::size_t>(T.cols())) {
    throw Error(ErrorCode::SchemaMismatch, "schema names do not match the matrix widths");
  }
  const auto n = static_cast<std::size_t>(X.rows());
  model.trees.resize(static_cast<std::size_t>(params.n_estimators));
  parallel_for(model.trees.size(), threads, [&](std::size_t i) {
    const std::uint64_t tree_seed = derive_seed(params.seed, i);
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      Rng rng(tree_seed);
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees[i] = fit_tree(X, T, rows, params, derive_seed(tree_seed, 0), keep_internal_values);
  });
  model.created = utc_now();
  return model;
}

ForestModel fit_forest(const Dataset& dataset, const Hyperparams& params, int threads) {
  if (dataset.train.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no training rows");
  ForestModel model = fit_forest(dataset.rows_of(dataset.X, dataset.train), dataset.rows_of(dataset.T, dataset.train),
                                 params, ModelSchema{dataset.feature_names, dataset.target_names}, threads);
  model.dataset_hash = dataset_hash(dataset);
  model.case_hash = dataset.meta.case_hash;
  return model;
}

Json model_to_json(const ForestModel& model) {
  const Hyperparams& p = model.params;
  Json trees = Json::array();
  for (const Tree& t : model.trees) trees.push_back(node_to_json(t, 0));
  return Json{{"format", "warmopf-forest"},
              {"version", kModelFormatVersion},
              {"params",
               {{"n_estimators", p.n_estimators},
                {"max_depth", p.max_depth},
                {"min_samples_split", p.min_samples_split},
                {"max_features", p.max_features},
                {"bootstrap", p.bootstrap},
                {"seed", p.seed}}},
              {"schema", {{"features", model.schema.features}, {"targets", model.schema.targets}}},
              {"training", {{"dataset_hash", model.dataset_hash}, {"case_hash", model.case_hash}, {"created", model.created}}},
              {"trees", trees}};
}

ForestModel model_from_json(const Json& j) {
  ForestModel model;
  try {
    if (j.at("format").get<std::string>() != "warmopf-forest") throw Error(ErrorCode::SchemaMismatch, "not a forest model");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::SchemaVersionMismatch,
                  "model format " + std::to_string(version) + ", expected " + std::to_string(kModelFormatVersion));
    }
    const Json& p = j.at("params");
    model.params.n_estimators = p.at("n_estimators").get<int>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.min_samples_split = p.at("min_samples_split").get<int>();
    model.params.max_features = p.at("max_features").get<int>();
    model.params.bootstrap = p.at("bootstrap").get<bool>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    model.schema.features = j.at("schema").at("features").get<std::vector<std::string>>();
    model.schema.targets = j.at("schema").at("targets").get<std::vector<std::string>>();
    const Json& tr = j.at("training");
    model.dataset_hash = tr.at("dataset_hash").get<std::string>();
    model.case_hash = tr.at("case_hash").get<std::string>();
    model.created = tr.at("created").get<std::string>();
    for (const Json& t : j.at("trees")) {
      Tree tree;
      tree.n_targets = model.schema.targets.size();
      node_from_json(t, tree, 0, model.schema.features.size());
      model.trees.push_back(std::move(tree));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed model: ") + e.what());
  }
  if (model.trees.size() != static_cast<std::size_t>(model.params.n_estimators)) {
    throw Error(ErrorCode::SchemaMismatch, "tree count differs from n_estimators");
  }
  return model;
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(model).dump() + "\n");
}

ForestModel load_model(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

std::vector<double> r2_per_target(const Matrix& truth, const Matrix& predicted) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols()) {
    throw Error(ErrorCode::LengthMismatch, "prediction and truth shapes differ");
  }
  if (truth.rows() == 0) throw Error(ErrorCode::EmptyInput, "no rows to score");
  std::vector<double> out;
  for (Eigen::Index t = 0; t < truth.cols(); ++t) {
    const double mean = truth.col(t).mean();
    const double ss_tot = (truth.col(t).array() - mean).square().sum();
    const double ss_res = (truth.col(t) - predicted.col(t)).squaredNorm();
    if (ss_tot == 0.0) {
      out.push_back(ss_res == 0.0 ? 1.0 : 0.0);
    } else {
      out.push_back(1.0 - ss_res / ss_tot);
    }
  }
  return out;
}

double mean_r2(const Matrix& truth, const Matrix& predicted) {
  const auto r2 = r2_per_target(truth, predicted);
  return std::accumulate(r2.begin(), r2.end(), 0.0) / static_cast<double>(r2.size());
}

CvResult grid_search_cv(const Matrix& X, const Matrix& T, const ParamGrid& grid_in, const Hyperparams& base, int k,
                        int threads) {
  if (k < 2) throw Error(ErrorCode::InvalidValue, "k must be at least 2");
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < static_cast<std::size_t>(k)) throw Error(ErrorCode::EmptyInput, "fewer training rows than folds");
  if (grid_in.size() == 0) throw Error(ErrorCode::EmptyInput, "empty parameter grid");
  require_finite(X, T);

  ParamGrid grid = grid_in;
  for (auto* v : {&grid.n_estimators, &grid.max_depth, &grid.min_samples_split}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  // unlimited depth sorts last
  std::stable_partition(grid.max_depth.begin(), grid.max_depth.end(), [](int d) { return d > 0; });
  for (int d : grid.max_depth) {
    Hyperparams p = base;
    p.max_depth = d;
    for (int e : grid.n_estimators) {
      for (int s : grid.min_samples_split) {
        p.n_estimators = e;
        p.min_samples_split = s;
        p.validate(static_cast<std::size_t>(X.cols()));
      }
    }
  }

  Hyperparams deep = base;
  deep.n_estimators = grid.n_estimators.back();
  deep.max_depth = grid.max_depth.back();
  deep.min_samples_split = grid.min_samples_split.front();

  const auto perm = random_permutation(n, derive_seed(base.seed, kFoldStream));
  const std::size_t nd = grid.max_depth.size(), ns = grid.min_samples_split.size(), ne = grid.n_estimators.size();
  // scores[e][d][s][fold]
  std::vector<double> scores(ne * nd * ns * static_cast<std::size_t>(k));
  std::size_t start = 0;
  for (int fold = 0; fold < k; ++fold) {
    const std::size_t size = n / static_cast<std::size_t>(k) + (static_cast<std::size_t>(fold) < n % static_cast<std::size_t>(k) ? 1 : 0);
    std::vector<std::size_t> val(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                 perm.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(start));
    train.insert(train.end(), perm.begin() + static_cast<std::ptrdiff_t>(start + size), perm.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    start += size;

    const ForestModel forest = fit_forest(select_rows(X, train), select_rows(T, train), deep, {}, threads, true);
    const Matrix Xv = select_rows(X, val), Tv = select_rows(T, val);
    const auto m = static_cast<std::size_t>(T.cols());
    std::vector<Matrix> sums(nd * ns, Matrix::Zero(Xv.rows(), T.cols()));
    std::size_t next_e = 0;
    for (std::size_t t = 0; t < forest.trees.size() && next_e < ne; ++t) {
      const Tree& tree = forest.trees[t];
      parallel_for(static_cast<std::size_t>(Xv.rows()), threads, [&](std::size_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t d = 0; d < nd; ++d) {
          for (std::size_t s = 0; s < ns; ++s) {
            const double* v = tree.truncated_value(Xv.row(r).data(), grid.max_depth[d], grid.min_samples_split[s]);
            Matrix& acc = sums[d * ns + s];
            for (std::size_t c = 0; c < m; ++c) acc(r, static_cast<Eigen::Index>(c)) += v[c];
          }
        }
      });
      if (static_cast<int>(t + 1) == grid.n_estimators[next_e]) {
        for (std::size_t d = 0; d < nd; ++d) {
          for (std::size_t s = 0; s < ns; ++s) {
            const Matrix pred = sums[d * ns + s] / static_cast<double>(t + 1);
            scores[((next_e * nd + d) * ns + s) * static_cast<std::size_t>(k) + static_cast<std::size_t>(fold)] =
                mean_r2(Tv, pred);
          }
        }
        ++next_e;
      }
    }
  }

  CvResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t d = 0; d < nd; ++d) {
      for (std::size_t s = 0; s < ns; ++s) {
        CvRow row;
        row.params = base;
        row.params.n_estimators = grid.n_estimators[e];
        row.params.max_depth = grid.max_depth[d];
        row.params.min_samples_split = grid.min_samples_split[s];
        const auto* f = &scores[((e * nd + d) * ns + s) * static_cast<std::size_t>(k)];
        row.fold_scores.assign(f, f + k);
        row.mean = std::accumulate(row.fold_scores.begin(), row.fold_scores.end(), 0.0) / k;
        if (row.mean > best) {
          best = row.mean;
          result.best = row.params;
        }
        result.table.push_back(std::move(row));
      }
    }
  }
  return result;
}

std::string cv_report_csv(const CvResult& result) {
  std::string out = "n_estimators,max_depth,min_samples_split";
  const std::size_t k = result.table.empty() ? 0 : result.table.front().fold_scores.size();
  for (std::size_t f = 0; f < k; ++f) out += ",fold_" + std::to_string(f + 1);
  out += ",mean_score,selected\n";
  for (const CvRow& row : result.table) {
    out += std::to_string(row.params.n_estimators) + "," + std::to_string(row.params.max_depth) + "," +
           std::to_string(row.params.min_samples_split);
    for (double s : row.fold_scores) out += "," + format_double(s);
    out += "," + format_double(row.mean) + "," + (row.params == result.best ? "1" : "0") + "\n";
  }
  return out;
}

ErrorMetric relative_error(const Matrix& predicted, const Matrix& truth, std::size_t voltage_targets, double epsilon) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw Error(ErrorCode::LengthMismatch, "prediction and truth shapes differ");
  }
  if (voltage_targets > static_cast<std::size_t>(truth.cols())) {
    throw Error(ErrorCode::LengthMismatch, "voltage block wider than the target vector");
  }
  ErrorMetric em;
  em.voltage_targets = voltage_targets;
  em.errors = Matrix::Zero(truth.rows(), truth.cols());
  em.included.assign(static_cast<std::size_t>(truth.rows()), std::vector<bool>(static_cast<std::size_t>(truth.cols()), false));
  double sum_v = 0.0, sum_p = 0.0;
  std::size_t n_v = 0, n_p = 0;
  std::vector<double> col_sum(static_cast<std::size_t>(truth.cols()), 0.0);
  std::vector<std::size_t> col_n(static_cast<std::size_t>(truth.cols()), 0);
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    for (Eigen::Index t = 0; t < truth.cols(); ++t) {
      const double x = truth(i, t);
      if (std::abs(x) < epsilon) {
        ++em.excluded;
        continue;
      }
      const double e = std::abs(predicted(i, t) - x) / std::abs(x);
      em.errors(i, t) = e;
      em.included[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] = true;
      col_sum[static_cast<std::size_t>(t)] += e;
      ++col_n[static_cast<std::size_t>(t)];
      if (static_cast<std::size_t>(t) < voltage_targets) {
        sum_v += e;
        ++n_v;
      } else {
        sum_p += e;
        ++n_p;
      }
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  em.voltage_mean = n_v ? sum_v / static_cast<double>(n_v) : nan;
  em.power_mean = n_p ? sum_p / static_cast<double>(n_p) : nan;
  for (std::size_t t = 0; t < col_sum.size(); ++t) {
    em.per_target_mean.push_back(col_n[t] ? col_sum[t] / static_cast<double>(col_n[t]) : nan);
  }
  return em;
}

ErrorMetric relative_error(const std::vector<double>& predicted, const std::vector<double>& truth,
                           std::size_t voltage_targets, double epsilon) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "prediction and truth lengths differ");
  const auto n = static_cast<Eigen::Index>(truth.size());
  return relative_error(Eigen::Map<const Matrix>(predicted.data(), 1, n), Eigen::Map<const Matrix>(truth.data(), 1, n),
                        voltage_targets, epsilon);
}

}  // namespace warmopf
