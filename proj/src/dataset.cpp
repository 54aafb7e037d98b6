#include "warmopf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "warmopf/error.hpp"
#include "warmopf/parallel.hpp"
#include "warmopf/util.hpp"

namespace warmopf {

namespace {

constexpr const char* kChecksumFile = "SHA256SUMS";
constexpr const char* kDataFiles[] = {"meta.json", "X.csv", "T.csv", "aux.csv"};

std::string to_csv(const std::vector<std::string>& names, const Matrix& m) {
  std::string out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out += ',';
    out += names[j];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void from_csv(const std::string& text, const std::string& file, std::vector<std::string>& names, Matrix& m) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, file + ": empty file");
  names = split_line(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != names.size()) {
      throw Error(ErrorCode::IoError, file + ": row " + std::to_string(rows.size() + 1) + " has " +
                                          std::to_string(cells.size()) + " cells, header has " +
                                          std::to_string(names.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, file + ": bad number '" + c + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  m.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
}

std::vector<std::string> aux_names_for(const CaseData& data) {
  std::vector<std::string> names;
  for (const Bus& b : data.buses) names.push_back("va@" + std::to_string(b.id));
  for (std::size_t k = 0; k < data.gens.size(); ++k) names.push_back("qg@" + std::to_string(k));
  names.emplace_back("objective");
  return names;
}

struct Attempt {
  bool converged = false;
  std::vector<double> x, t, aux;
};

Attempt run_attempt(const CaseData& data, const SampleSpec& spec, std::size_t index, SolverProfile profile) {
  const std::vector<double> factors = draw_factors(spec, data.num_buses(), index);
  const CaseData scaled = scale_loads(data, factors);
  const OpfProblem problem(scaled);
  const OpfSolution sol = solve_acopf(problem, make_flat_start(problem), profile);
  Attempt a;
  a.converged = sol.status == OpfStatus::Converged;
  if (!a.converged) return a;
  a.x = load_features(scaled);
  a.t = sol.state.vm;
  a.t.insert(a.t.end(), sol.pg.begin(), sol.pg.end());
  a.aux = sol.state.va;
  a.aux.insert(a.aux.end(), sol.qg.begin(), sol.qg.end());
  a.aux.push_back(sol.objective);
  return a;
}

}  // namespace

std::vector<double> load_features(const CaseData& data) {
  std::vector<double> x;
  x.reserve(2 * data.num_buses());
  for (const Bus& b : data.buses) x.push_back(b.p_load);
  for (const Bus& b : data.buses) x.push_back(b.q_load);
  return x;
}

Matrix Dataset::rows_of(const Matrix& m, const std::vector<std::size_t>& idx) const {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

std::vector<std::string> feature_names(const CaseData& data) {
  std::vector<std::string> names;
  for (const Bus& b : data.buses) names.push_back("p_load@" + std::to_string(b.id));
  for (const Bus& b : data.buses) names.push_back("q_load@" + std::to_string(b.id));
  return names;
}

std::vector<std::string> target_names(const CaseData& data) {
  std::vector<std::string> names;
  for (const Bus& b : data.buses) names.push_back("vm@" + std::to_string(b.id));
  // generators are named by position; several may share a bus
  for (std::size_t k = 0; k < data.gens.size(); ++k) {
    names.push_back("pg@" + std::to_string(k) + ":" + std::to_string(data.gens[k].bus));
  }
  return names;
}

CaseData scale_loads(const CaseData& data, const std::vector<double>& factors) {
  if (factors.size() != data.num_buses()) throw Error(ErrorCode::DimensionMismatch, "one load factor per bus expected");
  CaseData out = data;
  for (std::size_t m = 0; m < factors.size(); ++m) {
    out.buses[m].p_load *= factors[m];
    out.buses[m].q_load *= factors[m];
  }
  return out;
}

std::vector<double> draw_factors(const SampleSpec& spec, std::size_t n_buses, std::size_t attempt) {
  Rng rng(derive_seed(spec.seed, attempt));
  std::vector<double> f(n_buses);
  if (spec.per_bus_independent) {
    for (double& v : f) v = rng.uniform(spec.scale_low, spec.scale_high);
  } else {
    std::fill(f.begin(), f.end(), rng.uniform(spec.scale_low, spec.scale_high));
  }
  return f;
}

Dataset generate(const CaseData& data, const SampleSpec& spec, const GenerateOptions& options) {
  if (!(spec.scale_low > 0.0) || !(spec.scale_low <= spec.scale_high)) {
    throw Error(ErrorCode::InvalidValue, "need 0 < scale_low <= scale_high");
  }
  if (spec.n_samples == 0) throw Error(ErrorCode::EmptyInput, "n_samples must be positive");
  {
    const OpfProblem base(data);
    const OpfSolution s = solve_acopf(base, make_flat_start(base), options.profile);
    if (s.status != OpfStatus::Converged) {
      throw Error(ErrorCode::SanityGateFailed,
                  "default-load ACOPF did not converge (" + std::string(to_string(s.status)) + ")");
    }
  }

  Dataset ds;
  ds.feature_names = feature_names(data);
  ds.target_names = target_names(data);
  ds.aux_names = aux_names_for(data);
  ds.meta.case_name = data.name;
  ds.meta.case_hash = case_hash(data);
  ds.meta.spec = spec;
  ds.meta.profile = std::string(to_string(options.profile));

  const std::size_t budget = 3 * spec.n_samples;
  const int threads = std::max(1, options.threads);
  const std::size_t batch = static_cast<std::size_t>(threads) * 4;
  std::vector<Attempt> kept;
  std::size_t attempts = 0;
  std::size_t next = 0;
  while (kept.size() < spec.n_samples && next < budget) {
    const std::size_t count = std::min(batch, budget - next);
    std::vector<Attempt> results(count);
    parallel_for(count, threads, [&](std::size_t i) { results[i] = run_attempt(data, spec, next + i, options.profile); });
    // consume in attempt order so the result does not depend on the batch size
    for (std::size_t i = 0; i < count && kept.size() < spec.n_samples; ++i) {
      ++attempts;
      if (results[i].converged) kept.push_back(std::move(results[i]));
    }
    next += count;
    if (options.progress) options.progress(kept.size(), attempts);
  }
  ds.meta.attempts = attempts;
  ds.meta.discards = attempts - kept.size();
  if (kept.size() < spec.n_samples) {
    throw Error(ErrorCode::BudgetExhausted, "collected " + std::to_string(kept.size()) + " of " +
                                                std::to_string(spec.n_samples) + " rows in " +
                                                std::to_string(attempts) + " attempts");
  }

  const auto rows = static_cast<Eigen::Index>(kept.size());
  ds.X.resize(rows, static_cast<Eigen::Index>(ds.feature_names.size()));
  ds.T.resize(rows, static_cast<Eigen::Index>(ds.target_names.size()));
  ds.aux.resize(rows, static_cast<Eigen::Index>(ds.aux_names.size()));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Attempt& a = kept[static_cast<std::size_t>(i)];
    ds.X.row(i) = Eigen::Map<const Eigen::RowVectorXd>(a.x.data(), static_cast<Eigen::Index>(a.x.size()));
    ds.T.row(i) = Eigen::Map<const Eigen::RowVectorXd>(a.t.data(), static_cast<Eigen::Index>(a.t.size()));
    ds.aux.row(i) = Eigen::Map<const Eigen::RowVectorXd>(a.aux.data(), static_cast<Eigen::Index>(a.aux.size()));
  }
  return ds;
}

void split(Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidValue, "train fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.rows();
  const auto perm = random_permutation(n, seed);
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  dataset.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  dataset.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  dataset.meta.train_fraction = train_fraction;
  dataset.meta.split_seed = seed;
}

std::pair<double, double> row_mismatch(const CaseData& data, const Dataset& ds, std::size_t row) {
  const std::size_t n = data.num_buses();
  const std::size_t g = data.num_gens();
  if (ds.feature_names.size() != 2 * n || ds.target_names.size() != n + g || ds.aux_names.size() != n + g + 1) {
    throw Error(ErrorCode::SchemaMismatch, "dataset columns do not match case '" + data.name + "'");
  }
  if (row >= ds.rows()) throw Error(ErrorCode::InvalidValue, "row out of range");
  const auto r = static_cast<Eigen::Index>(row);
  CaseData loaded = data;
  for (std::size_t m = 0; m < n; ++m) {
    loaded.buses[m].p_load = ds.X(r, static_cast<Eigen::Index>(m));
    loaded.buses[m].q_load = ds.X(r, static_cast<Eigen::Index>(n + m));
  }
  VoltageState state;
  std::vector<double> pg(g), qg(g);
  for (std::size_t m = 0; m < n; ++m) {
    state.vm.push_back(ds.T(r, static_cast<Eigen::Index>(m)));
    state.va.push_back(ds.aux(r, static_cast<Eigen::Index>(m)));
  }
  for (std::size_t k = 0; k < g; ++k) {
    pg[k] = ds.T(r, static_cast<Eigen::Index>(n + k));
    qg[k] = ds.aux(r, static_cast<Eigen::Index>(n + k));
  }
  const BusIndex idx = index_map(loaded);
  return mismatch_norms(loaded, build_admittance(loaded, idx), state, pg, qg);
}

nlohmann::json meta_to_json(const Dataset& ds) {
  const DatasetMeta& m = ds.meta;
  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["case"] = {{"name", m.case_name}, {"hash", m.case_hash}};
  j["spec"] = {{"n_samples", m.spec.n_samples},
               {"scale_low", m.spec.scale_low},
               {"scale_high", m.spec.scale_high},
               {"seed", m.spec.seed},
               {"per_bus_independent", m.spec.per_bus_independent},
               {"reactive_load", "scaled with active load (constant power factor)"}};
  j["profile"] = m.profile;
  j["attempts"] = m.attempts;
  j["discards"] = m.discards;
  j["split"] = {{"train_fraction", m.train_fraction}, {"seed", m.split_seed}, {"train", ds.train}, {"test", ds.test}};
  return j;
}

std::string dataset_hash(const Dataset& ds) {
  return sha256_hex(to_csv(ds.feature_names, ds.X) + to_csv(ds.target_names, ds.T) + to_csv(ds.aux_names, ds.aux));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const std::string files[] = {meta_to_json(ds).dump(2) + "\n", to_csv(ds.feature_names, ds.X),
                               to_csv(ds.target_names, ds.T), to_csv(ds.aux_names, ds.aux)};
  std::string sums;
  for (std::size_t i = 0; i < 4; ++i) {
    write_text_file(dir / kDataFiles[i], files[i]);
    sums += sha256_hex(files[i]) + "  " + kDataFiles[i] + "\n";
  }
  write_text_file(dir / kChecksumFile, sums);
}

Dataset load_dataset(const std::filesystem::path& dir, const CaseData* data) {
  std::string contents[4];
  for (std::size_t i = 0; i < 4; ++i) contents[i] = read_text_file(dir / kDataFiles[i]);
  {
    std::istringstream sums(read_text_file(dir / kChecksumFile));
    std::string digest, name;
    std::size_t verified = 0;
    while (sums >> digest >> name) {
      for (std::size_t i = 0; i < 4; ++i) {
        if (name != kDataFiles[i]) continue;
        if (sha256_hex(contents[i]) != digest) throw Error(ErrorCode::ChecksumMismatch, (dir / name).string());
        ++verified;
      }
    }
    if (verified != 4) throw Error(ErrorCode::ChecksumMismatch, "checksum list incomplete in " + dir.string());
  }

  Dataset ds;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(contents[0]);
    const int version = j.at("schema_version").get<int>();
    if (version != kDatasetSchemaVersion) {
      throw Error(ErrorCode::SchemaVersionMismatch,
                  "dataset schema " + std::to_string(version) + ", expected " + std::to_string(kDatasetSchemaVersion));
    }
    DatasetMeta& m = ds.meta;
    m.case_name = j.at("case").at("name").get<std::string>();
    m.case_hash = j.at("case").at("hash").get<std::string>();
    const auto& s = j.at("spec");
    m.spec.n_samples = s.at("n_samples").get<std::size_t>();
    m.spec.scale_low = s.at("scale_low").get<double>();
    m.spec.scale_high = s.at("scale_high").get<double>();
    m.spec.seed = s.at("seed").get<std::uint64_t>();
    m.spec.per_bus_independent = s.at("per_bus_independent").get<bool>();
    m.profile = j.at("profile").get<std::string>();
    m.attempts = j.at("attempts").get<std::size_t>();
    m.discards = j.at("discards").get<std::size_t>();
    const auto& sp = j.at("split");
    m.train_fraction = sp.at("train_fraction").get<double>();
    m.split_seed = sp.at("seed").get<std::uint64_t>();
    ds.train = sp.at("train").get<std::vector<std::size_t>>();
    ds.test = sp.at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, (dir / "meta.json").string() + ": " + e.what());
  }
  from_csv(contents[1], "X.csv", ds.feature_names, ds.X);
  from_csv(contents[2], "T.csv", ds.target_names, ds.T);
  from_csv(contents[3], "aux.csv", ds.aux_names, ds.aux);
  if (ds.T.rows() != ds.X.rows() || ds.aux.rows() != ds.X.rows()) {
    throw Error(ErrorCode::IoError, "row counts differ between X.csv, T.csv and aux.csv");
  }
  for (std::size_t i : ds.train) {
    if (i >= ds.rows()) throw Error(ErrorCode::IoError, "split index out of range");
  }
  for (std::size_t i : ds.test) {
    if (i >= ds.rows()) throw Error(ErrorCode::IoError, "split index out of range");
  }
  if (data) {
    if (auto w = case_mismatch(ds, *data)) ds.warnings.push_back(*w);
  }
  return ds;
}

std::optional<std::string> case_mismatch(const Dataset& ds, const CaseData& data) {
  const std::string h = case_hash(data);
  if (h == ds.meta.case_hash) return std::nullopt;
  return "SchemaVersionMismatch: dataset was generated from case '" + ds.meta.case_name + "' (hash " +
         ds.meta.case_hash.substr(0, 12) + "), not from '" + data.name + "' (hash " + h.substr(0, 12) + ")";
}

}  // namespace warmopf
