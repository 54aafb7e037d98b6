#include "warmopf/casefile.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "warmopf/error.hpp"
#include "warmopf/util.hpp"

namespace warmopf {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Row {
  std::vector<double> values;
  int line = 0;
};

struct RawCase {
  std::optional<double> base_mva;
  std::map<std::string, std::vector<Row>, std::less<>> blocks;
};

bool is_matrix_block(std::string_view name) {
  return name == "bus" || name == "gen" || name == "branch" || name == "gencost";
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::optional<double> parse_number(std::string_view tok) {
  double v = 0.0;
  std::string_view t = tok;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  if (t == "Inf" || t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-Inf" || t == "-inf") return -std::numeric_limits<double>::infinity();
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

// Splits one matrix row into numbers; separators are whitespace and commas.
std::vector<double> parse_row(std::string_view text, std::string_view block, int line) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ',')) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != ',') ++j;
    auto v = parse_number(text.substr(i, j - i));
    if (!v) {
      throw Error(ErrorCode::MalformedRow, std::string(block) + " line " + std::to_string(line) +
                                               ": bad token '" + std::string(text.substr(i, j - i)) + "'");
    }
    out.push_back(*v);
    i = j;
  }
  return out;
}

// Parses the statement-level structure: `[mpc.]name = value;` assignments,
// with matrix blocks possibly spanning many lines.
RawCase scan(std::string_view text) {
  RawCase raw;
  std::istringstream in{std::string(text)};
  std::string line_buf;
  int line_no = 0;

  std::string open_block;   // matrix block being accumulated
  char skip_until = '\0';   // closing bracket of an ignored multi-line value
  std::string pending_row;  // row text across line continuations
  int pending_line = 0;

  auto flush_row = [&](int line) {
    auto t = trim(pending_row);
    if (!t.empty()) {
      raw.blocks[open_block].push_back({parse_row(t, open_block, pending_line ? pending_line : line),
                                        pending_line ? pending_line : line});
    }
    pending_row.clear();
    pending_line = 0;
  };

  // Consumes matrix body text; returns true once the closing ']' is seen.
  auto consume_body = [&](std::string_view body, int line) {
    for (char c : body) {
      if (c == ']') {
        flush_row(line);
        return true;
      }
      if (c == ';') {
        flush_row(line);
      } else {
        if (pending_row.empty() && !std::isspace(static_cast<unsigned char>(c))) pending_line = line;
        pending_row.push_back(c);
      }
    }
    // A newline also ends a row in MATLAB matrix syntax.
    flush_row(line);
    return false;
  };

  while (std::getline(in, line_buf)) {
    ++line_no;
    std::string_view line = line_buf;
    if (auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);
    if (line.find("...") != std::string_view::npos) line = line.substr(0, line.find("..."));

    if (!open_block.empty()) {
      if (consume_body(line, line_no)) open_block.clear();
      continue;
    }
    if (skip_until != '\0') {
      if (line.find(skip_until) != std::string_view::npos) skip_until = '\0';
      continue;
    }

    auto t = trim(line);
    if (t.empty() || t.starts_with("function")) continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos) continue;
    auto lhs = trim(t.substr(0, eq));
    auto rhs = trim(t.substr(eq + 1));
    if (auto dot = lhs.rfind('.'); dot != std::string_view::npos) lhs = lhs.substr(dot + 1);
    if (lhs.empty() || !std::all_of(lhs.begin(), lhs.end(), is_ident_char)) continue;

    if (is_matrix_block(lhs)) {
      if (rhs.empty() || rhs.front() != '[') {
        throw Error(ErrorCode::MalformedRow, std::string(lhs) + " line " + std::to_string(line_no) +
                                                 ": expected '['");
      }
      open_block = std::string(lhs);
      raw.blocks[open_block];  // present even when empty
      if (consume_body(rhs.substr(1), line_no)) open_block.clear();
    } else if (lhs == "baseMVA") {
      auto num = rhs;
      if (auto semi = num.find(';'); semi != std::string_view::npos) num = num.substr(0, semi);
      auto v = parse_number(trim(num));
      if (!v) {
        throw Error(ErrorCode::MalformedRow, "baseMVA line " + std::to_string(line_no) + ": not a number");
      }
      raw.base_mva = *v;
    } else if (!rhs.empty() && (rhs.front() == '[' || rhs.front() == '{')) {
      const char close = rhs.front() == '[' ? ']' : '}';
      if (rhs.find(close) == std::string_view::npos) skip_until = close;
    }
  }
  if (!open_block.empty()) {
    throw Error(ErrorCode::MalformedRow, open_block + ": unterminated matrix block");
  }
  return raw;
}

void require_columns(const Row& row, std::size_t n, std::string_view block) {
  if (row.values.size() < n) {
    throw Error(ErrorCode::MalformedRow, std::string(block) + " line " + std::to_string(row.line) + ": expected at least " +
                                             std::to_string(n) + " columns, got " +
                                             std::to_string(row.values.size()));
  }
}

int as_int(double v, std::string_view block, int line) {
  if (!std::isfinite(v) || v != std::floor(v)) {
    throw Error(ErrorCode::MalformedRow, std::string(block) + " line " + std::to_string(line) + ": expected an integer");
  }
  return static_cast<int>(v);
}

}  // namespace

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "PV";
    case BusKind::PQ: return "PQ";
  }
  return "?";
}

bool CaseData::same_network(const CaseData& other) const {
  return base_mva == other.base_mva && buses == other.buses && gens == other.gens &&
         branches == other.branches && costs == other.costs;
}

BusIndex::BusIndex(std::vector<int> sorted_ids) : ids_(std::move(sorted_ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) pos_.emplace(ids_[i], i);
}

std::size_t BusIndex::index_of(int id) const {
  auto it = pos_.find(id);
  if (it == pos_.end()) throw Error(ErrorCode::DanglingReference, "bus " + std::to_string(id));
  return it->second;
}

CaseData parse_case(std::string_view text, std::string name) {
  RawCase raw = scan(text);
  for (std::string_view block : {"bus", "gen", "branch", "gencost"}) {
    if (!raw.blocks.count(block)) throw Error(ErrorCode::MissingBlock, std::string(block));
  }
  if (!raw.base_mva) throw Error(ErrorCode::MissingBlock, "baseMVA");

  CaseData data;
  data.name = std::move(name);
  data.base_mva = *raw.base_mva;
  if (!(data.base_mva > 0.0) || !std::isfinite(data.base_mva)) {
    throw Error(ErrorCode::InvalidValue, "baseMVA must be positive");
  }
  const double base = data.base_mva;

  for (const Row& row : raw.blocks["bus"]) {
    require_columns(row, 13, "bus");
    const auto& v = row.values;
    Bus b;
    b.id = as_int(v[0], "bus", row.line);
    switch (as_int(v[1], "bus", row.line)) {
      case 1: b.kind = BusKind::PQ; break;
      case 2: b.kind = BusKind::PV; break;
      case 3: b.kind = BusKind::Slack; break;
      case 4:
        throw Error(ErrorCode::InvalidValue, "bus line " + std::to_string(row.line) + ": isolated buses are not supported");
      default:
        throw Error(ErrorCode::MalformedRow, "bus line " + std::to_string(row.line) + ": unknown bus type");
    }
    b.p_load = v[2] / base;
    b.q_load = v[3] / base;
    b.g_shunt = v[4] / base;
    b.b_shunt = v[5] / base;
    b.v_init = v[7];
    b.theta_init = v[8] * kDegToRad;
    b.v_max = v[11];
    b.v_min = v[12];
    data.buses.push_back(b);
  }

  const auto& gen_rows = raw.blocks["gen"];
  const auto& cost_rows = raw.blocks["gencost"];
  // gencost may carry a second half with reactive costs; those are ignored.
  if (cost_rows.size() != gen_rows.size() && cost_rows.size() != 2 * gen_rows.size()) {
    throw Error(ErrorCode::MalformedRow, "gencost has " + std::to_string(cost_rows.size()) + " rows for " +
                                             std::to_string(gen_rows.size()) + " generators");
  }
  if (cost_rows.size() == 2 * gen_rows.size() && !gen_rows.empty()) {
    data.warnings.push_back("reactive power cost rows in gencost ignored");
  }

  for (std::size_t k = 0; k < gen_rows.size(); ++k) {
    const Row& row = gen_rows[k];
    require_columns(row, 10, "gen");
    const auto& v = row.values;
    const Row& crow = cost_rows[k];
    require_columns(crow, 4, "gencost");
    const auto& c = crow.values;
    const int model = as_int(c[0], "gencost", crow.line);
    if (model == 1) {
      throw Error(ErrorCode::UnsupportedCostModel, "gencost line " + std::to_string(crow.line) + ": piecewise-linear cost");
    }
    if (model != 2) {
      throw Error(ErrorCode::MalformedRow, "gencost line " + std::to_string(crow.line) + ": unknown cost model");
    }
    const int ncoef = as_int(c[3], "gencost", crow.line);
    if (ncoef > 3) {
      throw Error(ErrorCode::UnsupportedCostModel,
                  "gencost line " + std::to_string(crow.line) + ": polynomial degree above 2");
    }
    require_columns(crow, 4 + static_cast<std::size_t>(std::max(ncoef, 0)), "gencost");

    if (v[7] <= 0.0) {
      data.warnings.push_back("out-of-service generator at bus " + std::to_string(as_int(v[0], "gen", row.line)) +
                              " dropped");
      continue;
    }
    Generator g;
    g.bus = as_int(v[0], "gen", row.line);
    g.p_init = v[1] / base;
    g.q_init = v[2] / base;
    g.q_max = v[3] / base;
    g.q_min = v[4] / base;
    g.p_max = v[8] / base;
    g.p_min = v[9] / base;
    data.gens.push_back(g);

    CostCurve cost;
    // coefficients are listed highest order first
    std::vector<double> coef(c.begin() + 4, c.begin() + 4 + std::max(ncoef, 0));
    while (coef.size() < 3) coef.insert(coef.begin(), 0.0);
    cost.a = coef[0] * base * base;
    cost.b = coef[1] * base;
    cost.c = coef[2];
    data.costs.push_back(cost);
  }

  for (const Row& row : raw.blocks["branch"]) {
    require_columns(row, 11, "branch");
    const auto& v = row.values;
    Branch br;
    br.from = as_int(v[0], "branch", row.line);
    br.to = as_int(v[1], "branch", row.line);
    br.r = v[2];
    br.x = v[3];
    br.b_ch = v[4];
    br.rate_a = v[5] / base;
    br.tap = v[8] == 0.0 ? 1.0 : v[8];
    br.shift = v[9] * kDegToRad;
    br.in_service = v[10] > 0.0;
    data.branches.push_back(br);
  }

  validate_case(data);
  return data;
}

void validate_case(CaseData& data) {
  if (!(data.base_mva > 0.0) || !std::isfinite(data.base_mva)) {
    throw Error(ErrorCode::InvalidValue, "base_mva must be positive");
  }
  if (data.buses.empty()) throw Error(ErrorCode::InvalidValue, "case has no buses");
  std::stable_sort(data.buses.begin(), data.buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < data.buses.size(); ++i) {
    if (data.buses[i].id == data.buses[i - 1].id) {
      throw Error(ErrorCode::InvalidValue, "duplicate bus id " + std::to_string(data.buses[i].id));
    }
  }
  const BusIndex idx = index_map(data);

  std::size_t slack = 0;
  for (const Bus& b : data.buses) slack += b.kind == BusKind::Slack ? 1 : 0;
  if (slack == 0) throw Error(ErrorCode::NoSlackBus, "no reference bus");
  if (slack > 1) throw Error(ErrorCode::MultipleSlackBuses, std::to_string(slack) + " reference buses");

  if (data.gens.empty()) throw Error(ErrorCode::InvalidValue, "case has no in-service generators");
  if (data.costs.size() != data.gens.size()) {
    throw Error(ErrorCode::MalformedRow, "cost curve count does not match generator count");
  }

  std::set<int> gen_buses;
  for (const Generator& g : data.gens) {
    if (!idx.contains(g.bus)) throw Error(ErrorCode::DanglingReference, "generator bus " + std::to_string(g.bus));
    if (!(g.p_min <= g.p_max)) {
      throw Error(ErrorCode::InvalidValue, "generator at bus " + std::to_string(g.bus) + ": p_min > p_max");
    }
    if (!(g.q_min <= g.q_max)) {
      throw Error(ErrorCode::InvalidValue, "generator at bus " + std::to_string(g.bus) + ": q_min > q_max");
    }
    gen_buses.insert(g.bus);
  }
  for (const CostCurve& c : data.costs) {
    if (!(c.a >= 0.0)) throw Error(ErrorCode::InvalidValue, "negative quadratic cost coefficient");
  }

  for (Branch& br : data.branches) {
    if (!idx.contains(br.from)) throw Error(ErrorCode::DanglingReference, "branch from-bus " + std::to_string(br.from));
    if (!idx.contains(br.to)) throw Error(ErrorCode::DanglingReference, "branch to-bus " + std::to_string(br.to));
    if (br.r < 0.0) throw Error(ErrorCode::InvalidValue, "negative branch resistance");
    if (!(br.tap > 0.0)) throw Error(ErrorCode::InvalidValue, "branch tap must be positive");
    if (br.in_service && br.r == 0.0 && br.x == 0.0) {
      throw Error(ErrorCode::ZeroImpedanceBranch,
                  "branch " + std::to_string(br.from) + "-" + std::to_string(br.to));
    }
  }

  for (Bus& b : data.buses) {
    if (!(b.v_min > 0.0) || !(b.v_min <= b.v_max)) {
      throw Error(ErrorCode::InvalidValue, "bus " + std::to_string(b.id) + ": need 0 < v_min <= v_max");
    }
    if (b.v_init < b.v_min || b.v_init > b.v_max) {
      const double clamped = std::clamp(b.v_init, b.v_min, b.v_max);
      data.warnings.push_back("bus " + std::to_string(b.id) + ": initial voltage " + format_double(b.v_init) +
                              " clamped to " + format_double(clamped));
      b.v_init = clamped;
    }
    if (b.kind == BusKind::PV && !gen_buses.count(b.id)) {
      data.warnings.push_back("bus " + std::to_string(b.id) + ": PV bus without generator demoted to PQ");
      b.kind = BusKind::PQ;
    }
    if (b.kind == BusKind::Slack && !gen_buses.count(b.id)) {
      data.warnings.push_back("bus " + std::to_string(b.id) + ": reference bus has no generator");
    }
  }
}

BusIndex index_map(const CaseData& data) {
  std::vector<int> ids;
  ids.reserve(data.buses.size());
  for (const Bus& b : data.buses) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());
  return BusIndex(std::move(ids));
}

CaseData load_case(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRow, path.string() + ": " + e.what());
    }
    CaseData data = case_from_json(j);
    if (data.name.empty()) data.name = path.stem().string();
    return data;
  }
  return parse_case(text, path.stem().string());
}

std::string write_case(const CaseData& data) {
  const double base = data.base_mva;
  constexpr double kRadToDeg = 180.0 / std::numbers::pi;
  auto f = format_double;
  std::ostringstream out;
  out << "function mpc = " << (data.name.empty() ? "case" : data.name) << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << f(base) << ";\n\n";

  out << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\nmpc.bus = [\n";
  for (const Bus& b : data.buses) {
    const int type = b.kind == BusKind::Slack ? 3 : b.kind == BusKind::PV ? 2 : 1;
    out << "\t" << b.id << "\t" << type << "\t" << f(b.p_load * base) << "\t" << f(b.q_load * base) << "\t"
        << f(b.g_shunt * base) << "\t" << f(b.b_shunt * base) << "\t1\t" << f(b.v_init) << "\t"
        << f(b.theta_init * kRadToDeg) << "\t0\t1\t" << f(b.v_max) << "\t" << f(b.v_min) << ";\n";
  }
  out << "];\n\n";

  out << "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\nmpc.gen = [\n";
  for (const Generator& g : data.gens) {
    out << "\t" << g.bus << "\t" << f(g.p_init * base) << "\t" << f(g.q_init * base) << "\t" << f(g.q_max * base)
        << "\t" << f(g.q_min * base) << "\t1\t" << f(base) << "\t1\t" << f(g.p_max * base) << "\t"
        << f(g.p_min * base) << ";\n";
  }
  out << "];\n\n";

  out << "%% fbus tbus r x b rateA rateB rateC ratio angle status\nmpc.branch = [\n";
  for (const Branch& br : data.branches) {
    out << "\t" << br.from << "\t" << br.to << "\t" << f(br.r) << "\t" << f(br.x) << "\t" << f(br.b_ch) << "\t"
        << f(br.rate_a * base) << "\t0\t0\t" << f(br.tap) << "\t" << f(br.shift * kRadToDeg) << "\t"
        << (br.in_service ? 1 : 0) << ";\n";
  }
  out << "];\n\n";

  out << "%% model startup shutdown n c2 c1 c0\nmpc.gencost = [\n";
  for (const CostCurve& c : data.costs) {
    out << "\t2\t0\t0\t3\t" << f(c.a / (base * base)) << "\t" << f(c.b / base) << "\t" << f(c.c) << ";\n";
  }
  out << "];\n";
  return out.str();
}

nlohmann::json case_to_json(const CaseData& data) {
  using nlohmann::json;
  json j;
  j["name"] = data.name;
  j["base_mva"] = data.base_mva;
  j["buses"] = json::array();
  for (const Bus& b : data.buses) {
    j["buses"].push_back({{"id", b.id}, {"kind", to_string(b.kind)}, {"p_load", b.p_load},
                          {"q_load", b.q_load}, {"g_shunt", b.g_shunt}, {"b_shunt", b.b_shunt},
                          {"v_min", b.v_min}, {"v_max", b.v_max}, {"v_init", b.v_init},
                          {"theta_init", b.theta_init}});
  }
  j["gens"] = json::array();
  for (const Generator& g : data.gens) {
    j["gens"].push_back({{"bus", g.bus}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"q_min", g.q_min},
                         {"q_max", g.q_max}, {"p_init", g.p_init}, {"q_init", g.q_init}});
  }
  j["branches"] = json::array();
  for (const Branch& br : data.branches) {
    j["branches"].push_back({{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x}, {"b_ch", br.b_ch},
                             {"tap", br.tap}, {"shift", br.shift}, {"rate_a", br.rate_a},
                             {"status", br.in_service}});
  }
  j["costs"] = json::array();
  for (const CostCurve& c : data.costs) j["costs"].push_back({{"a", c.a}, {"b", c.b}, {"c", c.c}});
  return j;
}

CaseData case_from_json(const nlohmann::json& j) {
  CaseData data;
  try {
    data.name = j.value("name", std::string{});
    data.base_mva = j.at("base_mva").get<double>();
    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      const auto kind = jb.at("kind").get<std::string>();
      if (kind == "slack") b.kind = BusKind::Slack;
      else if (kind == "PV") b.kind = BusKind::PV;
      else if (kind == "PQ") b.kind = BusKind::PQ;
      else throw Error(ErrorCode::MalformedRow, "bus kind '" + kind + "'");
      b.p_load = jb.at("p_load");
      b.q_load = jb.at("q_load");
      b.g_shunt = jb.at("g_shunt");
      b.b_shunt = jb.at("b_shunt");
      b.v_min = jb.at("v_min");
      b.v_max = jb.at("v_max");
      b.v_init = jb.at("v_init");
      b.theta_init = jb.at("theta_init");
      data.buses.push_back(b);
    }
    for (const auto& jg : j.at("gens")) {
      Generator g;
      g.bus = jg.at("bus");
      g.p_min = jg.at("p_min");
      g.p_max = jg.at("p_max");
      g.q_min = jg.at("q_min");
      g.q_max = jg.at("q_max");
      g.p_init = jg.at("p_init");
      g.q_init = jg.at("q_init");
      data.gens.push_back(g);
    }
    for (const auto& jr : j.at("branches")) {
      Branch br;
      br.from = jr.at("from");
      br.to = jr.at("to");
      br.r = jr.at("r");
      br.x = jr.at("x");
      br.b_ch = jr.at("b_ch");
      br.tap = jr.at("tap");
      br.shift = jr.at("shift");
      br.rate_a = jr.value("rate_a", 0.0);
      br.in_service = jr.at("status");
      data.branches.push_back(br);
    }
    for (const auto& jc : j.at("costs")) data.costs.push_back({jc.at("a"), jc.at("b"), jc.at("c")});
  } catch (const nlohmann::json::out_of_range& e) {
    throw Error(ErrorCode::MissingBlock, e.what());
  } catch (const nlohmann::json::type_error& e) {
    throw Error(ErrorCode::MalformedRow, e.what());
  }
  validate_case(data);
  return data;
}

std::string case_hash(const CaseData& data) {
  CaseData anon = data;
  anon.name = "case";
  return sha256_hex(write_case(anon));
}

}  // namespace warmopf
