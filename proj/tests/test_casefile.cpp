#include <doctest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "fixtures.hpp"
#include "warmopf/casefile.hpp"
#include "warmopf/error.hpp"
#include "warmopf/util.hpp"

using namespace warmopf;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_case(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

// Pd column of the bus block, read with a regex independent of the parser.
std::vector<double> raw_bus_pd(const std::string& text) {
  std::vector<double> pd;
  const auto start = text.find("mpc.bus = [");
  const auto stop = text.find("];", start);
  std::istringstream block(text.substr(start, stop - start));
  std::string line;
  std::getline(block, line);
  const std::regex num(R"([-+0-9.eE]+)");
  while (std::getline(block, line)) {
    std::vector<double> row;
    for (std::sregex_iterator it(line.begin(), line.end(), num), end; it != end; ++it) row.push_back(std::stod(it->str()));
    if (row.size() >= 3) pd.push_back(row[2]);
  }
  return pd;
}

bool close(double a, double b, double rel) {
  return a == b || std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

bool near_network(const CaseData& a, const CaseData& b, double rel) {
  if (a.base_mva != b.base_mva || a.buses.size() != b.buses.size() || a.gens.size() != b.gens.size() ||
      a.branches.size() != b.branches.size() || a.costs.size() != b.costs.size()) {
    return false;
  }
  bool ok = true;
  for (std::size_t i = 0; i < a.buses.size(); ++i) {
    const Bus &x = a.buses[i], &y = b.buses[i];
    ok &= x.id == y.id && x.kind == y.kind && close(x.p_load, y.p_load, rel) && close(x.q_load, y.q_load, rel) &&
          close(x.g_shunt, y.g_shunt, rel) && close(x.b_shunt, y.b_shunt, rel) && close(x.v_min, y.v_min, rel) &&
          close(x.v_max, y.v_max, rel) && close(x.v_init, y.v_init, rel) && close(x.theta_init, y.theta_init, rel);
  }
  for (std::size_t i = 0; i < a.gens.size(); ++i) {
    const Generator &x = a.gens[i], &y = b.gens[i];
    ok &= x.bus == y.bus && close(x.p_min, y.p_min, rel) && close(x.p_max, y.p_max, rel) &&
          close(x.q_min, y.q_min, rel) && close(x.q_max, y.q_max, rel) && close(x.p_init, y.p_init, rel) &&
          close(x.q_init, y.q_init, rel);
  }
  for (std::size_t i = 0; i < a.branches.size(); ++i) {
    const Branch &x = a.branches[i], &y = b.branches[i];
    ok &= x.from == y.from && x.to == y.to && x.in_service == y.in_service && close(x.r, y.r, rel) &&
          close(x.x, y.x, rel) && close(x.b_ch, y.b_ch, rel) && close(x.tap, y.tap, rel) &&
          close(x.shift, y.shift, rel) && close(x.rate_a, y.rate_a, rel);
  }
  for (std::size_t i = 0; i < a.costs.size(); ++i) {
    ok &= close(a.costs[i].a, b.costs[i].a, rel) && close(a.costs[i].b, b.costs[i].b, rel) &&
          close(a.costs[i].c, b.costs[i].c, rel);
  }
  return ok;
}

}  // namespace

TEST_CASE("two-bus loads are converted to per unit") {
  const CaseData c = fixtures::two_bus();
  REQUIRE(c.buses.size() == 2);
  CHECK(c.buses[1].p_load == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.buses[0].kind == BusKind::Slack);
  CHECK(c.branches[0].x == doctest::Approx(0.1));
  CHECK(c.costs[0].b == doctest::Approx(100.0));  // 1 $/MWh on a 100 MVA base
  CHECK(c.costs[0].a == 0.0);
}

TEST_CASE("IEEE 14-bus dimensions") {
  const CaseData c = fixtures::load("case14");
  CHECK(c.num_buses() == 14);
  CHECK(c.num_gens() == 5);
  CHECK(c.num_buses() + c.num_gens() == 19);
}

TEST_CASE("target dimensions across the corpus") {
  CHECK(fixtures::load("case9").num_buses() == 9);
  const CaseData c57 = fixtures::load("case57");
  CHECK(c57.num_buses() + c57.num_gens() == 64);
  const CaseData c118 = fixtures::load("case118");
  CHECK(c118.num_buses() + c118.num_gens() == 172);
}

TEST_CASE("gencost shorter than gen is rejected") {
  std::string text = fixtures::two_bus_text();
  text = replace_once(text, "mpc.gen = [\n", "mpc.gen = [\n  2 0 0 10 -10 1 100 1 10 0;\n");
  CHECK(code_of(text) == ErrorCode::MalformedRow);
}

TEST_CASE("piecewise-linear costs are rejected") {
  const std::string text = replace_once(fixtures::two_bus_text(), "2 0 0 3 0 1 0;", "1 0 0 2 0 0 100 1000;");
  CHECK(code_of(text) == ErrorCode::UnsupportedCostModel);
}

TEST_CASE("cubic costs are rejected") {
  const std::string text = replace_once(fixtures::two_bus_text(), "2 0 0 3 0 1 0;", "2 0 0 4 1 0 1 0;");
  CHECK(code_of(text) == ErrorCode::UnsupportedCostModel);
}

TEST_CASE("slack bus count") {
  const std::string none = replace_once(fixtures::two_bus_text(), "1 3 0 0", "1 2 0 0");
  CHECK(code_of(none) == ErrorCode::NoSlackBus);
  const std::string two = replace_once(fixtures::two_bus_text(), "2 1 50", "2 3 50");
  CHECK(code_of(two) == ErrorCode::MultipleSlackBuses);
}

TEST_CASE("missing blocks and dangling references") {
  const std::string no_gencost = fixtures::two_bus_text().substr(0, fixtures::two_bus_text().find("mpc.gencost"));
  CHECK(code_of(no_gencost) == ErrorCode::MissingBlock);
  const std::string dangling = replace_once(fixtures::two_bus_text(), "1 2 0 0.1", "1 7 0 0.1");
  CHECK(code_of(dangling) == ErrorCode::DanglingReference);
  const std::string bad_token = replace_once(fixtures::two_bus_text(), "1 2 0 0.1", "1 2 0 zz");
  CHECK(code_of(bad_token) == ErrorCode::MalformedRow);
}

TEST_CASE("zero impedance branch") {
  const std::string text = replace_once(fixtures::two_bus_text(), "1 2 0 0.1", "1 2 0 0");
  CHECK(code_of(text) == ErrorCode::ZeroImpedanceBranch);
}

TEST_CASE("out-of-service branches are kept and flagged") {
  std::string text = replace_once(fixtures::two_bus_text(), "mpc.branch = [\n", "mpc.branch = [\n  1 2 0 0.2 0 0 0 0 0 0 0 -360 360;\n");
  const CaseData c = parse_case(text);
  REQUIRE(c.branches.size() == 2);
  CHECK_FALSE(c.branches[0].in_service);
  CHECK(c.branches[1].in_service);
}

TEST_CASE("bare block names and comments are accepted") {
  const CaseData c = parse_case(
      "% comment\n"
      "baseMVA = 100;\n"
      "bus = [1 3 0 0 0 0 1 1 0 100 1 1.1 0.9; 2 1 10 5 0 0 1 1 0 100 1 1.1 0.9];  % trailing\n"
      "gen = [1 0 0 10 -10 1 100 1 100 0];\n"
      "branch = [1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360];\n"
      "gencost = [2 0 0 3 0 10 0];\n");
  CHECK(c.num_buses() == 2);
  CHECK(c.buses[1].q_load == doctest::Approx(0.05));
}

TEST_CASE("angles are converted to radians") {
  const CaseData c = fixtures::load("case14");
  CHECK(c.buses[1].theta_init == doctest::Approx(-4.98 * M_PI / 180.0).epsilon(1e-14));
}

TEST_CASE("validation clamps v_init and demotes PV buses without generators") {
  std::string text = replace_once(fixtures::two_bus_text(), "2 1 50", "2 2 50");
  text = replace_once(text, "2 2 50.000000 0.000000 0 0 1 1 0", "2 2 50.000000 0.000000 0 0 1 1.5 0");
  const CaseData c = parse_case(text);
  CHECK(c.buses[1].kind == BusKind::PQ);
  CHECK(c.buses[1].v_init == doctest::Approx(1.1));
  CHECK(c.warnings.size() >= 2);
}

TEST_CASE("index_map is sorted by external id") {
  CaseData c = fixtures::two_bus();
  c.buses[0].id = 5;
  c.buses[1].id = 1;
  c.gens[0].bus = 5;
  c.branches[0].from = 5;
  c.branches[0].to = 1;
  Bus extra = c.buses[1];
  extra.id = 9;
  c.buses.push_back(extra);
  Branch b2 = c.branches[0];
  b2.to = 9;
  c.branches.push_back(b2);
  validate_case(c);
  const BusIndex idx = index_map(c);
  CHECK(idx.index_of(1) == 0);
  CHECK(idx.index_of(5) == 1);
  CHECK(idx.index_of(9) == 2);
  CHECK(idx.id_of(1) == 5);
  CHECK(c.buses[1].kind == BusKind::Slack);

  const BusIndex simple = index_map(fixtures::two_bus());
  CHECK(simple.index_of(1) == 0);
  CHECK(simple.index_of(2) == 1);
  CHECK_THROWS_AS(simple.index_of(3), Error);
}

TEST_CASE("per-unit consistency against the raw file") {
  for (const char* name : {"case9", "case14", "case57", "case118"}) {
    const std::string text = read_text_file(fixtures::data_path(std::string(name) + ".m"));
    const CaseData c = parse_case(text, name);
    const std::vector<double> pd = raw_bus_pd(text);
    REQUIRE(pd.size() == c.num_buses());
    for (std::size_t m = 0; m < pd.size(); ++m) {
      const double mw = c.buses[m].p_load * c.base_mva;
      CHECK(std::abs(mw - pd[m]) <= 1e-9 * std::max(1.0, std::abs(pd[m])));
    }
  }
}

TEST_CASE("round trip through case syntax and JSON") {
  for (const char* name : {"case9", "case14", "case57", "case118"}) {
    const CaseData c = fixtures::load(name);
    // per-unit values pass through a multiply and a divide by base_mva
    const CaseData back = parse_case(write_case(c), name);
    CHECK(near_network(back, c, 1e-14));
    const CaseData js = case_from_json(nlohmann::json::parse(case_to_json(c).dump()));
    CHECK(js.same_network(c));
    CHECK(case_hash(js) == case_hash(c));
  }
}

TEST_CASE("round trip is exact for values representable in the emitted precision") {
  const CaseData c = fixtures::two_bus();
  CHECK(parse_case(write_case(c)).same_network(c));
}

TEST_CASE("JSON mirror loads through load_case") {
  const CaseData c = fixtures::load("case9");
  const auto path = std::filesystem::temp_directory_path() / "warmopf_case9_mirror.json";
  write_text_file(path, case_to_json(c).dump(2));
  CHECK(load_case(path).same_network(c));
  std::filesystem::remove(path);
}

TEST_CASE("case hash distinguishes networks") {
  CHECK(case_hash(fixtures::two_bus(50.0)) != case_hash(fixtures::two_bus(60.0)));
  CHECK(case_hash(fixtures::two_bus()).size() == 64);
}
