#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "warmopf/acopf.hpp"
#include "warmopf/error.hpp"

using namespace warmopf;

namespace {

// Offline PIPS reference objectives ($/h), line limits non-binding.
constexpr double kRef9 = 5296.686203991808;
constexpr double kRef14 = 8081.526257048728;
constexpr double kRef57 = 41737.78629258681;

void check_converged_quality(const OpfProblem& p, const OpfSolution& s) {
  REQUIRE(s.status == OpfStatus::Converged);
  CHECK(s.iterations <= 100);
  CHECK(max_constraint_violation(p, s) < 1e-6);
  const KktReport k = kkt_certificate(p, s);
  CHECK(k.feasibility < 1e-6);
  CHECK(k.stationarity < 1e-6);
  CHECK(k.complementarity < 1e-6);
  CHECK(s.trace.back().gap() < 1e-6);
}

// Three buses in a ring; the direct 1-3 line is rated below its unconstrained flow.
CaseData ring(double rate_mva) {
  return parse_case(
      "mpc.baseMVA = 100;\n"
      "mpc.bus = [1 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n"
      "           2 2 0 0 0 0 1 1 0 100 1 1.1 0.9;\n"
      "           3 1 150 30 0 0 1 1 0 100 1 1.1 0.9];\n"
      "mpc.gen = [1 0 0 300 -300 1 100 1 300 0;\n"
      "           2 0 0 300 -300 1 100 1 300 0];\n"
      "mpc.branch = [1 2 0.01 0.1 0.02 0 0 0 0 0 1 -360 360;\n"
      "              1 3 0.01 0.1 0.02 " + std::to_string(rate_mva) + " 0 0 0 0 1 -360 360;\n"
      "              2 3 0.01 0.1 0.02 0 0 0 0 0 1 -360 360];\n"
      "mpc.gencost = [2 0 0 3 0.01 10 0;\n"
      "               2 0 0 3 0.01 30 0];\n",
      "ring");
}

double flow_mva(const OpfProblem& p, const OpfSolution& s, std::size_t k, bool from_side) {
  const Branch& br = p.data().branches[k];
  const auto f = p.index().index_of(br.from), t = p.index().index_of(br.to);
  const oracles::C vf = std::polar(s.state.vm[f], s.state.va[f]), vt = std::polar(s.state.vm[t], s.state.va[t]);
  const BranchAdmittance ba = branch_admittance(br);
  return from_side ? std::abs(vf * std::conj(ba.yff * vf + ba.yft * vt))
                   : std::abs(vt * std::conj(ba.ytf * vf + ba.ytt * vt));
}

}  // namespace

TEST_CASE("quadratic objective") {
  CHECK(objective({0.0, 0.0}, {{1, 2, 3}, {4, 5, 6}}) == 9.0);
  CHECK(objective({2.0}, {{1, 2, 3}}) == 11.0);
  CHECK_THROWS_AS(objective({1.0}, {}), Error);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<CostCurve> costs{{0.3, 2, 1}, {1.5, -1, 0}, {0, 4, 2}};
  std::vector<double> pg{u(rng), u(rng), u(rng)};
  const auto g = objective_gradient(pg, costs);
  const auto fd = oracles::fd_jacobian([&](const std::vector<double>& x) { return std::vector<double>{objective(x, costs)}; }, pg);
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(g[k] - fd[0][k]) < 1e-8);
  const auto h = objective_hessian(costs);
  CHECK(h[1] == 3.0);
}

TEST_CASE("problem layout") {
  const OpfProblem p(fixtures::load("case14"));
  CHECK(p.num_variables() == 2 * 14 + 2 * 5);
  CHECK(p.num_equalities() == 28);
  CHECK(p.limited_branches().empty());
  const ipm::Vector lb = p.lower_bounds(), ub = p.upper_bounds();
  CHECK(lb[static_cast<Eigen::Index>(p.slack_index())] == 0.0);
  CHECK(ub[static_cast<Eigen::Index>(p.slack_index())] == 0.0);
  CHECK(lb[static_cast<Eigen::Index>(p.vm_offset())] == doctest::Approx(0.94));
  const OpfProblem limited(fixtures::load("case14"), true);
  CHECK(limited.limited_branches().size() == 20);
}

TEST_CASE("NLP derivatives match finite differences") {
  for (bool limits : {false, true}) {
    const OpfProblem p(limits ? fixtures::load("case9") : fixtures::load("case14"), limits);
    const AcOpfNlp nlp(p);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.3, 0.3), v(0.95, 1.05);
    std::vector<double> x(p.num_variables());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i >= p.vm_offset() && i < p.pg_offset()) ? v(rng) : u(rng);
    const ipm::Vector xv = Eigen::Map<const ipm::Vector>(x.data(), static_cast<Eigen::Index>(x.size()));

    auto as_std = [](const ipm::Vector& e) { return std::vector<double>(e.data(), e.data() + e.size()); };
    auto map = [](const std::vector<double>& s) {
      return ipm::Vector(Eigen::Map<const ipm::Vector>(s.data(), static_cast<Eigen::Index>(s.size())));
    };

    const auto fd_g = oracles::fd_jacobian([&](const std::vector<double>& s) { return as_std(nlp.equalities(map(s))); }, x);
    const Eigen::MatrixXd jg = Eigen::MatrixXd(nlp.equality_jacobian(xv));
    for (std::size_t i = 0; i < fd_g.size(); ++i) {
      for (std::size_t j = 0; j < x.size(); ++j) {
        CHECK(std::abs(jg(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - fd_g[i][j]) <
              1e-6 * (1 + std::abs(fd_g[i][j])));
      }
    }

    ipm::Vector lam(static_cast<Eigen::Index>(p.num_equalities())), mu(static_cast<Eigen::Index>(nlp.num_inequalities()));
    for (auto& l : lam) l = u(rng);
    for (auto& m : mu) m = std::abs(u(rng));
    if (limits) {
      const auto fd_h = oracles::fd_jacobian([&](const std::vector<double>& s) { return as_std(nlp.inequalities(map(s))); }, x);
      const Eigen::MatrixXd jh = Eigen::MatrixXd(nlp.inequality_jacobian(xv));
      for (std::size_t i = 0; i < fd_h.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) {
          CHECK(std::abs(jh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - fd_h[i][j]) <
                1e-6 * (1 + std::abs(fd_h[i][j])));
        }
      }
    }
    // Hessian of the Lagrangian against differences of its gradient
    auto lag_grad = [&](const std::vector<double>& s) {
      const ipm::Vector xs = map(s);
      ipm::Vector g = nlp.gradient(xs) + ipm::Vector(nlp.equality_jacobian(xs).transpose() * lam);
      if (limits) g += ipm::Vector(nlp.inequality_jacobian(xs).transpose() * mu);
      return as_std(g);
    };
    const auto fd_l = oracles::fd_jacobian(lag_grad, x);
    const Eigen::MatrixXd hl = Eigen::MatrixXd(nlp.lagrangian_hessian(xv, lam, mu));
    CHECK((hl - hl.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = 0; j < x.size(); ++j) {
        CHECK(std::abs(hl(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - fd_l[i][j]) <
              1e-5 * (1 + std::abs(fd_l[i][j])));
      }
    }
  }
}

TEST_CASE("one-bus dispatch equals the load") {
  const OpfProblem p(fixtures::one_bus());
  const OpfSolution s = solve_acopf(p, make_flat_start(p));
  check_converged_quality(p, s);
  CHECK(s.pg[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(20.0025).epsilon(1e-6));
}

TEST_CASE("reference objectives") {
  const std::pair<const char*, double> cases[] = {{"case9", kRef9}, {"case14", kRef14}, {"case57", kRef57}};
  for (const auto& [name, ref] : cases) {
    const OpfProblem p(fixtures::load(name));
    const OpfSolution s = solve_acopf(p, make_flat_start(p));
    check_converged_quality(p, s);
    CHECK_MESSAGE(std::abs(s.objective - ref) / ref < 1e-4, name << " objective " << s.objective);
    CHECK(s.objective >= 0.0);
  }
}

TEST_CASE("14-bus solution matches the reference dispatch") {
  const OpfProblem p(fixtures::load("case14"));
  const OpfSolution s = solve_acopf(p, make_flat_start(p));
  REQUIRE(s.status == OpfStatus::Converged);
  const double pg_ref[] = {194.330, 36.719, 28.743, 0.0, 8.495};
  for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(s.pg[k] * 100 - pg_ref[k]) < 0.05);
  const double vm_ref[] = {1.06,    1.04075, 1.01563, 1.01446, 1.01636, 1.06,    1.04635,
                           1.06,    1.04370, 1.03914, 1.04601, 1.04482, 1.03995, 1.02389};
  for (std::size_t m = 0; m < 14; ++m) CHECK(std::abs(s.state.vm[m] - vm_ref[m]) < 1e-3);
}

TEST_CASE("all three starts converge to feasible points") {
  for (const char* name : {"case9", "case14"}) {
    const OpfProblem p(fixtures::load(name));
    const OpfSolution flat = solve_acopf(p, make_flat_start(p));
    check_converged_quality(p, flat);
    const OpfSolution dc = solve_acopf(p, make_dc_start(p, solve_dcopf(p.data())));
    check_converged_quality(p, dc);
    std::vector<double> pred = flat.state.vm;
    pred.insert(pred.end(), flat.pg.begin(), flat.pg.end());
    const OpfSolution learned = solve_acopf(p, make_learned_start(p, pred));
    check_converged_quality(p, learned);
    CHECK(learned.iterations <= flat.iterations);
  }
}

TEST_CASE("barrier parameter settles") {
  const OpfProblem p(fixtures::load("case14"));
  const OpfSolution s = solve_acopf(p, make_flat_start(p));
  int spikes = 0;
  for (std::size_t k = 4; k < s.trace.size(); ++k) {
    if (s.trace[k].barrier > s.trace[k - 1].barrier) ++spikes;
  }
  CHECK(spikes <= 2);
}

TEST_CASE("fragile profile") {
  const OpfProblem p(fixtures::load("case9"));
  const OpfSolution s = solve_acopf(p, make_flat_start(p), SolverProfile::Fragile);
  CHECK(s.iterations <= 100);
  if (s.status == OpfStatus::Converged) check_converged_quality(p, s);
  CHECK(parse_profile("fragile") == SolverProfile::Fragile);
  CHECK_FALSE(parse_profile("bogus").has_value());
  CHECK(solver_options(SolverProfile::Fragile).slack_floor == 1e-6);
  CHECK(solver_options(SolverProfile::Robust).regularize);
}

TEST_CASE("line limits") {
  SUBCASE("non-binding limits leave the 9-bus optimum unchanged") {
    const OpfProblem p(fixtures::load("case9"), true);
    const OpfSolution s = solve_acopf(p, make_flat_start(p));
    check_converged_quality(p, s);
    CHECK(std::abs(s.objective - kRef9) / kRef9 < 1e-4);
  }
  SUBCASE("a binding limit is respected and costs money") {
    const OpfProblem free_p(ring(0.0));
    const OpfSolution free_s = solve_acopf(free_p, make_flat_start(free_p));
    REQUIRE(free_s.status == OpfStatus::Converged);
    const double unconstrained = flow_mva(free_p, free_s, 1, true);
    REQUIRE(unconstrained > 0.6);

    const OpfProblem p(ring(60.0), true);
    const OpfSolution s = solve_acopf(p, make_flat_start(p));
    check_converged_quality(p, s);
    CHECK(flow_mva(p, s, 1, true) <= 0.6 + 1e-6);
    CHECK(flow_mva(p, s, 1, false) <= 0.6 + 1e-6);
    CHECK(s.objective > free_s.objective);
    CHECK(*std::max_element(s.mu_flow.begin(), s.mu_flow.end()) > 1e-3);
  }
}

TEST_CASE("DC OPF") {
  SUBCASE("two-bus hand solution") {
    const DcSolution dc = solve_dcopf(fixtures::two_bus());
    CHECK(dc.pg[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(dc.va[0] == 0.0);
    CHECK(dc.va[1] == doctest::Approx(-0.05).epsilon(1e-6));
  }
  SUBCASE("zero load") {
    const DcSolution dc = solve_dcopf(fixtures::two_bus(0.0));
    CHECK(std::abs(dc.pg[0]) < 1e-6);
    CHECK(std::abs(dc.va[1]) < 1e-6);
  }
  SUBCASE("not enough capacity") {
    try {
      solve_dcopf(fixtures::two_bus(50.0, 0.0, 40.0));
      FAIL("expected Infeasible");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Infeasible);
    }
  }
  SUBCASE("lossless balance and B' va = injections on the 14-bus case") {
    const CaseData c = fixtures::load("case14");
    const DcSolution dc = solve_dcopf(c);
    double load = 0.0, gen = 0.0;
    for (const Bus& b : c.buses) load += b.p_load + b.g_shunt;
    for (double p : dc.pg) gen += p;
    CHECK(gen == doctest::Approx(load).epsilon(1e-8));
    const BusIndex idx = index_map(c);
    std::vector<double> flow_out(c.num_buses(), 0.0), inj(c.num_buses(), 0.0);
    for (const Branch& br : c.branches) {
      const auto f = idx.index_of(br.from), t = idx.index_of(br.to);
      const double pf = (dc.va[f] - dc.va[t] - br.shift) / (br.x * br.tap);
      flow_out[f] += pf;
      flow_out[t] -= pf;
    }
    for (std::size_t k = 0; k < c.num_gens(); ++k) inj[idx.index_of(c.gens[k].bus)] += dc.pg[k];
    for (std::size_t m = 0; m < c.num_buses(); ++m) {
      inj[m] -= c.buses[m].p_load + c.buses[m].g_shunt;
      CHECK(std::abs(flow_out[m] - inj[m]) < 1e-7);
    }
  }
}

TEST_CASE("start points") {
  const OpfProblem p(fixtures::load("case14"));
  const StartPoint flat = make_flat_start(p);
  CHECK(flat.label == StartLabel::Flat);
  CHECK(std::all_of(flat.vm.begin(), flat.vm.end(), [](double v) { return v == 1.0; }));
  CHECK(pack(p, flat).size() == static_cast<Eigen::Index>(2 * 14 + 2 * 5));

  const DcSolution dc = solve_dcopf(p.data());
  const StartPoint d = make_dc_start(p, dc);
  CHECK(d.label == StartLabel::DC);
  CHECK(d.va == dc.va);
  CHECK(d.pg == dc.pg);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(d.qg[k] == doctest::Approx(0.5 * (p.data().gens[k].q_min + p.data().gens[k].q_max)));
  }

  std::vector<double> pred(19, 1.2);
  const StartPoint l = make_learned_start(p, pred);
  CHECK(l.label == StartLabel::Learned);
  for (std::size_t m = 0; m < 14; ++m) CHECK(l.vm[m] == p.data().buses[m].v_max);
  for (std::size_t k = 0; k < 5; ++k) CHECK(l.pg[k] == std::min(1.2, p.data().gens[k].p_max));
  CHECK(std::all_of(l.va.begin(), l.va.end(), [](double v) { return v == 0.0; }));
  const StartPoint lc = make_learned_start(p, pred, LearnedAngles::CaseFile);
  CHECK(lc.va[0] == 0.0);
  CHECK(lc.va[1] == doctest::Approx(-4.98 * M_PI / 180.0));
  CHECK(lc.vm == l.vm);
  CHECK(parse_learned_angles("case") == LearnedAngles::CaseFile);
  CHECK_FALSE(parse_learned_angles("dc"));
  try {
    make_learned_start(p, std::vector<double>(18, 1.0));
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaMismatch);
  }

  CHECK(to_string(StartLabel::DC) == "dc");
  CHECK(parse_start_label("learned") == StartLabel::Learned);
}

TEST_CASE("symmetric reactive limits give a zero midpoint") {
  CaseData c = fixtures::two_bus();
  c.gens[0].q_min = -0.3;
  c.gens[0].q_max = 0.3;
  const OpfProblem p(c);
  CHECK(make_dc_start(p, solve_dcopf(c)).qg[0] == 0.0);
}

TEST_CASE("dc_start_or_flat falls back with a warning") {
  const OpfProblem p(fixtures::two_bus(50.0, 0.0, 40.0));
  std::string warning;
  const StartPoint s = dc_start_or_flat(p, &warning);
  CHECK(s.label == StartLabel::Flat);
  CHECK(warning.find("Infeasible") != std::string::npos);
}

TEST_CASE("max constraint violation") {
  const OpfProblem p(fixtures::load("case14"));
  SUBCASE("flat start with zero generation") {
    const StartPoint flat = make_flat_start(p);
    const auto dense = oracles::dense_ybus(p.data());
    const auto s = oracles::complex_power(dense, flat.vm, flat.va);
    double ref = 0.0;
    for (std::size_t m = 0; m < 14; ++m) {
      ref = std::max(ref, std::abs(s[m].real() + p.data().buses[m].p_load));
      ref = std::max(ref, std::abs(s[m].imag() + p.data().buses[m].q_load));
    }
    // bound excess: zero pg/qg inside every box here? measure it independently
    for (std::size_t k = 0; k < 5; ++k) {
      const Generator& g = p.data().gens[k];
      ref = std::max({ref, g.p_min, g.q_min});
      ref = std::max(ref, -g.q_max);
    }
    CHECK(max_constraint_violation(p, flat) == doctest::Approx(ref).epsilon(1e-12));
  }
  SUBCASE("only pg_max violated") {
    const OpfProblem q(fixtures::one_bus());
    StartPoint pt = make_flat_start(q);
    pt.pg[0] = q.data().gens[0].p_max + 0.2;
    // balance residual at bus 1: -pg + load, so move the load to match
    CaseData c = q.data();
    c.buses[0].p_load = pt.pg[0];
    const OpfProblem r(c);
    CHECK(max_constraint_violation(r, pt) == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("solution output") {
  const OpfProblem p(fixtures::load("case9"));
  const OpfSolution s = solve_acopf(p, make_flat_start(p));
  const nlohmann::json j = solution_to_json(p, s);
  CHECK(j["status"] == "Converged");
  CHECK(j["vm"].size() == 9);
  CHECK(j["trace"].size() == s.trace.size());
  const std::string csv = trace_to_csv(s);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,mu,feas,grad,comp,max_violation");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
    ++rows;
  }
  CHECK(rows == s.trace.size());
}

TEST_CASE("bad start points") {
  const OpfProblem p(fixtures::load("case9"));
  StartPoint s = make_flat_start(p);
  s.vm.pop_back();
  CHECK_THROWS_AS(solve_acopf(p, s), Error);
  s = make_flat_start(p);
  s.vm[0] = 0.0;
  CHECK_THROWS_AS(solve_acopf(p, s), Error);
}
