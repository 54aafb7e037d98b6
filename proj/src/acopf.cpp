#include "warmopf/acopf.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "warmopf/error.hpp"
#include "warmopf/util.hpp"

namespace warmopf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Triplets = std::vector<Eigen::Triplet<double>>;

// Value, gradient and Hessian of one term over four local variables.
struct Local4 {
  double val = 0.0;
  std::array<double, 4> grad{};
  std::array<std::array<double, 4>, 4> hess{};
};

// vm_a * vm_b * (alpha cos(va_a - va_b) + beta sin(va_a - va_b)) with local
// variable order (va_a, va_b, vm_a, vm_b). Every term of the bus balance and
// branch flow equations has this form; with a == b it reduces to alpha*vm^2
// once the derivatives are summed onto shared variables.
Local4 pair_term(double alpha, double beta, double va_a, double va_b, double vm_a, double vm_b) {
  const double th = va_a - va_b;
  const double c = std::cos(th);
  const double s = std::sin(th);
  const double u = alpha * c + beta * s;
  const double w = -alpha * s + beta * c;
  const double pv = vm_a * vm_b;
  Local4 t;
  t.val = pv * u;
  t.grad = {pv * w, -pv * w, vm_b * u, vm_a * u};
  auto& h = t.hess;
  h[0][0] = -pv * u;
  h[0][1] = pv * u;
  h[1][1] = -pv * u;
  h[0][2] = vm_b * w;
  h[0][3] = vm_a * w;
  h[1][2] = -vm_b * w;
  h[1][3] = -vm_a * w;
  h[2][3] = u;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) h[i][j] = h[j][i];
  }
  return t;
}

// Adds `t` into `acc` with t's variables mapped onto acc's through `map`.
void accumulate(Local4& acc, const Local4& t, const std::array<int, 4>& map) {
  acc.val += t.val;
  for (int i = 0; i < 4; ++i) {
    acc.grad[map[i]] += t.grad[i];
    for (int j = 0; j < 4; ++j) acc.hess[map[i]][map[j]] += t.hess[i][j];
  }
}

std::array<int, 4> global_vars(const OpfProblem& p, std::size_t a, std::size_t b) {
  return {static_cast<int>(p.va_offset() + a), static_cast<int>(p.va_offset() + b),
          static_cast<int>(p.vm_offset() + a), static_cast<int>(p.vm_offset() + b)};
}

double box_midpoint(double lo, double hi) {
  if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
  return std::clamp(0.0, lo, hi);
}

// Apparent power squared at both ends of a limited branch, over local
// variables (va_f, va_t, vm_f, vm_t).
struct FlowTerms {
  Local4 pf, qf, pt, qt;
};

FlowTerms branch_flows(const Branch& br, double va_f, double va_t, double vm_f, double vm_t) {
  const BranchAdmittance ba = branch_admittance(br);
  FlowTerms ft;
  constexpr std::array<int, 4> ff{0, 0, 2, 2}, ftm{0, 1, 2, 3}, tt{1, 1, 3, 3}, tf{1, 0, 3, 2};
  accumulate(ft.pf, pair_term(ba.yff.real(), 0.0, va_f, va_f, vm_f, vm_f), ff);
  accumulate(ft.pf, pair_term(ba.yft.real(), ba.yft.imag(), va_f, va_t, vm_f, vm_t), ftm);
  accumulate(ft.qf, pair_term(-ba.yff.imag(), 0.0, va_f, va_f, vm_f, vm_f), ff);
  accumulate(ft.qf, pair_term(-ba.yft.imag(), ba.yft.real(), va_f, va_t, vm_f, vm_t), ftm);
  accumulate(ft.pt, pair_term(ba.ytt.real(), 0.0, va_t, va_t, vm_t, vm_t), tt);
  accumulate(ft.pt, pair_term(ba.ytf.real(), ba.ytf.imag(), va_t, va_f, vm_t, vm_f), tf);
  accumulate(ft.qt, pair_term(-ba.ytt.imag(), 0.0, va_t, va_t, vm_t, vm_t), tt);
  accumulate(ft.qt, pair_term(-ba.ytf.imag(), ba.ytf.real(), va_t, va_f, vm_t, vm_f), tf);
  return ft;
}

// |S|^2 - rate^2 built from its P and Q terms.
Local4 squared_flow(const Local4& p, const Local4& q, double rate) {
  Local4 h;
  h.val = p.val * p.val + q.val * q.val - rate * rate;
  for (int i = 0; i < 4; ++i) {
    h.grad[i] = 2.0 * (p.val * p.grad[i] + q.val * q.grad[i]);
    for (int j = 0; j < 4; ++j) {
      h.hess[i][j] = 2.0 * (p.grad[i] * p.grad[j] + p.val * p.hess[i][j] + q.grad[i] * q.grad[j] +
                            q.val * q.hess[i][j]);
    }
  }
  return h;
}

std::array<int, 4> branch_vars(const OpfProblem& p, const Branch& br) {
  const auto f = p.index().index_of(br.from);
  const auto t = p.index().index_of(br.to);
  return global_vars(p, f, t);
}

std::array<double, 4> local_values(const ipm::Vector& x, const std::array<int, 4>& vars) {
  return {x[vars[0]], x[vars[1]], x[vars[2]], x[vars[3]]};
}

}  // namespace

// ---------------------------------------------------------------------------

OpfProblem::OpfProblem(CaseData data, bool enforce_line_limits, double cost_scale)
    : data_(std::move(data)), enforce_line_limits_(enforce_line_limits), cost_scale_(cost_scale) {
  validate_case(data_);
  idx_ = index_map(data_);
  y_ = build_admittance(data_, idx_);
  for (std::size_t m = 0; m < data_.buses.size(); ++m) {
    if (data_.buses[m].kind == BusKind::Slack) slack_ = m;
  }
  for (const Generator& g : data_.gens) gen_bus_.push_back(idx_.index_of(g.bus));
  if (enforce_line_limits_) {
    for (std::size_t k = 0; k < data_.branches.size(); ++k) {
      const Branch& br = data_.branches[k];
      if (br.in_service && br.rate_a > 0.0 && std::isfinite(br.rate_a)) limited_.push_back(k);
    }
  }
}

ipm::Vector OpfProblem::lower_bounds() const {
  ipm::Vector lb(static_cast<Eigen::Index>(num_variables()));
  const auto n = static_cast<Eigen::Index>(num_buses());
  const auto g = static_cast<Eigen::Index>(num_gens());
  for (Eigen::Index m = 0; m < n; ++m) {
    lb[m] = -kInf;
    lb[n + m] = data_.buses[static_cast<std::size_t>(m)].v_min;
  }
  lb[static_cast<Eigen::Index>(slack_)] = 0.0;
  for (Eigen::Index k = 0; k < g; ++k) {
    lb[2 * n + k] = data_.gens[static_cast<std::size_t>(k)].p_min;
    lb[2 * n + g + k] = data_.gens[static_cast<std::size_t>(k)].q_min;
  }
  return lb;
}

ipm::Vector OpfProblem::upper_bounds() const {
  ipm::Vector ub(static_cast<Eigen::Index>(num_variables()));
  const auto n = static_cast<Eigen::Index>(num_buses());
  const auto g = static_cast<Eigen::Index>(num_gens());
  for (Eigen::Index m = 0; m < n; ++m) {
    ub[m] = kInf;
    ub[n + m] = data_.buses[static_cast<std::size_t>(m)].v_max;
  }
  ub[static_cast<Eigen::Index>(slack_)] = 0.0;
  for (Eigen::Index k = 0; k < g; ++k) {
    ub[2 * n + k] = data_.gens[static_cast<std::size_t>(k)].p_max;
    ub[2 * n + g + k] = data_.gens[static_cast<std::size_t>(k)].q_max;
  }
  return ub;
}

std::string_view to_string(StartLabel label) {
  switch (label) {
    case StartLabel::Flat: return "flat";
    case StartLabel::DC: return "dc";
    case StartLabel::Learned: return "learned";
    case StartLabel::Custom: return "custom";
  }
  return "?";
}

std::optional<StartLabel> parse_start_label(std::string_view text) {
  if (text == "flat") return StartLabel::Flat;
  if (text == "dc") return StartLabel::DC;
  if (text == "learned") return StartLabel::Learned;
  if (text == "custom") return StartLabel::Custom;
  return std::nullopt;
}

std::string_view to_string(SolverProfile profile) {
  return profile == SolverProfile::Robust ? "robust" : "fragile";
}

std::optional<SolverProfile> parse_profile(std::string_view text) {
  if (text == "robust") return SolverProfile::Robust;
  if (text == "fragile") return SolverProfile::Fragile;
  return std::nullopt;
}

ipm::Options solver_options(SolverProfile profile) {
  ipm::Options opt;
  if (profile == SolverProfile::Fragile) {
    opt.regularize = false;
    opt.slack_floor = 1e-6;
    opt.step_fallback = false;
  }
  return opt;
}

std::string_view to_string(OpfStatus status) {
  switch (status) {
    case OpfStatus::Converged: return "Converged";
    case OpfStatus::MaxIterations: return "MaxIterations";
    case OpfStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

double objective(const std::vector<double>& pg, const std::vector<CostCurve>& costs) {
  if (pg.size() != costs.size()) throw Error(ErrorCode::DimensionMismatch, "pg and cost curves differ in length");
  double f = 0.0;
  for (std::size_t k = 0; k < pg.size(); ++k) f += (costs[k].a * pg[k] + costs[k].b) * pg[k] + costs[k].c;
  return f;
}

std::vector<double> objective_gradient(const std::vector<double>& pg, const std::vector<CostCurve>& costs) {
  if (pg.size() != costs.size()) throw Error(ErrorCode::DimensionMismatch, "pg and cost curves differ in length");
  std::vector<double> g(pg.size());
  for (std::size_t k = 0; k < pg.size(); ++k) g[k] = 2.0 * costs[k].a * pg[k] + costs[k].b;
  return g;
}

std::vector<double> objective_hessian(const std::vector<CostCurve>& costs) {
  std::vector<double> h(costs.size());
  for (std::size_t k = 0; k < costs.size(); ++k) h[k] = 2.0 * costs[k].a;
  return h;
}

// ---------------------------------------------------------------------------
// AcOpfNlp

double AcOpfNlp::objective(const ipm::Vector& x) const {
  const auto& costs = p_.data().costs;
  double f = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    const double pg = x[static_cast<Eigen::Index>(p_.pg_offset() + k)];
    f += (costs[k].a * pg + costs[k].b) * pg + costs[k].c;
  }
  return p_.cost_scale() * f;
}

ipm::Vector AcOpfNlp::gradient(const ipm::Vector& x) const {
  ipm::Vector g = ipm::Vector::Zero(x.size());
  const auto& costs = p_.data().costs;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(p_.pg_offset() + k);
    g[i] = p_.cost_scale() * (2.0 * costs[k].a * x[i] + costs[k].b);
  }
  return g;
}

ipm::Vector AcOpfNlp::equalities(const ipm::Vector& x) const {
  const std::size_t n = p_.num_buses();
  ipm::Vector g = ipm::Vector::Zero(static_cast<Eigen::Index>(2 * n));
  p_.admittance().for_each([&](std::size_t m, std::size_t l, Complex yml) {
    const auto vars = global_vars(p_, m, l);
    const auto v = local_values(x, vars);
    g[static_cast<Eigen::Index>(m)] += pair_term(yml.real(), yml.imag(), v[0], v[1], v[2], v[3]).val;
    g[static_cast<Eigen::Index>(n + m)] += pair_term(-yml.imag(), yml.real(), v[0], v[1], v[2], v[3]).val;
  });
  for (std::size_t k = 0; k < p_.num_gens(); ++k) {
    const auto m = static_cast<Eigen::Index>(p_.gen_bus()[k]);
    g[m] -= x[static_cast<Eigen::Index>(p_.pg_offset() + k)];
    g[static_cast<Eigen::Index>(n) + m] -= x[static_cast<Eigen::Index>(p_.qg_offset() + k)];
  }
  for (std::size_t m = 0; m < n; ++m) {
    g[static_cast<Eigen::Index>(m)] += p_.data().buses[m].p_load;
    g[static_cast<Eigen::Index>(n + m)] += p_.data().buses[m].q_load;
  }
  return g;
}

ipm::SparseMatrix AcOpfNlp::equality_jacobian(const ipm::Vector& x) const {
  const std::size_t n = p_.num_buses();
  Triplets t;
  t.reserve(8 * p_.admittance().nonzeros() + 2 * p_.num_gens());
  p_.admittance().for_each([&](std::size_t m, std::size_t l, Complex yml) {
    const auto vars = global_vars(p_, m, l);
    const auto v = local_values(x, vars);
    const Local4 tp = pair_term(yml.real(), yml.imag(), v[0], v[1], v[2], v[3]);
    const Local4 tq = pair_term(-yml.imag(), yml.real(), v[0], v[1], v[2], v[3]);
    for (int i = 0; i < 4; ++i) {
      t.emplace_back(static_cast<int>(m), vars[i], tp.grad[i]);
      t.emplace_back(static_cast<int>(n + m), vars[i], tq.grad[i]);
    }
  });
  for (std::size_t k = 0; k < p_.num_gens(); ++k) {
    const auto m = static_cast<int>(p_.gen_bus()[k]);
    t.emplace_back(m, static_cast<int>(p_.pg_offset() + k), -1.0);
    t.emplace_back(static_cast<int>(n) + m, static_cast<int>(p_.qg_offset() + k), -1.0);
  }
  ipm::SparseMatrix jac(static_cast<Eigen::Index>(2 * n), x.size());
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

ipm::Vector AcOpfNlp::inequalities(const ipm::Vector& x) const {
  const auto& limited = p_.limited_branches();
  ipm::Vector h(static_cast<Eigen::Index>(2 * limited.size()));
  for (std::size_t k = 0; k < limited.size(); ++k) {
    const Branch& br = p_.data().branches[limited[k]];
    const auto v = local_values(x, branch_vars(p_, br));
    const FlowTerms ft = branch_flows(br, v[0], v[1], v[2], v[3]);
    h[static_cast<Eigen::Index>(2 * k)] = squared_flow(ft.pf, ft.qf, br.rate_a).val;
    h[static_cast<Eigen::Index>(2 * k + 1)] = squared_flow(ft.pt, ft.qt, br.rate_a).val;
  }
  return h;
}

ipm::SparseMatrix AcOpfNlp::inequality_jacobian(const ipm::Vector& x) const {
  const auto& limited = p_.limited_branches();
  Triplets t;
  for (std::size_t k = 0; k < limited.size(); ++k) {
    const Branch& br = p_.data().branches[limited[k]];
    const auto vars = branch_vars(p_, br);
    const auto v = local_values(x, vars);
    const FlowTerms ft = branch_flows(br, v[0], v[1], v[2], v[3]);
    const Local4 hf = squared_flow(ft.pf, ft.qf, br.rate_a);
    const Local4 ht = squared_flow(ft.pt, ft.qt, br.rate_a);
    for (int i = 0; i < 4; ++i) {
      t.emplace_back(static_cast<int>(2 * k), vars[i], hf.grad[i]);
      t.emplace_back(static_cast<int>(2 * k + 1), vars[i], ht.grad[i]);
    }
  }
  ipm::SparseMatrix jac(static_cast<Eigen::Index>(2 * limited.size()), x.size());
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

ipm::SparseMatrix AcOpfNlp::lagrangian_hessian(const ipm::Vector& x, const ipm::Vector& lam,
                                               const ipm::Vector& mu) const {
  const std::size_t n = p_.num_buses();
  Triplets t;
  t.reserve(32 * p_.admittance().nonzeros() + p_.num_gens());
  p_.admittance().for_each([&](std::size_t m, std::size_t l, Complex yml) {
    const auto vars = global_vars(p_, m, l);
    const auto v = local_values(x, vars);
    const double lp = lam[static_cast<Eigen::Index>(m)];
    const double lq = lam[static_cast<Eigen::Index>(n + m)];
    const Local4 tp = pair_term(yml.real(), yml.imag(), v[0], v[1], v[2], v[3]);
    const Local4 tq = pair_term(-yml.imag(), yml.real(), v[0], v[1], v[2], v[3]);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double val = lp * tp.hess[i][j] + lq * tq.hess[i][j];
        if (val != 0.0) t.emplace_back(vars[i], vars[j], val);
      }
    }
  });
  const auto& limited = p_.limited_branches();
  for (std::size_t k = 0; k < limited.size(); ++k) {
    const Branch& br = p_.data().branches[limited[k]];
    const auto vars = branch_vars(p_, br);
    const auto v = local_values(x, vars);
    const FlowTerms ft = branch_flows(br, v[0], v[1], v[2], v[3]);
    const Local4 hf = squared_flow(ft.pf, ft.qf, br.rate_a);
    const Local4 ht = squared_flow(ft.pt, ft.qt, br.rate_a);
    const double mf = mu[static_cast<Eigen::Index>(2 * k)];
    const double mt = mu[static_cast<Eigen::Index>(2 * k + 1)];
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) t.emplace_back(vars[i], vars[j], mf * hf.hess[i][j] + mt * ht.hess[i][j]);
    }
  }
  const auto& costs = p_.data().costs;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    const int i = static_cast<int>(p_.pg_offset() + k);
    t.emplace_back(i, i, p_.cost_scale() * 2.0 * costs[k].a);
  }
  ipm::SparseMatrix h(x.size(), x.size());
  h.setFromTriplets(t.begin(), t.end());
  return h;
}

// ---------------------------------------------------------------------------

ipm::Vector pack(const OpfProblem& problem, const StartPoint& start) {
  const std::size_t n = problem.num_buses();
  const std::size_t g = problem.num_gens();
  if (start.vm.size() != n || start.va.size() != n || start.pg.size() != g || start.qg.size() != g) {
    throw Error(ErrorCode::DimensionMismatch, "start point does not match the problem dimensions");
  }
  ipm::Vector x(static_cast<Eigen::Index>(problem.num_variables()));
  for (std::size_t m = 0; m < n; ++m) {
    x[static_cast<Eigen::Index>(problem.va_offset() + m)] = start.va[m];
    x[static_cast<Eigen::Index>(problem.vm_offset() + m)] = start.vm[m];
  }
  for (std::size_t k = 0; k < g; ++k) {
    x[static_cast<Eigen::Index>(problem.pg_offset() + k)] = start.pg[k];
    x[static_cast<Eigen::Index>(problem.qg_offset() + k)] = start.qg[k];
  }
  if (!x.allFinite()) throw Error(ErrorCode::DimensionMismatch, "start point has non-finite entries");
  return x;
}

namespace {

StartPoint unpack(const OpfProblem& problem, const ipm::Vector& x) {
  const std::size_t n = problem.num_buses();
  const std::size_t g = problem.num_gens();
  StartPoint p;
  p.label = StartLabel::Custom;
  p.va.resize(n);
  p.vm.resize(n);
  p.pg.resize(g);
  p.qg.resize(g);
  for (std::size_t m = 0; m < n; ++m) {
    p.va[m] = x[static_cast<Eigen::Index>(problem.va_offset() + m)];
    p.vm[m] = x[static_cast<Eigen::Index>(problem.vm_offset() + m)];
  }
  for (std::size_t k = 0; k < g; ++k) {
    p.pg[k] = x[static_cast<Eigen::Index>(problem.pg_offset() + k)];
    p.qg[k] = x[static_cast<Eigen::Index>(problem.qg_offset() + k)];
  }
  return p;
}

std::vector<double> to_std(const ipm::Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

OpfSolution solve_acopf(const OpfProblem& problem, const StartPoint& start, SolverProfile profile) {
  for (double v : start.vm) {
    if (!(v > 0.0)) throw Error(ErrorCode::DimensionMismatch, "start voltage magnitudes must be positive");
  }
  const ipm::Vector x0 = pack(problem, start);
  const AcOpfNlp nlp(problem);

  const auto t0 = std::chrono::steady_clock::now();
  ipm::Result r = ipm::solve(nlp, x0, solver_options(profile));
  const auto t1 = std::chrono::steady_clock::now();

  OpfSolution sol;
  sol.wall_time = std::chrono::duration<double>(t1 - t0).count();
  const StartPoint xs = unpack(problem, r.x);
  sol.state.vm = xs.vm;
  sol.state.va = xs.va;
  sol.pg = xs.pg;
  sol.qg = xs.qg;
  sol.objective = objective(sol.pg, problem.data().costs);
  sol.iterations = r.iterations;
  sol.trace = std::move(r.trace);
  sol.lam = to_std(r.lam);
  sol.mu_upper = to_std(r.mu_upper);
  sol.mu_lower = to_std(r.mu_lower);
  sol.mu_flow = to_std(r.mu);
  sol.message = std::move(r.message);
  switch (r.status) {
    case ipm::Status::Converged: sol.status = OpfStatus::Converged; break;
    case ipm::Status::MaxIterations: sol.status = OpfStatus::MaxIterations; break;
    case ipm::Status::NumericalFailure: sol.status = OpfStatus::NumericalFailure; break;
  }
  return sol;
}

// ---------------------------------------------------------------------------
// DC OPF: x = [va (N), pg (G)], equalities B' va + P_shift - (C pg - p_load - g_shunt) = 0.

namespace {

class DcOpfNlp final : public ipm::NlpProblem {
 public:
  DcOpfNlp(const CaseData& data, const BusIndex& idx, double cost_scale) : data_(data), scale_(cost_scale) {
    n_ = data.num_buses();
    g_ = data.num_gens();
    p_shift_.assign(n_, 0.0);
    Triplets bt;
    for (const Branch& br : data.branches) {
      if (!br.in_service) continue;
      if (br.x == 0.0) throw Error(ErrorCode::ZeroImpedanceBranch, "DC model needs nonzero series reactance");
      const double b = 1.0 / (br.x * br.tap);
      const auto f = static_cast<int>(idx.index_of(br.from));
      const auto t = static_cast<int>(idx.index_of(br.to));
      bt.emplace_back(f, f, b);
      bt.emplace_back(t, t, b);
      bt.emplace_back(f, t, -b);
      bt.emplace_back(t, f, -b);
      p_shift_[static_cast<std::size_t>(f)] += -b * br.shift;
      p_shift_[static_cast<std::size_t>(t)] -= -b * br.shift;
    }
    Triplets jt = bt;
    for (std::size_t k = 0; k < g_; ++k) {
      jt.emplace_back(static_cast<int>(idx.index_of(data.gens[k].bus)), static_cast<int>(n_ + k), -1.0);
    }
    jac_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_ + g_));
    jac_.setFromTriplets(jt.begin(), jt.end());
    demand_.assign(n_, 0.0);
    for (std::size_t m = 0; m < n_; ++m) demand_[m] = data.buses[m].p_load + data.buses[m].g_shunt;
    for (std::size_t m = 0; m < n_; ++m) {
      if (data.buses[m].kind == BusKind::Slack) slack_ = m;
    }
    Triplets ht;
    for (std::size_t k = 0; k < g_; ++k) {
      ht.emplace_back(static_cast<int>(n_ + k), static_cast<int>(n_ + k), scale_ * 2.0 * data.costs[k].a);
    }
    hess_.resize(static_cast<Eigen::Index>(n_ + g_), static_cast<Eigen::Index>(n_ + g_));
    hess_.setFromTriplets(ht.begin(), ht.end());
  }

  std::size_t num_variables() const override { return n_ + g_; }
  std::size_t num_equalities() const override { return n_; }
  ipm::Vector lower_bounds() const override {
    ipm::Vector lb = ipm::Vector::Constant(static_cast<Eigen::Index>(n_ + g_), -kInf);
    lb[static_cast<Eigen::Index>(slack_)] = 0.0;
    for (std::size_t k = 0; k < g_; ++k) lb[static_cast<Eigen::Index>(n_ + k)] = data_.gens[k].p_min;
    return lb;
  }
  ipm::Vector upper_bounds() const override {
    ipm::Vector ub = ipm::Vector::Constant(static_cast<Eigen::Index>(n_ + g_), kInf);
    ub[static_cast<Eigen::Index>(slack_)] = 0.0;
    for (std::size_t k = 0; k < g_; ++k) ub[static_cast<Eigen::Index>(n_ + k)] = data_.gens[k].p_max;
    return ub;
  }
  double objective(const ipm::Vector& x) const override {
    double f = 0.0;
    for (std::size_t k = 0; k < g_; ++k) {
      const double pg = x[static_cast<Eigen::Index>(n_ + k)];
      f += (data_.costs[k].a * pg + data_.costs[k].b) * pg + data_.costs[k].c;
    }
    return scale_ * f;
  }
  ipm::Vector gradient(const ipm::Vector& x) const override {
    ipm::Vector g = ipm::Vector::Zero(x.size());
    for (std::size_t k = 0; k < g_; ++k) {
      const auto i = static_cast<Eigen::Index>(n_ + k);
      g[i] = scale_ * (2.0 * data_.costs[k].a * x[i] + data_.costs[k].b);
    }
    return g;
  }
  ipm::Vector equalities(const ipm::Vector& x) const override {
    ipm::Vector g = jac_ * x;
    for (std::size_t m = 0; m < n_; ++m) g[static_cast<Eigen::Index>(m)] += p_shift_[m] + demand_[m];
    return g;
  }
  ipm::SparseMatrix equality_jacobian(const ipm::Vector&) const override { return jac_; }
  ipm::SparseMatrix lagrangian_hessian(const ipm::Vector&, const ipm::Vector&, const ipm::Vector&) const override {
    return hess_;
  }

  std::size_t n() const { return n_; }
  std::size_t g() const { return g_; }

 private:
  const CaseData& data_;
  double scale_;
  std::size_t n_ = 0, g_ = 0, slack_ = 0;
  std::vector<double> p_shift_, demand_;
  ipm::SparseMatrix jac_, hess_;
};

}  // namespace

DcSolution solve_dcopf(const CaseData& data) {
  const BusIndex idx = index_map(data);
  if (!is_connected(data, idx)) throw Error(ErrorCode::Disconnected, "network has more than one island");
  double demand = 0.0, pmax = 0.0, pmin = 0.0;
  for (const Bus& b : data.buses) demand += b.p_load + b.g_shunt;
  for (const Generator& g : data.gens) {
    pmax += g.p_max;
    pmin += g.p_min;
  }
  if (demand > pmax || demand < pmin) {
    throw Error(ErrorCode::Infeasible, "total demand " + format_double(demand) + " outside generation range [" +
                                           format_double(pmin) + ", " + format_double(pmax) + "]");
  }

  const DcOpfNlp nlp(data, idx, kDefaultCostScale);
  ipm::Vector x0 = ipm::Vector::Zero(static_cast<Eigen::Index>(nlp.num_variables()));
  for (std::size_t k = 0; k < nlp.g(); ++k) {
    x0[static_cast<Eigen::Index>(nlp.n() + k)] = box_midpoint(data.gens[k].p_min, data.gens[k].p_max);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ipm::Result r = ipm::solve(nlp, x0, solver_options(SolverProfile::Robust));
  const auto t1 = std::chrono::steady_clock::now();
  if (r.status != ipm::Status::Converged) {
    throw Error(ErrorCode::Infeasible, "DC OPF did not converge: " + std::string(ipm::to_string(r.status)));
  }
  DcSolution dc;
  dc.va.assign(r.x.data(), r.x.data() + nlp.n());
  dc.pg.assign(r.x.data() + nlp.n(), r.x.data() + nlp.n() + nlp.g());
  dc.objective = objective(dc.pg, data.costs);
  dc.iterations = r.iterations;
  dc.wall_time = std::chrono::duration<double>(t1 - t0).count();
  return dc;
}

// ---------------------------------------------------------------------------
// start points

namespace {

std::vector<double> reactive_midpoints(const OpfProblem& problem) {
  std::vector<double> qg;
  for (const Generator& g : problem.data().gens) qg.push_back(box_midpoint(g.q_min, g.q_max));
  return qg;
}

}  // namespace

StartPoint make_flat_start(const OpfProblem& problem) {
  StartPoint s;
  s.vm.assign(problem.num_buses(), 1.0);
  s.va.assign(problem.num_buses(), 0.0);
  s.pg.assign(problem.num_gens(), 0.0);
  s.qg.assign(problem.num_gens(), 0.0);
  s.label = StartLabel::Flat;
  return s;
}

StartPoint make_dc_start(const OpfProblem& problem, const DcSolution& dc) {
  if (dc.va.size() != problem.num_buses() || dc.pg.size() != problem.num_gens()) {
    throw Error(ErrorCode::SchemaMismatch, "DC solution does not match the problem dimensions");
  }
  StartPoint s;
  s.vm.assign(problem.num_buses(), 1.0);
  s.va = dc.va;
  s.pg = dc.pg;
  s.qg = reactive_midpoints(problem);
  s.label = StartLabel::DC;
  return s;
}

std::string_view to_string(LearnedAngles angles) { return angles == LearnedAngles::Zero ? "zero" : "case"; }

std::optional<LearnedAngles> parse_learned_angles(std::string_view text) {
  if (text == "zero") return LearnedAngles::Zero;
  if (text == "case") return LearnedAngles::CaseFile;
  return std::nullopt;
}

StartPoint make_learned_start(const OpfProblem& problem, const std::vector<double>& prediction, LearnedAngles angles) {
  const std::size_t n = problem.num_buses();
  const std::size_t g = problem.num_gens();
  if (prediction.size() != n + g) {
    throw Error(ErrorCode::SchemaMismatch, "prediction has " + std::to_string(prediction.size()) +
                                               " entries, expected " + std::to_string(n + g));
  }
  StartPoint s;
  s.vm.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    const Bus& b = problem.data().buses[m];
    s.vm[m] = std::clamp(prediction[m], b.v_min, b.v_max);
  }
  s.va.assign(n, 0.0);
  if (angles == LearnedAngles::CaseFile) {
    const double ref = problem.data().buses[problem.slack_index()].theta_init;
    for (std::size_t m = 0; m < n; ++m) s.va[m] = problem.data().buses[m].theta_init - ref;
  }
  s.pg.resize(g);
  for (std::size_t k = 0; k < g; ++k) {
    const Generator& gen = problem.data().gens[k];
    s.pg[k] = std::clamp(prediction[n + k], gen.p_min, gen.p_max);
  }
  s.qg = reactive_midpoints(problem);
  s.label = StartLabel::Learned;
  return s;
}

StartPoint dc_start_or_flat(const OpfProblem& problem, std::string* warning) {
  try {
    return make_dc_start(problem, solve_dcopf(problem.data()));
  } catch (const Error& e) {
    if (warning) *warning = std::string("DC start unavailable, using flat start: ") + e.what();
    return make_flat_start(problem);
  }
}

// ---------------------------------------------------------------------------
// violation / KKT re-evaluation

namespace {

double bound_excess(double v, double lo, double hi) { return std::max({0.0, lo - v, v - hi}); }

// Balance residuals (computed - (generation - load)) via power_injections.
std::vector<double> balance_residuals(const OpfProblem& problem, const VoltageState& st, const std::vector<double>& pg,
                                      const std::vector<double>& qg) {
  const std::size_t n = problem.num_buses();
  const InjectionVector inj = power_injections(st, problem.admittance());
  std::vector<double> r(2 * n);
  for (std::size_t m = 0; m < n; ++m) {
    r[m] = inj.p[m] + problem.data().buses[m].p_load;
    r[n + m] = inj.q[m] + problem.data().buses[m].q_load;
  }
  for (std::size_t k = 0; k < problem.num_gens(); ++k) {
    r[problem.gen_bus()[k]] -= pg[k];
    r[n + problem.gen_bus()[k]] -= qg[k];
  }
  return r;
}

// Squared apparent flows minus rating^2 from complex branch currents.
std::vector<double> flow_excess(const OpfProblem& problem, const VoltageState& st) {
  std::vector<double> h;
  for (std::size_t k : problem.limited_branches()) {
    const Branch& br = problem.data().branches[k];
    const auto f = problem.index().index_of(br.from);
    const auto t = problem.index().index_of(br.to);
    const Complex vf = std::polar(st.vm[f], st.va[f]);
    const Complex vt = std::polar(st.vm[t], st.va[t]);
    const BranchAdmittance ba = branch_admittance(br);
    const Complex sf = vf * std::conj(ba.yff * vf + ba.yft * vt);
    const Complex st_ = vt * std::conj(ba.ytf * vf + ba.ytt * vt);
    h.push_back(std::norm(sf) - br.rate_a * br.rate_a);
    h.push_back(std::norm(st_) - br.rate_a * br.rate_a);
  }
  return h;
}

}  // namespace

double max_constraint_violation(const OpfProblem& problem, const StartPoint& point) {
  (void)pack(problem, point);  // dimension check
  const VoltageState st{point.vm, point.va};
  double worst = 0.0;
  for (double r : balance_residuals(problem, st, point.pg, point.qg)) worst = std::max(worst, std::abs(r));
  for (std::size_t m = 0; m < problem.num_buses(); ++m) {
    const Bus& b = problem.data().buses[m];
    worst = std::max(worst, bound_excess(point.vm[m], b.v_min, b.v_max));
  }
  worst = std::max(worst, std::abs(point.va[problem.slack_index()]));
  for (std::size_t k = 0; k < problem.num_gens(); ++k) {
    const Generator& g = problem.data().gens[k];
    worst = std::max(worst, bound_excess(point.pg[k], g.p_min, g.p_max));
    worst = std::max(worst, bound_excess(point.qg[k], g.q_min, g.q_max));
  }
  for (double h : flow_excess(problem, st)) worst = std::max(worst, h);
  return worst;
}

double max_constraint_violation(const OpfProblem& problem, const OpfSolution& solution) {
  StartPoint p;
  p.vm = solution.state.vm;
  p.va = solution.state.va;
  p.pg = solution.pg;
  p.qg = solution.qg;
  return max_constraint_violation(problem, p);
}

KktReport kkt_certificate(const OpfProblem& problem, const OpfSolution& sol) {
  const std::size_t n = problem.num_buses();
  const std::size_t g = problem.num_gens();
  const std::size_t nx = problem.num_variables();
  if (sol.lam.size() != 2 * n || sol.mu_upper.size() != nx || sol.mu_lower.size() != nx) {
    throw Error(ErrorCode::DimensionMismatch, "solution carries no multipliers");
  }
  StartPoint pt;
  pt.vm = sol.state.vm;
  pt.va = sol.state.va;
  pt.pg = sol.pg;
  pt.qg = sol.qg;
  const ipm::Vector x = pack(problem, pt);
  const ipm::Vector lb = problem.lower_bounds();
  const ipm::Vector ub = problem.upper_bounds();

  const std::vector<double> gres = balance_residuals(problem, sol.state, sol.pg, sol.qg);
  const std::vector<double> hflow = flow_excess(problem, sol.state);

  // stationarity: scaled cost gradient + J_g' lam + bound terms + flow terms
  std::vector<double> lx(nx, 0.0);
  const std::vector<double> dcost = objective_gradient(sol.pg, problem.data().costs);
  for (std::size_t k = 0; k < g; ++k) lx[problem.pg_offset() + k] += problem.cost_scale() * dcost[k];
  const Eigen::SparseMatrix<double> jac = pf_jacobian(sol.state, problem.admittance());
  for (int c = 0; c < jac.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator e(jac, c); e; ++e) {
      // pf_jacobian columns are [va, vm], matching the OPF layout
      lx[static_cast<std::size_t>(e.col())] += e.value() * sol.lam[static_cast<std::size_t>(e.row())];
    }
  }
  for (std::size_t k = 0; k < g; ++k) {
    lx[problem.pg_offset() + k] -= sol.lam[problem.gen_bus()[k]];
    lx[problem.qg_offset() + k] -= sol.lam[n + problem.gen_bus()[k]];
  }
  for (std::size_t i = 0; i < nx; ++i) lx[i] += sol.mu_upper[i] - sol.mu_lower[i];
  if (!hflow.empty()) {
    // flow constraint gradients by central differences
    auto flows_at = [&](const ipm::Vector& xv) {
      VoltageState s;
      s.va.assign(xv.data(), xv.data() + n);
      s.vm.assign(xv.data() + n, xv.data() + 2 * n);
      return flow_excess(problem, s);
    };
    for (std::size_t i = 0; i < 2 * n; ++i) {
      ipm::Vector xp = x, xm = x;
      const double h = 1e-6;
      xp[static_cast<Eigen::Index>(i)] += h;
      xm[static_cast<Eigen::Index>(i)] -= h;
      const auto fp = flows_at(xp);
      const auto fm = flows_at(xm);
      for (std::size_t r = 0; r < fp.size(); ++r) lx[i] += sol.mu_flow[r] * (fp[r] - fm[r]) / (2 * h);
    }
  }

  // every free variable participates; the fixed reference angle does not
  double lx_norm = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    if (lb[static_cast<Eigen::Index>(i)] < ub[static_cast<Eigen::Index>(i)]) lx_norm = std::max(lx_norm, std::abs(lx[i]));
  }

  // inequality values h <= 0 and slacks z = max(-h, 0)
  std::vector<double> h_all, mu_all;
  for (std::size_t i = 0; i < nx; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!(lb[ii] < ub[ii])) continue;
    if (std::isfinite(ub[ii])) {
      h_all.push_back(x[ii] - ub[ii]);
      mu_all.push_back(sol.mu_upper[i]);
    }
    if (std::isfinite(lb[ii])) {
      h_all.push_back(lb[ii] - x[ii]);
      mu_all.push_back(sol.mu_lower[i]);
    }
  }
  for (std::size_t r = 0; r < hflow.size(); ++r) {
    h_all.push_back(hflow[r]);
    mu_all.push_back(sol.mu_flow[r]);
  }

  double g_norm = 0.0, h_max = -kInf, z_norm = 0.0, comp = 0.0, lam_norm = 0.0, mu_norm = 0.0;
  for (double r : gres) g_norm = std::max(g_norm, std::abs(r));
  for (double l : sol.lam) lam_norm = std::max(lam_norm, std::abs(l));
  for (std::size_t k = 0; k < h_all.size(); ++k) {
    h_max = std::max(h_max, h_all[k]);
    const double z = std::max(-h_all[k], 0.0);
    z_norm = std::max(z_norm, z);
    comp += z * mu_all[k];
    mu_norm = std::max(mu_norm, std::abs(mu_all[k]));
  }
  const double x_norm = x.cwiseAbs().maxCoeff();
  KktReport rep;
  rep.feasibility = std::max(g_norm, h_all.empty() ? 0.0 : h_max) / (1.0 + std::max(x_norm, z_norm));
  rep.stationarity = lx_norm / (1.0 + std::max(lam_norm, mu_norm));
  rep.complementarity = comp / (1.0 + x_norm);
  rep.max_violation = max_constraint_violation(problem, sol);
  return rep;
}

// ---------------------------------------------------------------------------

nlohmann::json solution_to_json(const OpfProblem& problem, const OpfSolution& s) {
  nlohmann::json j;
  j["case"] = problem.data().name;
  j["status"] = to_string(s.status);
  j["objective"] = s.objective;
  j["iterations"] = s.iterations;
  j["wall_time"] = s.wall_time;
  j["vm"] = s.state.vm;
  j["va"] = s.state.va;
  j["pg"] = s.pg;
  j["qg"] = s.qg;
  j["trace"] = nlohmann::json::array();
  for (const auto& r : s.trace) {
    j["trace"].push_back({{"iteration", r.iteration},
                          {"mu", r.barrier},
                          {"feas", r.feasibility},
                          {"grad", r.gradient},
                          {"comp", r.complementarity},
                          {"max_violation", r.max_violation}});
  }
  return j;
}

std::string trace_to_csv(const OpfSolution& s) {
  std::ostringstream out;
  out << "iteration,mu,feas,grad,comp,max_violation\n";
  for (const auto& r : s.trace) {
    out << r.iteration << "," << format_double(r.barrier) << "," << format_double(r.feasibility) << ","
        << format_double(r.gradient) << "," << format_double(r.complementarity) << ","
        << format_double(r.max_violation) << "\n";
  }
  return out.str();
}

}  // namespace warmopf
