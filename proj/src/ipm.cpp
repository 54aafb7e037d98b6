#include "warmopf/ipm.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace warmopf::ipm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

using Triplets = std::vector<Eigen::Triplet<double>>;

// Appends the entries of `m` with columns remapped through `col_map`
// (entries on dropped columns are skipped) and rows shifted by `row_offset`.
void append_remapped(Triplets& out, const SparseMatrix& m, const std::vector<int>& col_map, int row_offset,
                     const std::vector<int>* row_map = nullptr, int col_offset = 0) {
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      const int c = col_map[static_cast<std::size_t>(it.col())];
      if (c < 0) continue;
      int r = static_cast<int>(it.row());
      if (row_map) {
        r = (*row_map)[static_cast<std::size_t>(r)];
        if (r < 0) continue;
      }
      out.emplace_back(r + row_offset, c + col_offset, it.value());
    }
  }
}

// Problem functions at one point, with bounds folded into the inequalities.
struct Evaluation {
  double f = 0.0;
  Vector df;  // full length
  Vector g;
  SparseMatrix dg;  // neq x nf
  Vector h;         // [h_nl; x_ub - ub; lb - x_lb]
  SparseMatrix dh;  // niq x nf
  SparseMatrix dh_nl_full;  // nonlinear part, full columns (for Lx)

  bool finite() const {
    return std::isfinite(f) && df.allFinite() && g.allFinite() && h.allFinite();
  }
};

class Workspace {
 public:
  Workspace(const NlpProblem& p, const Vector& lb, const Vector& ub) : p_(p), lb_(lb), ub_(ub) {
    nx_ = p.num_variables();
    col_map_.assign(nx_, -1);
    for (std::size_t i = 0; i < nx_; ++i) {
      if (lb_[static_cast<Eigen::Index>(i)] < ub_[static_cast<Eigen::Index>(i)]) {
        col_map_[i] = static_cast<int>(free_.size());
        free_.push_back(i);
      }
    }
    for (std::size_t i : free_) {
      if (std::isfinite(ub_[static_cast<Eigen::Index>(i)])) upper_.push_back(i);
    }
    for (std::size_t i : free_) {
      if (std::isfinite(lb_[static_cast<Eigen::Index>(i)])) lower_.push_back(i);
    }
    n_nl_ = p.num_inequalities();
  }

  std::size_t nx() const { return nx_; }
  std::size_t nf() const { return free_.size(); }
  std::size_t niq() const { return n_nl_ + upper_.size() + lower_.size(); }
  std::size_t n_nl() const { return n_nl_; }
  const std::vector<int>& col_map() const { return col_map_; }
  const std::vector<std::size_t>& free_vars() const { return free_; }
  const std::vector<std::size_t>& upper() const { return upper_; }
  const std::vector<std::size_t>& lower() const { return lower_; }

  Evaluation evaluate(const Vector& x) const {
    Evaluation e;
    e.f = p_.objective(x);
    e.df = p_.gradient(x);
    e.g = p_.equalities(x);
    {
      Triplets t;
      append_remapped(t, p_.equality_jacobian(x), col_map_, 0);
      e.dg.resize(static_cast<Eigen::Index>(p_.num_equalities()), static_cast<Eigen::Index>(nf()));
      e.dg.setFromTriplets(t.begin(), t.end());
    }
    const Vector hn = n_nl_ ? p_.inequalities(x) : Vector();
    e.h.resize(static_cast<Eigen::Index>(niq()));
    Triplets t;
    if (n_nl_) {
      e.dh_nl_full = p_.inequality_jacobian(x);
      e.h.head(static_cast<Eigen::Index>(n_nl_)) = hn;
      append_remapped(t, e.dh_nl_full, col_map_, 0);
    }
    auto row = static_cast<Eigen::Index>(n_nl_);
    for (std::size_t i : upper_) {
      const auto ii = static_cast<Eigen::Index>(i);
      e.h[row] = x[ii] - ub_[ii];
      t.emplace_back(static_cast<int>(row), col_map_[i], 1.0);
      ++row;
    }
    for (std::size_t i : lower_) {
      const auto ii = static_cast<Eigen::Index>(i);
      e.h[row] = lb_[ii] - x[ii];
      t.emplace_back(static_cast<int>(row), col_map_[i], -1.0);
      ++row;
    }
    e.dh.resize(static_cast<Eigen::Index>(niq()), static_cast<Eigen::Index>(nf()));
    e.dh.setFromTriplets(t.begin(), t.end());
    return e;
  }

  // Gradient of the Lagrangian restricted to free variables.
  Vector lagrangian_gradient(const Evaluation& e, const Vector& lam, const Vector& mu) const {
    Vector lx(static_cast<Eigen::Index>(nf()));
    for (std::size_t k = 0; k < free_.size(); ++k) lx[static_cast<Eigen::Index>(k)] = e.df[static_cast<Eigen::Index>(free_[k])];
    if (e.dg.rows()) lx += e.dg.transpose() * lam;
    if (e.dh.rows()) lx += e.dh.transpose() * mu;
    return lx;
  }

  SparseMatrix reduced_hessian(const Vector& x, const Vector& lam, const Vector& mu_nl) const {
    const SparseMatrix full = p_.lagrangian_hessian(x, lam, mu_nl);
    Triplets t;
    t.reserve(static_cast<std::size_t>(full.nonZeros()));
    append_remapped(t, full, col_map_, 0, &col_map_);
    SparseMatrix h(static_cast<Eigen::Index>(nf()), static_cast<Eigen::Index>(nf()));
    h.setFromTriplets(t.begin(), t.end());
    return h;
  }

 private:
  const NlpProblem& p_;
  const Vector& lb_;
  const Vector& ub_;
  std::size_t nx_ = 0;
  std::size_t n_nl_ = 0;
  std::vector<int> col_map_;
  std::vector<std::size_t> free_, upper_, lower_;
};

struct Conditions {
  double feas = 0.0, grad = 0.0, comp = 0.0, max_violation = 0.0;
};

Conditions conditions(const Evaluation& e, const Vector& x, const Vector& z, const Vector& lam, const Vector& mu,
                      const Vector& lx) {
  Conditions c;
  const double g_norm = inf_norm(e.g);
  const double h_max = e.h.size() ? e.h.maxCoeff() : 0.0;
  c.max_violation = std::max(g_norm, std::max(h_max, 0.0));
  c.feas = std::max(g_norm, h_max) / (1.0 + std::max(inf_norm(x), inf_norm(z)));
  c.grad = inf_norm(lx) / (1.0 + std::max(inf_norm(lam), inf_norm(mu)));
  c.comp = (z.size() ? z.dot(mu) : 0.0) / (1.0 + inf_norm(x));
  return c;
}

}  // namespace

Vector NlpProblem::lower_bounds() const { return Vector::Constant(static_cast<Eigen::Index>(num_variables()), -kInf); }
Vector NlpProblem::upper_bounds() const { return Vector::Constant(static_cast<Eigen::Index>(num_variables()), kInf); }
Vector NlpProblem::inequalities(const Vector&) const { return Vector(); }
SparseMatrix NlpProblem::inequality_jacobian(const Vector&) const {
  return SparseMatrix(0, static_cast<Eigen::Index>(num_variables()));
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::Converged: return "Converged";
    case Status::MaxIterations: return "MaxIterations";
    case Status::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

double IterationRecord::gap() const { return std::max({feasibility, gradient, complementarity}); }

Result solve(const NlpProblem& problem, const Vector& x0, const Options& opt) {
  const Vector lb = problem.lower_bounds();
  const Vector ub = problem.upper_bounds();
  const auto nx = static_cast<Eigen::Index>(problem.num_variables());
  Result res;
  if (x0.size() != nx || lb.size() != nx || ub.size() != nx) {
    res.status = Status::NumericalFailure;
    res.message = "dimension mismatch between start point and problem";
    return res;
  }

  Workspace ws(problem, lb, ub);
  const auto nf = static_cast<Eigen::Index>(ws.nf());
  const auto neq = static_cast<Eigen::Index>(problem.num_equalities());
  const auto niq = static_cast<Eigen::Index>(ws.niq());
  const auto n_nl = static_cast<Eigen::Index>(ws.n_nl());

  Vector x = x0;
  for (Eigen::Index i = 0; i < nx; ++i) x[i] = std::clamp(x[i], lb[i], std::max(lb[i], ub[i]));
  for (Eigen::Index i = 0; i < nx; ++i) {
    if (!(lb[i] < ub[i])) x[i] = lb[i];
  }

  Evaluation ev = ws.evaluate(x);
  if (!ev.finite()) {
    res.status = Status::NumericalFailure;
    res.message = "problem functions not finite at the start point";
    res.x = x;
    return res;
  }

  double gamma = 1.0;
  Vector lam = Vector::Zero(neq);
  Vector z(niq), mu(niq);
  for (Eigen::Index k = 0; k < niq; ++k) {
    z[k] = std::max(-ev.h[k], opt.slack_floor);
    mu[k] = std::max(1.0, gamma / z[k]);
  }

  Vector lx = ws.lagrangian_gradient(ev, lam, mu);
  auto record = [&](int it, double reg) {
    const Conditions c = conditions(ev, x, z, lam, mu, lx);
    IterationRecord r;
    r.iteration = it;
    r.barrier = gamma;
    r.feasibility = c.feas;
    r.gradient = c.grad;
    r.complementarity = c.comp;
    r.max_violation = c.max_violation;
    r.objective = ev.f;
    r.regularization = reg;
    res.trace.push_back(r);
    return r;
  };

  auto converged = [&](const IterationRecord& r) {
    return r.feasibility < opt.tolerance && r.gradient < opt.tolerance && r.complementarity < opt.tolerance &&
           r.max_violation < opt.tolerance;
  };

  IterationRecord last = record(0, 0.0);
  res.status = Status::MaxIterations;
  if (converged(last)) {
    res.status = Status::Converged;
  } else {
    Eigen::SparseLU<SparseMatrix> lu;
    for (int it = 1; it <= opt.max_iterations; ++it) {
      // Newton step on the perturbed KKT conditions
      const Vector zinv = z.cwiseInverse();
      const SparseMatrix hess = ws.reduced_hessian(x, lam, mu.head(n_nl));
      const Vector d = mu.cwiseProduct(zinv);
      const SparseMatrix m = hess + SparseMatrix(ev.dh.transpose() * d.asDiagonal() * ev.dh);
      const Vector n_vec = lx + ev.dh.transpose() * zinv.cwiseProduct(mu.cwiseProduct(ev.h) + Vector::Constant(niq, gamma));

      Vector rhs(nf + neq);
      rhs.head(nf) = -n_vec;
      rhs.tail(neq) = -ev.g;

      Triplets base;
      base.reserve(static_cast<std::size_t>(m.nonZeros() + 2 * ev.dg.nonZeros() + nf + neq));
      for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator e(m, k); e; ++e) base.emplace_back(e.row(), e.col(), e.value());
      }
      for (int k = 0; k < ev.dg.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator e(ev.dg, k); e; ++e) {
          base.emplace_back(nf + e.row(), e.col(), e.value());
          base.emplace_back(e.col(), nf + e.row(), e.value());
        }
      }

      Vector sol;
      double reg = 0.0;
      bool solved = false;
      while (true) {
        Triplets t = base;
        for (Eigen::Index k = 0; k < nf; ++k) t.emplace_back(k, k, reg);
        for (Eigen::Index k = 0; k < neq; ++k) t.emplace_back(nf + k, nf + k, -reg);
        SparseMatrix kkt(nf + neq, nf + neq);
        kkt.setFromTriplets(t.begin(), t.end());
        lu.compute(kkt);
        if (lu.info() == Eigen::Success) {
          sol = lu.solve(rhs);
          if (lu.info() == Eigen::Success && sol.allFinite()) {
            const double resid = inf_norm(kkt * sol - rhs);
            if (resid <= 1e-6 * (1.0 + inf_norm(rhs))) {
              solved = true;
              break;
            }
          }
        }
        if (!opt.regularize) break;
        reg = reg == 0.0 ? opt.regularization_start : reg * 10.0;
        if (reg > opt.regularization_max * (1.0 + 1e-12)) break;
      }
      if (!solved) {
        res.status = Status::NumericalFailure;
        res.message = "KKT system singular at iteration " + std::to_string(it);
        break;
      }

      const Vector dx = sol.head(nf);
      const Vector dlam = sol.tail(neq);
      const Vector dz = -ev.h - z - ev.dh * dx;
      const Vector dmu = -mu + zinv.cwiseProduct(Vector::Constant(niq, gamma) - mu.cwiseProduct(dz));

      double alpha_p = 1.0, alpha_d = 1.0;
      for (Eigen::Index k = 0; k < niq; ++k) {
        if (dz[k] < 0.0) alpha_p = std::min(alpha_p, opt.step_to_boundary * z[k] / -dz[k]);
        if (dmu[k] < 0.0) alpha_d = std::min(alpha_d, opt.step_to_boundary * mu[k] / -dmu[k]);
      }

      Vector x_trial;
      Evaluation ev_trial;
      bool ok = false;
      for (int halving = 0; halving <= (opt.step_fallback ? 20 : 0); ++halving) {
        x_trial = x;
        for (Eigen::Index k = 0; k < nf; ++k) {
          x_trial[static_cast<Eigen::Index>(ws.free_vars()[static_cast<std::size_t>(k)])] += alpha_p * dx[k];
        }
        if (x_trial.allFinite()) {
          ev_trial = ws.evaluate(x_trial);
          if (ev_trial.finite()) {
            ok = true;
            break;
          }
        }
        alpha_p *= 0.5;
        alpha_d *= 0.5;
      }
      if (!ok) {
        res.status = Status::NumericalFailure;
        res.message = "problem functions not finite along the step at iteration " + std::to_string(it);
        break;
      }

      x = std::move(x_trial);
      ev = std::move(ev_trial);
      z += alpha_p * dz;
      lam += alpha_d * dlam;
      mu += alpha_d * dmu;
      if (niq > 0) gamma = opt.centering * z.dot(mu) / static_cast<double>(niq);

      lx = ws.lagrangian_gradient(ev, lam, mu);
      last = record(it, reg);
      if (!lx.allFinite() || inf_norm(x) > 1e10) {
        res.status = Status::NumericalFailure;
        res.message = "iterates diverged at iteration " + std::to_string(it);
        break;
      }
      if (converged(last)) {
        res.status = Status::Converged;
        break;
      }
    }
  }

  res.iterations = res.trace.back().iteration;
  res.x = x;
  res.lam = lam;
  res.objective = ev.f;
  res.mu = mu.head(n_nl);
  res.mu_upper = Vector::Zero(nx);
  res.mu_lower = Vector::Zero(nx);
  Eigen::Index row = n_nl;
  for (std::size_t i : ws.upper()) res.mu_upper[static_cast<Eigen::Index>(i)] = mu[row++];
  for (std::size_t i : ws.lower()) res.mu_lower[static_cast<Eigen::Index>(i)] = mu[row++];
  return res;
}

}  // namespace warmopf::ipm
