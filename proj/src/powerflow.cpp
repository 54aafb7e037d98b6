#include "warmopf/powerflow.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <queue>

#include "warmopf/error.hpp"

namespace warmopf {

namespace {

void check_dims(const VoltageState& state, const AdmittanceMatrix& y) {
  if (state.vm.size() != y.size() || state.va.size() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "voltage state has " + std::to_string(state.vm.size()) + "/" +
                                                  std::to_string(state.va.size()) + " entries for " +
                                                  std::to_string(y.size()) + " buses");
  }
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

InjectionVector power_injections(const VoltageState& state, const AdmittanceMatrix& y) {
  check_dims(state, y);
  const std::size_t n = y.size();
  InjectionVector out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  y.for_each([&](std::size_t m, std::size_t l, Complex yml) {
    const double theta = state.va[m] - state.va[l];
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double g = yml.real();
    const double b = yml.imag();
    out.p[m] += state.vm[l] * (g * c + b * s);
    out.q[m] += state.vm[l] * (g * s - b * c);
  });
  for (std::size_t m = 0; m < n; ++m) {
    out.p[m] *= state.vm[m];
    out.q[m] *= state.vm[m];
  }
  return out;
}

Eigen::SparseMatrix<double> pf_jacobian(const VoltageState& state, const AdmittanceMatrix& y) {
  check_dims(state, y);
  const std::size_t n = y.size();
  std::vector<Complex> v(n), vnorm(n), ibus(n, Complex{});
  for (std::size_t m = 0; m < n; ++m) {
    vnorm[m] = std::polar(1.0, state.va[m]);
    v[m] = state.vm[m] * vnorm[m];
  }
  y.for_each([&](std::size_t m, std::size_t l, Complex yml) { ibus[m] += yml * v[l]; });

  // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
  // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(4 * (y.nonzeros() + n));
  const auto N = static_cast<int>(n);
  auto push = [&](std::size_t m, std::size_t l, Complex d_va, Complex d_vm) {
    const int r = static_cast<int>(m);
    const int c = static_cast<int>(l);
    trips.emplace_back(r, c, d_va.real());
    trips.emplace_back(r + N, c, d_va.imag());
    trips.emplace_back(r, c + N, d_vm.real());
    trips.emplace_back(r + N, c + N, d_vm.imag());
  };
  const Complex j(0.0, 1.0);
  y.for_each([&](std::size_t m, std::size_t l, Complex yml) {
    push(m, l, -j * v[m] * std::conj(yml * v[l]), v[m] * std::conj(yml * vnorm[l]));
  });
  for (std::size_t m = 0; m < n; ++m) {
    push(m, m, j * v[m] * std::conj(ibus[m]), std::conj(ibus[m]) * vnorm[m]);
  }
  Eigen::SparseMatrix<double> jac(2 * N, 2 * N);
  jac.setFromTriplets(trips.begin(), trips.end());
  return jac;
}

bool is_connected(const CaseData& data, const BusIndex& idx) {
  const std::size_t n = idx.size();
  if (n == 0) return true;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Branch& br : data.branches) {
    if (!br.in_service) continue;
    const auto f = idx.index_of(br.from);
    const auto t = idx.index_of(br.to);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!frontier.empty()) {
    const auto m = frontier.front();
    frontier.pop();
    for (auto l : adj[m]) {
      if (!seen[l]) {
        seen[l] = true;
        ++count;
        frontier.push(l);
      }
    }
  }
  return count == n;
}

PowerFlowSetpoints default_setpoints(const CaseData& data, const BusIndex& idx) {
  PowerFlowSetpoints sp{std::vector<double>(idx.size(), 0.0), std::vector<double>(idx.size(), 0.0)};
  for (const Generator& g : data.gens) {
    const auto m = idx.index_of(g.bus);
    sp.p[m] += g.p_init;
    sp.q[m] += g.q_init;
  }
  for (const Bus& b : data.buses) {
    const auto m = idx.index_of(b.id);
    sp.p[m] -= b.p_load;
    sp.q[m] -= b.q_load;
  }
  return sp;
}

PowerFlowResult solve_powerflow(const CaseData& data, const AdmittanceMatrix& y, const VoltageState& start,
                                const PowerFlowSetpoints& setpoints, const PowerFlowOptions& options) {
  check_dims(start, y);
  const std::size_t n = y.size();
  if (setpoints.p.size() != n || setpoints.q.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "setpoints do not match bus count");
  }
  const BusIndex idx = index_map(data);
  if (idx.size() != n) throw Error(ErrorCode::DimensionMismatch, "case and admittance sizes differ");
  if (!is_connected(data, idx)) throw Error(ErrorCode::Disconnected, "network has more than one island");

  // unknown layout: va at non-slack buses, then vm at PQ buses
  std::vector<int> va_col(n, -1), vm_col(n, -1);
  int cols = 0;
  for (std::size_t m = 0; m < n; ++m) {
    if (data.buses[m].kind != BusKind::Slack) va_col[m] = cols++;
  }
  for (std::size_t m = 0; m < n; ++m) {
    if (data.buses[m].kind == BusKind::PQ) vm_col[m] = cols++;
  }

  PowerFlowResult result;
  result.state = start;
  VoltageState& st = result.state;

  auto mismatch = [&]() {
    const InjectionVector inj = power_injections(st, y);
    Eigen::VectorXd f(cols);
    for (std::size_t m = 0; m < n; ++m) {
      if (va_col[m] >= 0) f[va_col[m]] = inj.p[m] - setpoints.p[m];
      if (vm_col[m] >= 0) f[vm_col[m]] = inj.q[m] - setpoints.q[m];
    }
    return f;
  };

  Eigen::VectorXd f = mismatch();
  double norm = inf_norm(f);
  result.mismatch_history.push_back(norm);

  for (int it = 0;; ++it) {
    if (!std::isfinite(norm) || norm > 1e10) {
      result.status = PfStatus::Diverged;
      result.iterations = it;
      return result;
    }
    if (norm < options.tolerance) {
      result.status = PfStatus::Converged;
      result.iterations = it;
      return result;
    }
    if (it == options.max_iterations) {
      result.status = PfStatus::MaxIterations;
      result.iterations = it;
      return result;
    }

    // restrict the full Jacobian to the unknown rows/columns
    const Eigen::SparseMatrix<double> full = pf_jacobian(st, y);
    std::vector<int> row_map(2 * n, -1), col_map(2 * n, -1);
    for (std::size_t m = 0; m < n; ++m) {
      row_map[m] = va_col[m];       // p rows pair with va unknowns
      row_map[m + n] = vm_col[m];   // q rows pair with vm unknowns
      col_map[m] = va_col[m];
      col_map[m + n] = vm_col[m];
    }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(full.nonZeros()));
    for (int k = 0; k < full.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator e(full, k); e; ++e) {
        const int r = row_map[static_cast<std::size_t>(e.row())];
        const int c = col_map[static_cast<std::size_t>(e.col())];
        if (r >= 0 && c >= 0) trips.emplace_back(r, c, e.value());
      }
    }
    Eigen::SparseMatrix<double> jac(cols, cols);
    jac.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularJacobian, "power flow Jacobian factorization failed at iteration " +
                                                   std::to_string(it));
    }
    const Eigen::VectorXd dx = lu.solve(-f);
    if (!dx.allFinite()) {
      throw Error(ErrorCode::SingularJacobian, "power flow Newton step is not finite");
    }
    for (std::size_t m = 0; m < n; ++m) {
      if (va_col[m] >= 0) st.va[m] += dx[va_col[m]];
      if (vm_col[m] >= 0) st.vm[m] += dx[vm_col[m]];
    }
    if (std::any_of(st.vm.begin(), st.vm.end(), [](double v) { return !(v > 0.0); })) {
      result.status = PfStatus::Diverged;
      result.iterations = it + 1;
      return result;
    }
    f = mismatch();
    norm = inf_norm(f);
    result.mismatch_history.push_back(norm);
  }
}

std::pair<double, double> mismatch_norms(const CaseData& data, const AdmittanceMatrix& y, const VoltageState& state,
                                         const std::vector<double>& pg, const std::vector<double>& qg) {
  check_dims(state, y);
  if (pg.size() != data.gens.size() || qg.size() != data.gens.size()) {
    throw Error(ErrorCode::DimensionMismatch, "generator dispatch length does not match generator count");
  }
  const BusIndex idx = index_map(data);
  const InjectionVector inj = power_injections(state, y);
  std::vector<double> p = inj.p;
  std::vector<double> q = inj.q;
  for (std::size_t k = 0; k < data.gens.size(); ++k) {
    const auto m = idx.index_of(data.gens[k].bus);
    p[m] -= pg[k];
    q[m] -= qg[k];
  }
  for (const Bus& b : data.buses) {
    const auto m = idx.index_of(b.id);
    p[m] += b.p_load;
    q[m] += b.q_load;
  }
  double mp = 0.0, mq = 0.0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    mp = std::max(mp, std::abs(p[m]));
    mq = std::max(mq, std::abs(q[m]));
  }
  return {mp, mq};
}

}  // namespace warmopf
