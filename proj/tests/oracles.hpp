#pragma once

// Reference computations that share no code with the library: dense complex
// arithmetic straight from circuit equations.

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "warmopf/casefile.hpp"
#include "warmopf/powerflow.hpp"

namespace oracles {

using C = std::complex<double>;
using Dense = std::vector<std::vector<C>>;

// Column k of Y is the vector of bus currents when V = e_k. Each branch is an
// ideal transformer (ratio tau e^{j shift}) on the from side followed by a
// series impedance and two half-charging shunts.
inline Dense dense_ybus(const warmopf::CaseData& c) {
  const std::size_t n = c.buses.size();
  auto pos = [&](int id) {
    for (std::size_t i = 0; i < n; ++i) {
      if (c.buses[i].id == id) return i;
    }
    return n;
  };
  Dense y(n, std::vector<C>(n));
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<C> v(n);
    v[k] = 1.0;
    std::vector<C> i_bus(n);
    for (const auto& br : c.branches) {
      if (!br.in_service) continue;
      const std::size_t f = pos(br.from), t = pos(br.to);
      const C a = std::polar(br.tap, br.shift);
      const C vf_inner = v[f] / a;
      const C i_series = (vf_inner - v[t]) / C(br.r, br.x);
      const C i_f_inner = i_series + C(0, br.b_ch / 2) * vf_inner;
      i_bus[f] += i_f_inner / std::conj(a);  // power conserved across the ideal transformer
      i_bus[t] += -i_series + C(0, br.b_ch / 2) * v[t];
    }
    for (std::size_t m = 0; m < n; ++m) i_bus[m] += C(c.buses[m].g_shunt, c.buses[m].b_shunt) * v[m];
    for (std::size_t m = 0; m < n; ++m) y[m][k] = i_bus[m];
  }
  return y;
}

// S = V .* conj(Y V)
inline std::vector<C> complex_power(const Dense& y, const std::vector<double>& vm, const std::vector<double>& va) {
  const std::size_t n = vm.size();
  std::vector<C> v(n), s(n);
  for (std::size_t m = 0; m < n; ++m) v[m] = std::polar(vm[m], va[m]);
  for (std::size_t m = 0; m < n; ++m) {
    C i = 0;
    for (std::size_t l = 0; l < n; ++l) i += y[m][l] * v[l];
    s[m] = v[m] * std::conj(i);
  }
  return s;
}

// Central differences of f: R^n -> R^m, returned as m x n dense.
inline std::vector<std::vector<double>> fd_jacobian(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                                                    std::vector<double> x, double h = 1e-6) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> jac;
  for (std::size_t j = 0; j < n; ++j) {
    const double x0 = x[j];
    x[j] = x0 + h;
    const auto fp = f(x);
    x[j] = x0 - h;
    const auto fm = f(x);
    x[j] = x0;
    if (jac.empty()) jac.assign(fp.size(), std::vector<double>(n));
    for (std::size_t i = 0; i < fp.size(); ++i) jac[i][j] = (fp[i] - fm[i]) / (2 * h);
  }
  return jac;
}

// Same, for a function evaluated in extended precision.
inline std::vector<std::vector<double>> fd_jacobian_ld(
    const std::function<std::vector<long double>(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-6) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> jac;
  for (std::size_t j = 0; j < n; ++j) {
    const double x0 = x[j];
    x[j] = x0 + h;
    const auto fp = f(x);
    x[j] = x0 - h;
    const auto fm = f(x);
    x[j] = x0;
    if (jac.empty()) jac.assign(fp.size(), std::vector<double>(n));
    const long double step = static_cast<long double>(x0 + h) - static_cast<long double>(x0 - h);
    for (std::size_t i = 0; i < fp.size(); ++i) jac[i][j] = static_cast<double>((fp[i] - fm[i]) / step);
  }
  return jac;
}

// Root of g on [lo, hi] by bisection; g(lo) and g(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& g, double lo, double hi) {
  double glo = g(lo);
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Max relative error between the analytic Jacobian and central differences
// of power_injections, over entries above 1e-8 in magnitude.
inline double jacobian_fd_error(const warmopf::AdmittanceMatrix& y, const warmopf::VoltageState& s) {
  const std::size_t n = s.size();
  // extended precision keeps the cancellation error of the differences well below 1e-5
  auto f = [&](const std::vector<double>& x) {
    std::vector<std::complex<long double>> v(n);
    for (std::size_t m = 0; m < n; ++m) v[m] = std::polar<long double>(x[n + m], x[m]);
    std::vector<std::complex<long double>> i_bus(n);
    y.for_each([&](std::size_t r, std::size_t c, warmopf::Complex val) {
      i_bus[r] += std::complex<long double>(val.real(), val.imag()) * v[c];
    });
    std::vector<long double> out(2 * n);
    for (std::size_t m = 0; m < n; ++m) {
      const auto s = v[m] * std::conj(i_bus[m]);
      out[m] = s.real();
      out[n + m] = s.imag();
    }
    return out;
  };
  std::vector<double> x = s.va;
  x.insert(x.end(), s.vm.begin(), s.vm.end());
  const auto fd = fd_jacobian_ld(f, x);
  const Eigen::MatrixXd an = Eigen::MatrixXd(warmopf::pf_jacobian(s, y));
  double worst = 0.0;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    for (std::size_t j = 0; j < 2 * n; ++j) {
      const double a = an(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double b = fd[i][j];
      const double scale = std::max(std::abs(a), std::abs(b));
      if (scale <= 1e-8) continue;
      worst = std::max(worst, std::abs(a - b) / scale);
    }
  }
  return worst;
}

}  // namespace oracles
