#pragma once

#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "warmopf/casefile.hpp"
#include "warmopf/network.hpp"

namespace warmopf {

/// Polar bus voltages: magnitudes (p.u.) and angles (rad), one per bus.
struct VoltageState {
  std::vector<double> vm;
  std::vector<double> va;

  static VoltageState flat(std::size_t n) { return {std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)}; }
  std::size_t size() const { return vm.size(); }
};

/// Net active/reactive injection per bus (p.u.).
struct InjectionVector {
  std::vector<double> p;
  std::vector<double> q;
};

/// Injections computed from the AC power flow equations, summing over the
/// stored entries of Y only.
InjectionVector power_injections(const VoltageState& state, const AdmittanceMatrix& y);

/// Sparse Jacobian d(p, q)/d(va, vm). Rows are [p_0..p_{N-1}, q_0..q_{N-1}],
/// columns [va_0..va_{N-1}, vm_0..vm_{N-1}].
Eigen::SparseMatrix<double> pf_jacobian(const VoltageState& state, const AdmittanceMatrix& y);

/// True when every bus is reachable from the first over in-service branches.
bool is_connected(const CaseData& data, const BusIndex& idx);

enum class PfStatus { Converged, Diverged, MaxIterations };

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 30;
};

/// Scheduled net injection per bus. Slack quantities are ignored, as is q at
/// PV buses; their voltages are held at the values of the start state.
struct PowerFlowSetpoints {
  std::vector<double> p;
  std::vector<double> q;
};

/// Generator initial setpoints minus loads.
PowerFlowSetpoints default_setpoints(const CaseData& data, const BusIndex& idx);

struct PowerFlowResult {
  VoltageState state;
  int iterations = 0;
  PfStatus status = PfStatus::MaxIterations;
  /// max |mismatch| before each Newton step and at the final point
  std::vector<double> mismatch_history;
};

/// Newton-Raphson power flow. Unknowns are va at PV and PQ buses and vm at PQ
/// buses. Throws Disconnected for islanded networks and SingularJacobian when
/// the Newton system cannot be factorized.
PowerFlowResult solve_powerflow(const CaseData& data, const AdmittanceMatrix& y, const VoltageState& start,
                                const PowerFlowSetpoints& setpoints, const PowerFlowOptions& options = {});

/// Infinity norms of the balance residuals (computed - (generation - load)),
/// for per-generator dispatch pg/qg and the case loads.
std::pair<double, double> mismatch_norms(const CaseData& data, const AdmittanceMatrix& y, const VoltageState& state,
                                         const std::vector<double>& pg, const std::vector<double>& qg);

}  // namespace warmopf
