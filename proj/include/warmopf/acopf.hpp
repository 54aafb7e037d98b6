#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "warmopf/casefile.hpp"
#include "warmopf/ipm.hpp"
#include "warmopf/network.hpp"
#include "warmopf/powerflow.hpp"

namespace warmopf {

/// Objective scaling applied inside the interior-point method (the reported
/// objective is unscaled). Keeps multipliers O(1) so the complementarity test
/// is meaningful at the 1e-6 tolerance.
inline constexpr double kDefaultCostScale = 1e-4;

/// AC OPF instance. Variable layout x = [va (N), vm (N), pg (G), qg (G)];
/// the reference bus angle is fixed at 0. Equalities are the active and
/// reactive balance at every bus (2N).
class OpfProblem {
 public:
  explicit OpfProblem(CaseData data, bool enforce_line_limits = false, double cost_scale = kDefaultCostScale);

  const CaseData& data() const { return data_; }
  const AdmittanceMatrix& admittance() const { return y_; }
  const BusIndex& index() const { return idx_; }
  bool enforce_line_limits() const { return enforce_line_limits_; }
  double cost_scale() const { return cost_scale_; }

  std::size_t num_buses() const { return data_.num_buses(); }
  std::size_t num_gens() const { return data_.num_gens(); }
  std::size_t num_variables() const { return 2 * num_buses() + 2 * num_gens(); }
  std::size_t num_equalities() const { return 2 * num_buses(); }
  std::size_t slack_index() const { return slack_; }
  /// Bus index of every generator.
  const std::vector<std::size_t>& gen_bus() const { return gen_bus_; }
  /// In-service branches with a finite positive rating (empty unless limits are enforced).
  const std::vector<std::size_t>& limited_branches() const { return limited_; }

  std::size_t va_offset() const { return 0; }
  std::size_t vm_offset() const { return num_buses(); }
  std::size_t pg_offset() const { return 2 * num_buses(); }
  std::size_t qg_offset() const { return 2 * num_buses() + num_gens(); }

  ipm::Vector lower_bounds() const;
  ipm::Vector upper_bounds() const;

 private:
  CaseData data_;
  BusIndex idx_;
  AdmittanceMatrix y_;
  bool enforce_line_limits_;
  double cost_scale_;
  std::size_t slack_ = 0;
  std::vector<std::size_t> gen_bus_;
  std::vector<std::size_t> limited_;
};

enum class StartLabel { Flat, DC, Learned, Custom };
std::string_view to_string(StartLabel label);
std::optional<StartLabel> parse_start_label(std::string_view text);

struct StartPoint {
  std::vector<double> vm, va;  // per bus
  std::vector<double> pg, qg;  // per generator
  StartLabel label = StartLabel::Custom;
};

/// Robust: regularized KKT solves, step fallback, slack floor 1e-2.
/// Fragile: no regularization, slack floor 1e-6, no fallback.
enum class SolverProfile { Robust, Fragile };
std::string_view to_string(SolverProfile profile);
std::optional<SolverProfile> parse_profile(std::string_view text);
ipm::Options solver_options(SolverProfile profile);

enum class OpfStatus { Converged, MaxIterations, NumericalFailure };
std::string_view to_string(OpfStatus status);

struct OpfSolution {
  VoltageState state;
  std::vector<double> pg, qg;
  double objective = 0.0;  // $/h
  OpfStatus status = OpfStatus::NumericalFailure;
  int iterations = 0;
  std::vector<ipm::IterationRecord> trace;
  double wall_time = 0.0;  // seconds, solver only
  /// Multipliers in the solver's scaled units: balance (p then q per bus),
  /// upper/lower bound multipliers per variable, flow limits (from, to per
  /// limited branch).
  std::vector<double> lam, mu_upper, mu_lower, mu_flow;
  std::string message;
};

/// Generation cost sum a*pg^2 + b*pg + c.
double objective(const std::vector<double>& pg, const std::vector<CostCurve>& costs);
std::vector<double> objective_gradient(const std::vector<double>& pg, const std::vector<CostCurve>& costs);
/// Diagonal of the (diagonal) Hessian.
std::vector<double> objective_hessian(const std::vector<CostCurve>& costs);

/// The NLP view of an OpfProblem handed to the interior-point core.
class AcOpfNlp final : public ipm::NlpProblem {
 public:
  explicit AcOpfNlp(const OpfProblem& problem) : p_(problem) {}

  std::size_t num_variables() const override { return p_.num_variables(); }
  std::size_t num_equalities() const override { return p_.num_equalities(); }
  std::size_t num_inequalities() const override { return 2 * p_.limited_branches().size(); }
  ipm::Vector lower_bounds() const override { return p_.lower_bounds(); }
  ipm::Vector upper_bounds() const override { return p_.upper_bounds(); }
  double objective(const ipm::Vector& x) const override;
  ipm::Vector gradient(const ipm::Vector& x) const override;
  ipm::Vector equalities(const ipm::Vector& x) const override;
  ipm::SparseMatrix equality_jacobian(const ipm::Vector& x) const override;
  ipm::Vector inequalities(const ipm::Vector& x) const override;
  ipm::SparseMatrix inequality_jacobian(const ipm::Vector& x) const override;
  ipm::SparseMatrix lagrangian_hessian(const ipm::Vector& x, const ipm::Vector& lam,
                                       const ipm::Vector& mu) const override;

 private:
  const OpfProblem& p_;
};

ipm::Vector pack(const OpfProblem& problem, const StartPoint& start);

OpfSolution solve_acopf(const OpfProblem& problem, const StartPoint& start,
                        SolverProfile profile = SolverProfile::Robust);

struct DcSolution {
  std::vector<double> va;  // rad, per bus
  std::vector<double> pg;  // p.u., per generator
  double objective = 0.0;  // $/h
  int iterations = 0;
  double wall_time = 0.0;
};

/// Lossless DC OPF on B' (weights 1/(x*tap), phase shifts as injections)
/// with generator active limits. Throws Infeasible when no dispatch can
/// balance the load or the interior-point solve does not converge.
DcSolution solve_dcopf(const CaseData& data);

StartPoint make_flat_start(const OpfProblem& problem);
StartPoint make_dc_start(const OpfProblem& problem, const DcSolution& dc);
/// Angles of a learned start: all zero, or the case file's bus angles shifted
/// so the reference bus is at 0 (what a MATPOWER warm start keeps).
enum class LearnedAngles { Zero, CaseFile };
std::string_view to_string(LearnedAngles angles);
std::optional<LearnedAngles> parse_learned_angles(std::string_view text);

/// `prediction` is [vm per bus, pg per generator]; throws SchemaMismatch on
/// a length mismatch.
StartPoint make_learned_start(const OpfProblem& problem, const std::vector<double>& prediction,
                              LearnedAngles angles = LearnedAngles::Zero);

/// DC start, or the flat start with `warning` set when the DC OPF fails.
StartPoint dc_start_or_flat(const OpfProblem& problem, std::string* warning = nullptr);

/// Max over balance residuals, bound violations (including a nonzero
/// reference angle) and flow-limit excess when enforced; p.u.
double max_constraint_violation(const OpfProblem& problem, const StartPoint& point);
double max_constraint_violation(const OpfProblem& problem, const OpfSolution& solution);

/// First-order optimality conditions re-evaluated from scratch: residuals use
/// power_injections and pf_jacobian rather than the solver's derivative code.
struct KktReport {
  double feasibility = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double max_violation = 0.0;
};
KktReport kkt_certificate(const OpfProblem& problem, const OpfSolution& solution);

nlohmann::json solution_to_json(const OpfProblem& problem, const OpfSolution& solution);
/// Columns: iteration,mu,feas,grad,comp,max_violation
std::string trace_to_csv(const OpfSolution& solution);

}  // namespace warmopf
