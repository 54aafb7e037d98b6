#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace warmopf::ipm {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Smooth NLP:  min f(x)  s.t.  g(x) = 0,  h(x) <= 0,  lb <= x <= ub.
/// Variables with lb == ub are held fixed and removed from the Newton system.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual std::size_t num_variables() const = 0;
  virtual std::size_t num_equalities() const = 0;
  virtual std::size_t num_inequalities() const { return 0; }

  virtual Vector lower_bounds() const;
  virtual Vector upper_bounds() const;

  virtual double objective(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;

  virtual Vector equalities(const Vector& x) const = 0;
  /// num_equalities x num_variables
  virtual SparseMatrix equality_jacobian(const Vector& x) const = 0;

  virtual Vector inequalities(const Vector& x) const;
  /// num_inequalities x num_variables
  virtual SparseMatrix inequality_jacobian(const Vector& x) const;

  /// Full symmetric Hessian of f(x) + lam'g(x) + mu'h(x).
  virtual SparseMatrix lagrangian_hessian(const Vector& x, const Vector& lam, const Vector& mu) const = 0;
};

struct Options {
  /// Applies to the three normalized conditions and to the raw max violation.
  double tolerance = 1e-6;
  int max_iterations = 100;
  double centering = 0.1;           // sigma
  double step_to_boundary = 0.99995;  // xi
  /// Initial slacks are max(-h(x0), slack_floor).
  double slack_floor = 1e-2;
  /// Retry singular KKT factorizations with diagonal shifts
  /// regularization_start * 10^k up to regularization_max.
  bool regularize = true;
  double regularization_start = 1e-10;
  double regularization_max = 1e-2;
  /// Halve the step when the trial point cannot be evaluated.
  bool step_fallback = true;
};

enum class Status { Converged, MaxIterations, NumericalFailure };

std::string_view to_string(Status status);

struct IterationRecord {
  int iteration = 0;
  double barrier = 0.0;     // gamma
  double feasibility = 0.0;  // normalized feasibility condition
  double gradient = 0.0;     // normalized stationarity condition
  double complementarity = 0.0;
  double max_violation = 0.0;  // max(|g|_inf, max(h, bounds)) unnormalized
  double objective = 0.0;
  double regularization = 0.0;

  double gap() const;
};

struct Result {
  Status status = Status::NumericalFailure;
  int iterations = 0;
  Vector x;
  Vector lam;       // equality multipliers
  Vector mu;        // multipliers of h(x) <= 0
  Vector mu_upper;  // bound multipliers, per variable (0 where unbounded or fixed)
  Vector mu_lower;
  double objective = 0.0;
  std::vector<IterationRecord> trace;
  std::string message;
};

/// Primal-dual interior-point method with log-barrier slacks. `x0` need not be
/// interior; it is projected onto the variable bounds first.
Result solve(const NlpProblem& problem, const Vector& x0, const Options& options = {});

}  // namespace warmopf::ipm
