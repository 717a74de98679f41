#pragma once

#include "opf/acopf.hpp"

#include <string>

namespace opf {

enum class SolveStatus {
  Converged,
  MaxIterations,
  InfeasibleDetected,
};

const char* to_string(SolveStatus status);

struct SolverOptions {
  double tolerance = 1e-4;     // scaled KKT infinity-norm target
  int max_iterations = 500;
  double barrier_init = 0.1;
  double ftb_tau = 0.995;      // fraction-to-boundary parameter
  double reg_floor = 1e-8;     // inertia-correction floor
  double push_margin = 1e-2;   // relative interior push applied to the start
  double step_cap = 1.0;       // max infinity-norm of the primal step
};

struct NlpSolution {
  Vector x;
  Vector eq_duals;    // mu, sign convention: grad f + J_eq' mu + ... = 0
  Vector ineq_duals;  // lambda >= 0
  Vector z_lower, z_upper;  // bound multipliers >= 0
  SolveStatus status = SolveStatus::MaxIterations;
  double kkt_residual = 0.0;
  int iterations = 0;
  double objective = 0.0;
};

/// Scaled KKT infinity-norm at (x, multipliers): the max over
///   stationarity   |grad f + J_eq' mu + J_ineq' lambda - z_l + z_u|
///   feasibility    |c(x)|, max(h(x), 0), bound violations
///   complementarity |lambda_k h_k|, |z_j (x_j - l_j)|, |z_j (u_j - x_j)|
/// with the stationarity and complementarity blocks scaled by
/// 1/(1 + max multiplier magnitude) and feasibility by 1/(1 + |x|_inf).
/// Rows of variables fixed by their bounds are excluded from stationarity
/// and complementarity.
double kkt_residual(const NlpProblem& problem, const Vector& x,
                    const Vector& eq_duals, const Vector& ineq_duals,
                    const Vector& z_lower, const Vector& z_upper);

double kkt_residual(const NlpProblem& problem, const NlpSolution& solution);

/// Primal-dual interior-point solve: inequalities are slacked into
/// equalities with nonnegative slacks, bounds handled by a logarithmic
/// barrier with a monotone reduction schedule, Newton steps on the
/// perturbed KKT system factorized dense with inertia correction,
/// fraction-to-boundary clipping, and an Armijo line search on the exact
/// l1-penalty merit function. The start is pushed strictly inside the
/// bounds before iteration begins. Deterministic: identical inputs give
/// bit-identical output.
NlpSolution solve(const NlpProblem& problem, const Vector& start,
                  const SolverOptions& options = {});

}  // namespace opf
