#pragma once

#include "spopf/quadratic_model.hpp"
#include "spopf/types.hpp"

namespace spopf {

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 20;
};

struct PowerFlowResult {
  Vector x;
  int iterations = 0;
  double residual_inf = 0.0;
  bool converged = false;
  bool singular_jacobian = false;
};

/// Newton-Raphson on f(x, u) = 0 starting from x_guess. The returned state
/// lies on the solution branch connected to the guess; non-convergence and
/// singular Jacobians are reported, not thrown.
PowerFlowResult solve_power_flow(const QuadraticModel& model, const Vector& u,
                                 const Vector& x_guess, const PowerFlowOptions& opts = {});

struct DetSignLogAbs {
  int sign = 0;  // 0 iff numerically singular
  double log_abs = 0.0;
};

/// Sign and log-magnitude of det(J) from a pivoted LU factorization.
DetSignLogAbs det_sign_logabs(const Matrix& J);

/// -|det J| with the log-magnitude clamped to +-700 before exponentiation,
/// the value used by the power-flow feasibility constraint.
double neg_abs_det(const DetSignLogAbs& d);

}  // namespace spopf
