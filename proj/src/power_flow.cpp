#include "spopf/power_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

namespace spopf {

namespace {

bool near_singular(const Eigen::PartialPivLU<Matrix>& lu) {
  const auto& U = lu.matrixLU();
  double umin = std::numeric_limits<double>::infinity(), umax = 0.0;
  for (Index i = 0; i < U.rows(); ++i) {
    const double d = std::abs(U(i, i));
    umin = std::min(umin, d);
    umax = std::max(umax, d);
  }
  return umax == 0.0 || umin / umax < 1e-14;
}

}  // namespace

PowerFlowResult solve_power_flow(const QuadraticModel& model, const Vector& u,
                                 const Vector& x_guess, const PowerFlowOptions& opts) {
  PowerFlowResult res;
  res.x = x_guess;
  Vector fx = model.f(res.x, u);
  res.residual_inf = fx.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < opts.max_iter; ++it) {
    if (res.residual_inf <= opts.tol) {
      res.converged = true;
      return res;
    }
    Eigen::PartialPivLU<Matrix> lu(model.jacobian(res.x));
    if (near_singular(lu)) {
      res.singular_jacobian = true;
      return res;
    }
    res.x -= lu.solve(fx);
    ++res.iterations;
    fx = model.f(res.x, u);
    res.residual_inf = fx.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res.residual_inf)) return res;
  }
  res.converged = res.residual_inf <= opts.tol;
  return res;
}

DetSignLogAbs det_sign_logabs(const Matrix& J) {
  Eigen::PartialPivLU<Matrix> lu(J);
  DetSignLogAbs out;
  const auto& U = lu.matrixLU();
  double log_abs = 0.0;
  int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
  double umin = std::numeric_limits<double>::infinity(), umax = 0.0;
  for (Index i = 0; i < U.rows(); ++i) {
    const double d = U(i, i);
    const double a = std::abs(d);
    umin = std::min(umin, a);
    umax = std::max(umax, a);
    if (a == 0.0) {
      out.sign = 0;
      out.log_abs = -std::numeric_limits<double>::infinity();
      return out;
    }
    log_abs += std::log(a);
    if (d < 0.0) sign = -sign;
  }
  if (umax == 0.0 || umin / umax < 1e-14) {
    out.sign = 0;
    out.log_abs = log_abs;
    return out;
  }
  out.sign = sign;
  out.log_abs = log_abs;
  return out;
}

double neg_abs_det(const DetSignLogAbs& d) {
  if (d.sign == 0) return 0.0;
  const double clamped = std::clamp(d.log_abs, -700.0, 700.0);
  return -std::exp(clamped);
}

}  // namespace spopf
