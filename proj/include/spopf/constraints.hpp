#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "spopf/network_case.hpp"
#include "spopf/power_flow.hpp"
#include "spopf/quadratic_model.hpp"
#include "spopf/types.hpp"

namespace spopf {

enum class ConstraintDomain { Control, State, PowerFlowFeasibility };

enum class ConstraintKind {
  ControlLower,
  ControlUpper,
  VoltageLower,
  VoltageUpper,
  ActivePowerLower,
  ActivePowerUpper,
  ReactivePowerLower,
  ReactivePowerUpper,
  ApparentFlow,
  AngleDifference,
  Determinant,
};

/// g(x) = x^T A x + c with symmetric A.
struct QuadraticForm {
  SpMat A;
  double c = 0.0;
  double value(const Vector& x) const { return x.dot(A * x) + c; }
  Vector gradient(const Vector& x) const { return 2.0 * (A * x); }
};

struct ConstraintSpec {
  ConstraintDomain domain = ConstraintDomain::State;
  ConstraintKind kind = ConstraintKind::VoltageUpper;
  std::string label;
  // Control constraints: g = sign * u_slot - bound.
  Index slot = -1;
  double sign = 1.0;
  double bound = 0.0;
  // State constraints, quadratic: g = qf(x).
  QuadraticForm qf;
  // State constraints, quartic flow: g = fp(x)^2 + fq(x)^2 - bound.
  bool quartic = false;
  QuadraticForm fp, fq;
};

struct ConstraintOptions {
  bool enable_det_constraint = false;  // the power-flow feasibility constraint
  bool flow_limits = true;
  bool angle_limits = true;
};

/// The inequality vector g_I = g_U u g_X u g_P derived from a case and a
/// configured model. Constraint order is deterministic: control boxes, then
/// state constraints (voltages, slack power, reactive power, flows, angles),
/// then the optional determinant constraint last.
class ConstraintSet {
 public:
  static ConstraintSet build(const NetworkCase& merged_case, const QuadraticModel& model,
                             const ConstraintOptions& opts = {});

  Index size() const { return static_cast<Index>(specs_.size()); }
  const std::vector<ConstraintSpec>& specs() const { return specs_; }
  const ConstraintSpec& spec(Index j) const { return specs_[static_cast<size_t>(j)]; }
  Index det_index() const { return det_index_; }

 private:
  std::vector<ConstraintSpec> specs_;
  Index det_index_ = -1;
};

/// Everything needed at one control point: the solved state, constraint
/// values and control-space derivatives via the implicit function theorem.
struct DerivativeBundle {
  Vector x;
  Vector g;      // |I|
  Matrix dg_du;  // |I| x m
  Matrix dx_du;  // 2n x m
  Matrix dg_dx;  // |I| x 2n; zero rows for control constraints
  Eigen::PartialPivLU<Matrix> lu_J;
  DetSignLogAbs det;
};

class ConstraintEvaluator {
 public:
  ConstraintEvaluator(const QuadraticModel& model, const ConstraintSet& set,
                      PowerFlowOptions pf_opts = {});

  const QuadraticModel& model() const { return *model_; }
  const ConstraintSet& set() const { return *set_; }

  /// Constraint values at u; the state is solved from x_warm. Empty on
  /// power-flow failure.
  std::optional<std::pair<Vector, Vector>> eval_values(const Vector& u, const Vector& x_warm) const;

  /// Full derivative bundle at u. Empty on power-flow failure or singular
  /// Jacobian at the solution.
  std::optional<DerivativeBundle> eval_bundle(const Vector& u, const Vector& x_warm) const;

  /// dx/du^T = J(x)^{-1} E with E the control selector.
  Matrix state_sensitivity(const Eigen::PartialPivLU<Matrix>& lu_J) const;

  /// d^2 x / (d u_m du^T) = -J^{-1} [sum_k J_k (dx/du)_{km}] dx/du.
  Matrix state_sensitivity_second(const DerivativeBundle& b, Index m) const;

  /// Hessian block sum_j z_j * d^2 g_j / du du^T, assembled through the
  /// theta_1 / theta_2 / Theta_3 staging so J^{-1} is only applied once.
  Matrix lagrangian_hessian(const DerivativeBundle& b, const Vector& z) const;

  /// Hessian of a single constraint in control space (test harness use).
  Matrix constraint_hessian(const DerivativeBundle& b, Index j) const;

  /// Hessian of a state constraint in x (2A for quadratics, the quartic
  /// expansion for flows, the Jacobi-formula expression for the determinant).
  Matrix state_hessian_x(const DerivativeBundle& b, Index j) const;

 private:
  Vector det_trace_vector(const DerivativeBundle& b) const;  // t_k = tr(J^{-1} J_k)

  const QuadraticModel* model_;
  const ConstraintSet* set_;
  PowerFlowOptions pf_opts_;
};

}  // namespace spopf
