#pragma once

#include <complex>
#include <map>
#include <string>
#include <vector>

#include "spopf/network_case.hpp"
#include "spopf/types.hpp"

namespace spopf {

struct ControlSlot {
  enum class Kind { ActivePower, VoltageSquared };
  Kind kind = Kind::ActivePower;
  int bus_id = 0;
  Index equation = -1;  // row of f that receives -u for this slot
  std::string name() const {
    return (kind == Kind::ActivePower ? "P:" : "V:") + std::to_string(bus_id);
  }
};

struct ComplexCoeff {
  Index bus;  // bus position (0-based)
  std::complex<double> y;
};

/// x^T A x = Re or Im of V_i * conj(sum_j y_j V_j) with the state layout
/// x = [e_1..e_n, f_1..f_n]. A is symmetric.
SpMat power_quadratic_form(Index n, Index bus, const std::vector<ComplexCoeff>& coeffs,
                           bool reactive);

struct BranchAdmittance {
  std::complex<double> yff, yft, ytf, ytt;
};

Eigen::SparseMatrix<std::complex<double>> admittance_matrix(const NetworkCase& nc);
std::vector<BranchAdmittance> branch_admittances(const NetworkCase& nc);

/// Power flow equations in rectangular voltage coordinates:
///   f_k(x, u) = 1/2 x^T H_k x + r_k^T x + c_k            (uncontrolled)
///   f_k(x, u) = 1/2 x^T H_k x + r_k^T x + c_k - u_j      (controlled rows)
/// Every H_k is symmetric with at most two non-zero rows and columns. The
/// Jacobian with respect to x is affine: J(x) = J_0 + sum_k J_k (x)_k.
class QuadraticModel {
 public:
  /// Assemble from a merged case; every generator bus contributes a squared
  /// voltage control and, unless it is the slack, an active power control.
  static QuadraticModel build(const NetworkCase& merged_case);

  Index n_buses() const { return n_; }
  Index state_dim() const { return 2 * n_; }
  Index num_equations() const { return 2 * n_; }
  Index control_dim() const { return static_cast<Index>(slots_.size()); }

  const std::vector<ControlSlot>& controls() const { return slots_; }
  Index control_index(const std::string& name) const;
  Index slack_bus() const { return slack_; }

  const SpMat& H(Index k) const { return H_[static_cast<size_t>(k)]; }
  const Vector& r(Index k) const { return r_[static_cast<size_t>(k)]; }
  double c(Index k) const { return c_(k); }

  Vector f(const Vector& x, const Vector& u) const;
  Matrix jacobian(const Vector& x) const;
  Matrix jacobian_at_zero() const;
  /// Rows [v^T H_k]_k; equals J(v) - J(0).
  Matrix jacobian_linear_part(const Vector& v) const;
  /// Dense sum_k theta_k H_k.
  Matrix weighted_hessian_sum(const Vector& theta) const;

  /// Default initial state: e = Vset on generator buses (1 elsewhere), f = 0.
  const Vector& flat_start() const { return flat_; }

  /// Restrict the control vector: `active` lists the controls kept, in
  /// order; `frozen` maps the remaining control names to fixed values that
  /// are folded into the constant terms.
  QuadraticModel configure_controls(const std::vector<std::string>& active,
                                    const std::map<std::string, double>& frozen) const;

 private:
  Index n_ = 0;
  Index slack_ = -1;
  std::vector<SpMat> H_;
  std::vector<Vector> r_;
  Vector c_;
  std::vector<ControlSlot> slots_;
  Vector flat_;
};

}  // namespace spopf
