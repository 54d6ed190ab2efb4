#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spopf/types.hpp"

namespace spopf {

/// Piece-wise linear path in control space, stored as its interior corner
/// points. Endpoints are fixed; p holds the K interior corners stacked into
/// a single vector of size dim()*K.
class PathDiscretization {
 public:
  PathDiscretization() = default;
  PathDiscretization(Vector u0, Vector u1, Vector t);

  Index K() const { return t_.size() - 2; }
  Index dim() const { return u0_.size(); }

  const Vector& u0() const { return u0_; }
  const Vector& u1() const { return u1_; }
  const Vector& spacing() const { return t_; }

  /// Parameter t_k, k = 0..K+1.
  double t(Index k) const { return t_(k); }
  /// Segment weight w_k = (t_k - t_{k-1})^{-2}/(K+1), valid for k = 1..K+1.
  /// w(0) is 0 by convention.
  double w(Index k) const { return k == 0 ? 0.0 : w_(k - 1); }

  /// Corner point p_k, k = 0..K+1 (k=0 and k=K+1 are the endpoints).
  Vector point(Index k) const;

  const Vector& interior() const { return p_; }
  Vector& interior() { return p_; }
  void set_interior(const Vector& p);

  /// Segment differences d_k = p_k - p_{k-1} as columns, column k-1 holds
  /// d_k for k = 1..K+1.
  Matrix differences() const;

 private:
  Vector u0_, u1_;
  Vector t_;  // size K+2, strictly increasing, t_0 = 0, t_{K+1} = 1
  Vector w_;  // size K+1, w_(k-1) = w_k
  Vector p_;  // size dim*K, interior corners
};

/// Uniform spacing t_k = k/(K+1).
Vector uniform_spacing(Index K);

/// Straight-line initial path p_k = u0 + t_k (u1 - u0). Throws if u0 == u1
/// or the spacing is not strictly increasing from 0 to 1.
PathDiscretization init_line_path(const Vector& u0, const Vector& u1, const Vector& t);

/// Weighted squared-length objective sum_k w_k ||d_k||^2.
double path_objective(const PathDiscretization& disc);

/// Gradient of the objective with respect to the interior corners; block i
/// equals 2 w_i d_i - 2 w_{i+1} d_{i+1}.
Vector path_objective_gradient(const PathDiscretization& disc);

/// Constant-speed equality residuals c_i = w_i ||d_i||^2 - w_{i+1} ||d_{i+1}||^2.
Vector equality_constraints(const PathDiscretization& disc);

/// Dense K x (dim*K) Jacobian of the equality constraints. Intended for
/// tests and small problems; the solver uses the banded structure directly.
Matrix equality_jacobian_dense(const PathDiscretization& disc);

/// Product D_E^T y without forming D_E; block i of the result is
/// 2 w_i d_i (y_i - y_{i-1}) + 2 w_{i+1} d_{i+1} (y_i - y_{i+1}).
Vector equality_jacobian_transpose_product(const PathDiscretization& disc, const Vector& y);

/// K x K tridiagonal factor Y of the objective Hessian 2 Y (x) I.
Matrix objective_hessian_tridiag(const PathDiscretization& disc);

/// Dense Hessian of y^T c_E with respect to the interior corners. Blocks are
/// scalar multiples of the identity; returned dense for tests.
Matrix equality_hessian_term_dense(const PathDiscretization& disc, const Vector& y);

/// Scalars a_k = 2 w_k (1 + y_k - y_{k-1}) for k = 1..K+1, with the
/// convention y_0 = y_{K+1} = 0. These are the leading coefficients of the
/// Phi_k blocks of the reduced KKT system.
Vector phi_scalars(const PathDiscretization& disc, const Vector& y);

struct RankMargins {
  double ratio_b = 0.0;
  double ratio_q = 0.0;
  bool pass = false;
  bool degenerate_segment = false;  // some d_j == 0
};

/// Rank-safeguard ratios for the equality Jacobian: the spread of the
/// weighted segment vectors and the normalized magnitude of the inverse-
/// segment sum. pass requires both strictly above eps_ls; a zero segment
/// fails with a diagnostic.
RankMargins rank_margins(const PathDiscretization& disc, double eps_ls);

/// CSV serialization: header "k,t" followed by one column per control name,
/// one row per corner point including the endpoints.
void write_path_csv(std::ostream& os, const PathDiscretization& disc,
                    const std::vector<std::string>& control_names);
PathDiscretization read_path_csv(std::istream& is);

}  // namespace spopf
