#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "spopf/linalg_btd.hpp"
#include "spopf/path.hpp"
#include "spopf/types.hpp"

namespace spopf {

struct IPMParams {
  double tau = 0.99;      // fraction-to-boundary
  double gamma = 0.5;     // backtracking ratio
  double eta = 1e-4;      // Armijo constant
  double eps_ls = 1e-6;   // minimal step / margin floor
  double rho_max = 100.0; // dual scale cap
  double eps_tol = 1e-3;  // stopping tolerance on E_mu
  int iter_max = 100;
  bool check_full_residual = false;  // verify the unreduced system each step
  int threads = 0;                   // 0 = hardware concurrency
};

/// Per-point constraint oracle for the inner solver. Implementations own any
/// state-continuation machinery (power-flow warm starts along the path);
/// calls for distinct points must be safe to run concurrently.
class StageEvaluator {
 public:
  virtual ~StageEvaluator() = default;
  virtual Index num_constraints() const = 0;
  virtual Index control_dim() const = 0;

  /// Sequential pass before a solve begins; the default does nothing.
  virtual bool prime(const PathDiscretization& disc) { (void)disc; return true; }

  /// Raw constraint values at interior point i (0-based, i < K). False when
  /// the point cannot be evaluated (treated as an infeasible trial).
  virtual bool eval_values(Index i, const Vector& u, Vector& g) = 0;

  /// Values plus the control-space constraint Jacobian at an accepted point.
  virtual bool eval_full(Index i, const Vector& u, Vector& g, Matrix& dg_du) = 0;

  /// z-weighted constraint Hessian at the point of the last eval_full(i, .).
  virtual Matrix lagrangian_hessian(Index i, const Vector& z) = 0;

  /// Promote the states of the accepted trial sweep to warm-start bases.
  virtual void accept_trials() {}

  /// Whether constraint j participates in homotopy relaxation (the
  /// power-flow feasibility constraint does not).
  virtual bool relaxable(Index j) const { (void)j; return true; }
};

enum class BarrierStatus {
  Converged,
  IterationLimit,
  FailedAfterCorrection,
  InfeasibleStart,
  EvaluationError,
};

const char* to_string(BarrierStatus s);

struct IterationRecord {
  int iter = 0;
  double e_mu = 0.0;
  double merit = 0.0;
  int backoff = 0;      // accepted M
  double alpha_z = 1.0;
  bool corrected = false;
};

struct BarrierResult {
  Vector p;  // final interior corners (stacked)
  Vector s, y, z;
  BarrierStatus status = BarrierStatus::IterationLimit;
  int iterations = 0;
  double e_mu = std::numeric_limits<double>::infinity();
  double max_full_residual = 0.0;  // populated when check_full_residual
  std::vector<IterationRecord> trace;
};

/// Algorithm: log-barrier Newton iteration on the relaxed constraint set
/// g - relaxation at fixed barrier parameter mu, with reduced
/// block-tridiagonal KKT solves, single-shot inertia correction after a
/// failed line search, fraction-to-boundary scaling of the dual step and the
/// scaled stopping metric E_mu.
BarrierResult barrier_solve(StageEvaluator& eval, const PathDiscretization& start,
                            const Vector& relaxation, double mu, const IPMParams& params);

// ---- building blocks, exposed for testing ----

/// Per-point data with relaxed constraint values.
struct PointData {
  Vector g;        // g - v at this point
  Matrix dg_du;    // |I| x m
  Matrix lag_hess; // m x m
};

/// Permuted reduced KKT system with blocks of size (m+1); diagonal block i is
/// [Gamma_i 0; 0 0] + Phi_i + Phi_{i+1}, off-diagonal blocks are -Phi_{i+1}.
void assemble_reduced_kkt(const PathDiscretization& disc, const Vector& y,
                          const std::vector<PointData>& pts, const Vector& z, const Vector& s,
                          double mu, const Vector& deltas, BTDMatrix& kkt, Vector& rhs);

/// grad_p of the Lagrangian phi + y^T c_E + sum_i z_i^T g(p_i).
Vector lagrangian_gradient(const PathDiscretization& disc, const Vector& y,
                           const std::vector<PointData>& pts, const Vector& z);

struct NewtonStep {
  Vector dp, dy, dz, ds;
};

/// Recover the eliminated inequality steps from (dp, dy).
void recover_steps(const std::vector<PointData>& pts, const Vector& z, const Vector& s, double mu,
                   NewtonStep& step);

/// Residual of the full unreduced Newton system (with the inertia
/// perturbation applied to the Hessian), relative to the right-hand side.
double full_system_residual(const PathDiscretization& disc, const Vector& y,
                            const std::vector<PointData>& pts, const Vector& z, const Vector& s,
                            double mu, const Vector& deltas, const NewtonStep& step);

/// alpha = min{1, min over (dz)_i < 0 of -tau z_i / dz_i}.
double fraction_to_boundary(const Vector& z, const Vector& dz, double tau);

/// psi = phi - mu sum ln(-g); +inf when any entry is nonnegative.
double merit_function(double phi, const Vector& g_stacked, double mu);

/// Scaled optimality error E_mu.
double error_metric(const Vector& grad_L, const Vector& c_E, const Vector& s, const Vector& y,
                    const Vector& z, double mu, double rho_max);

/// Perturbations delta_i = l_E + ||lag_hess_i||_F, where
/// l_E = -4 (1 + cos(pi/(K+1))) min{0, min_j w_j (y_j - y_{j-1})} is a
/// closed-form lower bound on the equality-term Hessian eigenvalues.
Vector inertia_correction(const PathDiscretization& disc, const Vector& y,
                          const std::vector<PointData>& pts);

/// Run fn(i) for i in [0, n); indices are distributed over up to `threads`
/// worker threads and results must be written to disjoint slots.
void parallel_for(Index n, int threads, const std::function<void(Index)>& fn);

}  // namespace spopf
