#pragma once

#include <vector>

#include "spopf/constraints.hpp"
#include "spopf/ipm.hpp"

namespace spopf {

/// Path-point constraint oracle over a power grid. Keeps one accepted and
/// one trial power-flow state per interior point so warm starts stay on the
/// solution branch pinned by the endpoint state. Calls for distinct points
/// are safe to run concurrently.
class OpfPathProblem : public StageEvaluator {
 public:
  OpfPathProblem(const QuadraticModel& model, const ConstraintSet& set,
                 PowerFlowOptions pf_opts = {});

  Index num_constraints() const override { return evaluator_.set().size(); }
  Index control_dim() const override { return evaluator_.model().control_dim(); }

  /// Solve the endpoint state and chain warm starts along the path. Must
  /// succeed before any other call; returns false when some point's power
  /// flow does not converge.
  bool prime(const PathDiscretization& disc) override;

  bool eval_values(Index i, const Vector& u, Vector& g) override;
  bool eval_full(Index i, const Vector& u, Vector& g, Matrix& dg_du) override;
  Matrix lagrangian_hessian(Index i, const Vector& z) override;
  void accept_trials() override;
  bool relaxable(Index j) const override {
    return evaluator_.set().spec(j).domain != ConstraintDomain::PowerFlowFeasibility;
  }

  const ConstraintEvaluator& evaluator() const { return evaluator_; }
  /// Accepted state at interior point i (0-based).
  const Vector& state(Index i) const { return accepted_[static_cast<size_t>(i)]; }
  const Vector& endpoint_state(int which) const { return which == 0 ? x0_ : x1_; }

 private:
  ConstraintEvaluator evaluator_;
  PowerFlowOptions pf_opts_;
  bool primed_ = false;
  Vector x0_, x1_;
  std::vector<Vector> accepted_;  // per interior point
  std::vector<Vector> trial_;
  std::vector<DerivativeBundle> bundles_;  // from the last eval_full sweep
};

}  // namespace spopf
