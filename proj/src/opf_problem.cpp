#include "spopf/opf_problem.hpp"

namespace spopf {

OpfPathProblem::OpfPathProblem(const QuadraticModel& model, const ConstraintSet& set,
                               PowerFlowOptions pf_opts)
    : evaluator_(model, set, pf_opts), pf_opts_(pf_opts) {}

bool OpfPathProblem::prime(const PathDiscretization& disc) {
  const Index K = disc.K();
  const QuadraticModel& model = evaluator_.model();
  if (!primed_) {
    PowerFlowResult r0 = solve_power_flow(model, disc.u0(), model.flat_start(), pf_opts_);
    if (!r0.converged) return false;
    x0_ = r0.x;
    accepted_.assign(static_cast<size_t>(K), Vector());
    trial_.assign(static_cast<size_t>(K), Vector());
    bundles_.resize(static_cast<size_t>(K));
    Vector warm = x0_;
    for (Index i = 0; i < K; ++i) {
      PowerFlowResult ri = solve_power_flow(model, disc.point(i + 1), warm, pf_opts_);
      if (!ri.converged) return false;
      accepted_[static_cast<size_t>(i)] = ri.x;
      trial_[static_cast<size_t>(i)] = ri.x;
      warm = ri.x;
    }
    PowerFlowResult r1 = solve_power_flow(model, disc.u1(), warm, pf_opts_);
    if (!r1.converged) return false;
    x1_ = r1.x;
    primed_ = true;
  }
  return true;
}

bool OpfPathProblem::eval_values(Index i, const Vector& u, Vector& g) {
  auto res = evaluator_.eval_values(u, accepted_[static_cast<size_t>(i)]);
  if (!res) return false;
  g = std::move(res->first);
  trial_[static_cast<size_t>(i)] = std::move(res->second);
  return true;
}

bool OpfPathProblem::eval_full(Index i, const Vector& u, Vector& g, Matrix& dg_du) {
  auto b = evaluator_.eval_bundle(u, accepted_[static_cast<size_t>(i)]);
  if (!b) return false;
  accepted_[static_cast<size_t>(i)] = b->x;
  g = b->g;
  dg_du = b->dg_du;
  bundles_[static_cast<size_t>(i)] = std::move(*b);
  return true;
}

Matrix OpfPathProblem::lagrangian_hessian(Index i, const Vector& z) {
  return evaluator_.lagrangian_hessian(bundles_[static_cast<size_t>(i)], z);
}

void OpfPathProblem::accept_trials() { accepted_ = trial_; }

}  // namespace spopf
