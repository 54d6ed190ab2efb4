#include "spopf/homotopy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spopf {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Success: return "success";
    case SolveStatus::StagnationFailure: return "stagnation_failure";
    case SolveStatus::InnerFailure: return "inner_failure";
  }
  return "unknown";
}

namespace {

/// Raw constraint values at every interior corner; empty on failure.
bool corner_values(StageEvaluator& eval, const PathDiscretization& disc, int threads, Matrix& G) {
  const Index K = disc.K(), nI = eval.num_constraints();
  G.resize(nI, K);
  std::atomic<bool> ok{true};
  parallel_for(K, threads, [&](Index i) {
    Vector g;
    if (!eval.eval_values(i, disc.point(i + 1), g)) {
      ok = false;
      return;
    }
    G.col(i) = g;
  });
  return ok;
}

}  // namespace

Vector relaxation_vector(StageEvaluator& eval, const PathDiscretization& disc, double beta,
                         int threads) {
  Matrix G;
  if (!corner_values(eval, disc, threads, G))
    throw std::runtime_error("relaxation_vector: constraint evaluation failed at a corner");
  const Index nI = eval.num_constraints();
  Vector v = Vector::Zero(nI);
  for (Index j = 0; j < nI; ++j) {
    if (!eval.relaxable(j)) continue;
    double worst = 0.0;
    for (Index i = 0; i < G.cols(); ++i) worst = std::max(worst, G(j, i));
    v(j) = beta * worst;
  }
  return v;
}

ShortestPathResult shortest_path(StageEvaluator& eval, const PathDiscretization& line,
                                 const HomotopyParams& hp, const IPMParams& ipm) {
  ShortestPathResult res;
  res.path = line;
  const Index nI = eval.num_constraints();

  if (!eval.prime(line)) {
    res.status = SolveStatus::InnerFailure;
    res.failed_stage = 0;
    return res;
  }

  Matrix G;
  if (!corner_values(eval, line, ipm.threads, G)) {
    // the straight line must be power-flow solvable for the homotopy to start
    res.status = SolveStatus::InnerFailure;
    res.failed_stage = 0;
    return res;
  }
  res.max_violation_before = G.size() > 0 ? G.maxCoeff() : 0.0;

  Vector v = Vector::Zero(nI);
  for (Index j = 0; j < nI; ++j) {
    if (!eval.relaxable(j)) continue;
    double worst = 0.0;
    for (Index i = 0; i < G.cols(); ++i) worst = std::max(worst, G(j, i));
    v(j) = hp.beta * worst;
  }

  int non_improving = 0;
  bool stagnated = false;
  while (v.size() > 0 && v.lpNorm<Eigen::Infinity>() > ipm.eps_ls) {
    BarrierResult stage = barrier_solve(eval, res.path, v, hp.mu_hi, ipm);
    res.path.set_interior(stage.p);
    if (stage.status == BarrierStatus::InfeasibleStart ||
        stage.status == BarrierStatus::EvaluationError) {
      res.stages.push_back({v.lpNorm<Eigen::Infinity>(), hp.mu_hi, stage.iterations, stage.e_mu,
                            stage.status, std::move(stage.trace)});
      res.status = SolveStatus::InnerFailure;
      res.failed_stage = static_cast<int>(res.stages.size()) - 1;
      res.v_inf = v.lpNorm<Eigen::Infinity>();
      return res;
    }
    const Vector v_prev = v;
    Vector v_new;
    try {
      v_new = relaxation_vector(eval, res.path, hp.beta, ipm.threads);
    } catch (const std::runtime_error&) {
      res.status = SolveStatus::InnerFailure;
      res.failed_stage = static_cast<int>(res.stages.size());
      res.v_inf = v.lpNorm<Eigen::Infinity>();
      return res;
    }
    v = v_new.cwiseMin(v_prev);
    res.stages.push_back({v.lpNorm<Eigen::Infinity>(), hp.mu_hi, stage.iterations, stage.e_mu,
                          stage.status, std::move(stage.trace)});
    if ((v - v_prev).lpNorm<Eigen::Infinity>() <= hp.eps_st &&
        v.lpNorm<Eigen::Infinity>() > ipm.eps_ls) {
      if (++non_improving >= hp.patience) {
        stagnated = true;
        break;
      }
    } else {
      non_improving = 0;
    }
  }
  res.v_inf = v.size() > 0 ? v.lpNorm<Eigen::Infinity>() : 0.0;

  if (stagnated) {
    res.status = SolveStatus::StagnationFailure;
  } else {
    // final polish against the slightly relaxed set
    Vector v_polish = Vector::Constant(nI, ipm.eps_ls);
    for (Index j = 0; j < nI; ++j)
      if (!eval.relaxable(j)) v_polish(j) = 0.0;
    BarrierResult polish = barrier_solve(eval, res.path, v_polish, hp.mu_lo, ipm);
    res.path.set_interior(polish.p);
    res.stages.push_back({res.v_inf, hp.mu_lo, polish.iterations, polish.e_mu, polish.status,
                          std::move(polish.trace)});
    res.status = SolveStatus::Success;
  }

  // Exit-time constraint margin. On success this is measured against the
  // eps_ls-relaxed set the final polish solved (the quantity the solver
  // drives negative); on failure the raw violations are reported.
  Matrix Gf;
  if (corner_values(eval, res.path, ipm.threads, Gf) && Gf.size() > 0) {
    if (res.status == SolveStatus::Success) {
      double worst = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < nI; ++j) {
        const double vj = eval.relaxable(j) ? ipm.eps_ls : 0.0;
        for (Index i = 0; i < Gf.cols(); ++i) worst = std::max(worst, Gf(j, i) - vj);
      }
      res.max_violation_after = worst;
    } else {
      res.max_violation_after = Gf.maxCoeff();
    }
  } else if (Gf.size() == 0) {
    res.max_violation_after = 0.0;
  } else {
    res.status = SolveStatus::InnerFailure;
    return res;
  }
  if (res.status == SolveStatus::Success && !(res.max_violation_after < 0.0))
    res.status = SolveStatus::InnerFailure;
  return res;
}

}  // namespace spopf
