#pragma once

#include <vector>

#include "spopf/ipm.hpp"
#include "spopf/path.hpp"

namespace spopf {

struct HomotopyParams {
  double beta = 1.01;   // relaxation margin, > 1
  double mu_hi = 1e-1;  // homotopy-stage barrier parameter
  double mu_lo = 1e-6;  // final polish barrier parameter
  double eps_st = 1e-3; // stagnation tolerance on ||v - v_prev||_inf
  int patience = 1;     // consecutive non-improving stages before failure
};

enum class SolveStatus { Success, StagnationFailure, InnerFailure };

const char* to_string(SolveStatus s);

struct StageRecord {
  double v_inf = 0.0;
  double mu = 0.0;
  int inner_iterations = 0;
  double e_mu_exit = 0.0;
  BarrierStatus inner_status = BarrierStatus::Converged;
  std::vector<IterationRecord> trace;
};

struct ShortestPathResult {
  PathDiscretization path;
  double v_inf = 0.0;  // residual relaxation at exit
  SolveStatus status = SolveStatus::InnerFailure;
  std::vector<StageRecord> stages;
  double max_violation_before = 0.0;  // over interior corners of the line
  double max_violation_after = 0.0;   // over interior corners at exit
  int failed_stage = -1;              // stage index on inner failure
};

/// Maximum-violation relaxation vector (v)_j = beta * max_i max{g_j(p_i), 0};
/// entries the evaluator marks non-relaxable are pinned to zero. Throws
/// std::runtime_error if some corner cannot be evaluated.
Vector relaxation_vector(StageEvaluator& eval, const PathDiscretization& disc, double beta,
                         int threads = 0);

/// Outer loop: start from the straight line, repeatedly solve the barrier
/// problem for the relaxed constraints with mu_hi while shrinking the
/// relaxation, then polish with mu_lo against the eps_ls-relaxed set.
/// Stagnation of the relaxation vector reports failure (the endpoints may be
/// disconnected).
ShortestPathResult shortest_path(StageEvaluator& eval, const PathDiscretization& line,
                                 const HomotopyParams& hp, const IPMParams& ipm);

}  // namespace spopf
