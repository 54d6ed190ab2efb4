#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spopf/constraints.hpp"
#include "spopf/homotopy.hpp"
#include "spopf/metrics.hpp"
#include "spopf/opf_problem.hpp"

namespace spopf {

/// Solve request: case reference, endpoint control assignments, path
/// discretization and parameter overrides. Control names are "P:<bus>" and
/// "V:<bus>"; voltages are given in p.u. volts and squared at this boundary.
struct Scenario {
  std::string case_path;
  std::vector<std::string> controls;  // active controls, defines u layout
  std::map<std::string, double> u0, u1;
  std::map<std::string, double> frozen;
  Index K = 19;
  std::vector<double> spacing;  // interior t values; empty = uniform
  std::string p_unit = "pu";    // "pu" or "MW" for active power assignments
  ConstraintOptions toggles;
  IPMParams ipm;
  HomotopyParams homotopy;
};

Scenario load_scenario_file(const std::string& path);
Scenario parse_scenario_json(const std::string& text, const std::string& base_dir);

/// Assembled problem, ready to run.
struct BuiltProblem {
  NetworkCase merged_case;
  QuadraticModel model;
  ConstraintSet set;
  PathDiscretization line;
  std::vector<std::string> control_names;
};

BuiltProblem build_problem(const Scenario& sc);

struct SolveReport {
  SolveStatus status = SolveStatus::InnerFailure;
  int exit_code = 1;
  double max_violation_before = 0.0;
  double max_violation_after = 0.0;
  std::optional<double> path_diff_pct;
  std::optional<double> obj_fun_gap_pct;
  double v_inf = 0.0;
  double wall_time_s = 0.0;
  std::vector<StageRecord> stages;
  std::string case_name;
  Index K = 0;
  std::vector<std::string> controls;
  std::vector<std::string> warnings;
  PathDiscretization path;
};

/// Run the full pipeline. When out_dir is nonempty, writes path.csv,
/// report.json and (with trace) trace.jsonl into it. A nonempty resume_csv
/// replaces the straight-line initial path with a previously emitted one
/// (its endpoints must match the scenario).
SolveReport run_solve(const Scenario& sc, const std::string& out_dir = "", bool trace = false,
                      const std::string& resume_csv = "");

std::string report_to_json(const SolveReport& rep);

struct PowerflowRun {
  PowerFlowResult result;
  std::vector<std::string> control_names;
  Vector u;
  std::vector<int> bus_ids;
};

/// Solve one power flow for explicit control assignments (all generator
/// controls must be assigned or defaulted: V defaults to the case setpoint).
PowerflowRun run_powerflow(const std::string& case_path,
                           const std::map<std::string, double>& assignments,
                           const std::string& p_unit = "pu");

struct DerivativeCheckReport {
  int points_tested = 0;
  double max_err_state_sensitivity = 0.0;
  double max_err_state_second = 0.0;
  double max_err_constraint_gradients = 0.0;
  double max_err_constraint_hessians = 0.0;
  double max_err_path_gradient = 0.0;
  double max_err_equality_jacobian = 0.0;
};

/// Finite-difference audit of every analytic derivative family at random
/// strictly feasible points. `corrupt_hessian` injects a known fault so the
/// harness itself can be tested.
DerivativeCheckReport check_derivatives(const Scenario& sc, uint64_t seed, int n_points = 20,
                                        bool corrupt_hessian = false);

std::string derivative_report_to_string(const DerivativeCheckReport& rep);

}  // namespace spopf
