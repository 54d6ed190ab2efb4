#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "spopf/case_io.hpp"
#include "spopf/scenario.hpp"

namespace {

std::map<std::string, double> parse_assignments(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--u", "expected name=value pairs separated by commas");
    out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discretized shortest feasible transition paths in AC-OPF control space"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Run the shortest-path pipeline on a scenario");
  std::string solve_case, scenario_path, out_dir = "spopf_out";
  bool trace = false, det_constraint = false, no_flow_limits = false, no_angle_limits = false;
  int threads = 0;
  double eps_tol = -1.0, mu_hi = -1.0, mu_lo = -1.0;
  solve->add_option("--case", solve_case, "Case file (.m MATPOWER subset or .json mirror)");
  solve->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  solve->add_option("--out", out_dir, "Output directory for path.csv / report.json");
  std::string resume_csv;
  solve->add_option("--resume", resume_csv, "Start from a previously emitted path.csv");
  solve->add_option("--threads", threads, "Worker threads (0 = hardware count)");
  solve->add_flag("--trace", trace, "Write per-iteration trace.jsonl");
  solve->add_flag("--enable-det-constraint", det_constraint,
                  "Enable the power-flow feasibility (determinant) constraint");
  solve->add_flag("--no-flow-limits", no_flow_limits, "Drop apparent-power flow limits");
  solve->add_flag("--no-angle-limits", no_angle_limits, "Drop angle difference limits");
  solve->add_option("--eps-tol", eps_tol, "Inner stopping tolerance on E_mu");
  solve->add_option("--mu-hi", mu_hi, "Homotopy-stage barrier parameter");
  solve->add_option("--mu-lo", mu_lo, "Final polish barrier parameter");

  // powerflow
  auto* pf = app.add_subcommand("powerflow", "Solve one power flow for explicit controls");
  std::string pf_case, pf_u;
  pf->add_option("--case", pf_case, "Case file")->required();
  pf->add_option("--u", pf_u, "Assignments, e.g. P:2=1.63,P:3=0.85,V:1=1.0")->required();

  // check-derivatives
  auto* chk = app.add_subcommand("check-derivatives",
                                 "Finite-difference audit of the analytic derivatives");
  std::string chk_case, chk_scenario;
  std::uint64_t seed = 0;
  int chk_points = 20;
  chk->add_option("--case", chk_case, "Case file");
  chk->add_option("--scenario", chk_scenario, "Scenario JSON file")->required();
  chk->add_option("--seed", seed, "Random seed");
  chk->add_option("--points", chk_points, "Number of feasible sample points");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      spopf::Scenario sc = spopf::load_scenario_file(scenario_path);
      if (!solve_case.empty()) sc.case_path = solve_case;
      if (threads != 0) sc.ipm.threads = threads;
      if (det_constraint) sc.toggles.enable_det_constraint = true;
      if (no_flow_limits) sc.toggles.flow_limits = false;
      if (no_angle_limits) sc.toggles.angle_limits = false;
      if (eps_tol > 0) sc.ipm.eps_tol = eps_tol;
      if (mu_hi > 0) sc.homotopy.mu_hi = mu_hi;
      if (mu_lo > 0) sc.homotopy.mu_lo = mu_lo;
      spopf::SolveReport rep = spopf::run_solve(sc, out_dir, trace, resume_csv);
      std::cout << spopf::report_to_json(rep) << '\n';
      return rep.exit_code;
    }
    if (*pf) {
      spopf::PowerflowRun run = spopf::run_powerflow(pf_case, parse_assignments(pf_u));
      std::cout << std::setprecision(17);
      std::cout << "converged: " << (run.result.converged ? "yes" : "no") << '\n';
      std::cout << "iterations: " << run.result.iterations << '\n';
      std::cout << "residual_inf: " << run.result.residual_inf << '\n';
      if (run.result.singular_jacobian) std::cout << "singular_jacobian: yes\n";
      const auto n = static_cast<spopf::Index>(run.bus_ids.size());
      for (spopf::Index i = 0; i < n; ++i) {
        const double e = run.result.x(i), f = run.result.x(n + i);
        std::cout << "bus " << run.bus_ids[static_cast<size_t>(i)] << ": V = " << std::hypot(e, f)
                  << " p.u., angle = " << std::atan2(f, e) << " rad (e = " << e << ", f = " << f
                  << ")\n";
      }
      return run.result.converged ? 0 : 1;
    }
    if (*chk) {
      spopf::Scenario sc = spopf::load_scenario_file(chk_scenario);
      if (!chk_case.empty()) sc.case_path = chk_case;
      const auto rep = spopf::check_derivatives(sc, seed, chk_points);
      std::cout << spopf::derivative_report_to_string(rep);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
