#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "spopf/case_io.hpp"
#include "spopf/metrics.hpp"
#include "spopf/scenario.hpp"

namespace py = pybind11;
using namespace spopf;

namespace {

py::dict case_summary(const NetworkCase& nc) {
  py::dict d;
  d["name"] = nc.name;
  d["base_mva"] = nc.base_mva;
  d["n_bus"] = nc.buses.size();
  d["n_gen"] = nc.generators.size();
  d["n_branch"] = nc.branches.size();
  d["warnings"] = nc.warnings;
  return d;
}

py::dict report_dict(const SolveReport& rep) {
  py::dict d;
  d["status"] = std::string(to_string(rep.status));
  d["exit_code"] = rep.exit_code;
  d["max_violation_before"] = rep.max_violation_before;
  d["max_violation_after"] = rep.max_violation_after;
  d["v_inf"] = rep.v_inf;
  if (rep.path_diff_pct) d["path_diff_pct"] = *rep.path_diff_pct;
  if (rep.obj_fun_gap_pct) d["obj_fun_gap_pct"] = *rep.obj_fun_gap_pct;
  d["wall_time_s"] = rep.wall_time_s;
  d["stages"] = rep.stages.size();
  d["report_json"] = report_to_json(rep);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Discretized shortest feasible transition paths in AC-OPF control space";

  m.def(
      "load_case",
      [](const std::string& path) { return case_summary(load_case_file(path)); },
      py::arg("path"), "Parse a case file (.m MATPOWER subset or .json mirror) and summarize it.");

  m.def(
      "case_to_json",
      [](const std::string& path) { return case_to_json(load_case_file(path)); },
      py::arg("path"), "Normalized per-unit JSON mirror of a case file.");

  m.def(
      "merge_case_generators",
      [](const std::string& path) { return case_summary(merge_generators(load_case_file(path))); },
      py::arg("path"), "Summary after collapsing co-located generators.");

  m.def(
      "powerflow",
      [](const std::string& case_path, const std::map<std::string, double>& assignments,
         const std::string& p_unit) {
        PowerflowRun run = run_powerflow(case_path, assignments, p_unit);
        py::dict d;
        d["converged"] = run.result.converged;
        d["iterations"] = run.result.iterations;
        d["residual_inf"] = run.result.residual_inf;
        const auto n = static_cast<Index>(run.bus_ids.size());
        py::list vm, va;
        for (Index i = 0; i < n; ++i) {
          vm.append(std::hypot(run.result.x(i), run.result.x(n + i)));
          va.append(std::atan2(run.result.x(n + i), run.result.x(i)));
        }
        d["bus_ids"] = run.bus_ids;
        d["vm"] = vm;
        d["va"] = va;
        return d;
      },
      py::arg("case_path"), py::arg("assignments"), py::arg("p_unit") = "pu",
      "Solve one power flow for named control assignments (P:<bus>, V:<bus>).");

  m.def(
      "solve",
      [](const std::string& scenario_path, const std::string& out_dir, bool trace, int threads) {
        Scenario sc = load_scenario_file(scenario_path);
        if (threads > 0) sc.ipm.threads = threads;
        return report_dict(run_solve(sc, out_dir, trace));
      },
      py::arg("scenario_path"), py::arg("out_dir") = "", py::arg("trace") = false,
      py::arg("threads") = 0, "Run the homotopy + interior-point pipeline on a scenario file.");

  m.def(
      "check_derivatives",
      [](const std::string& scenario_path, std::uint64_t seed, int points) {
        Scenario sc = load_scenario_file(scenario_path);
        const DerivativeCheckReport rep = check_derivatives(sc, seed, points);
        py::dict d;
        d["points_tested"] = rep.points_tested;
        d["state_sensitivity"] = rep.max_err_state_sensitivity;
        d["state_second"] = rep.max_err_state_second;
        d["constraint_gradients"] = rep.max_err_constraint_gradients;
        d["constraint_hessians"] = rep.max_err_constraint_hessians;
        d["path_gradient"] = rep.max_err_path_gradient;
        d["equality_jacobian"] = rep.max_err_equality_jacobian;
        return d;
      },
      py::arg("scenario_path"), py::arg("seed") = 0, py::arg("points") = 20,
      "Finite-difference audit of the analytic derivatives; returns max relative errors.");

  m.def(
      "path_metrics_csv",
      [](const std::string& csv_path) {
        std::ifstream in(csv_path);
        if (!in) throw std::runtime_error("cannot open '" + csv_path + "'");
        const PathDiscretization disc = read_path_csv(in);
        const PathMetrics pm = path_metrics(disc);
        return py::make_tuple(pm.path_diff_pct, pm.obj_fun_gap_pct);
      },
      py::arg("csv_path"),
      "Path-difference and length-gap percentages of an emitted path CSV.");

  m.attr("__version__") = "0.1.0";
}
