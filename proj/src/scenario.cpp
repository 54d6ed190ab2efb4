#include "spopf/scenario.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spopf/case_io.hpp"

namespace spopf {

namespace {

using nlohmann::json;

double get_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

}  // namespace

Scenario parse_scenario_json(const std::string& text, const std::string& base_dir) {
  json j = json::parse(text);
  Scenario sc;
  if (j.contains("case")) {
    std::filesystem::path p = j.at("case").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    sc.case_path = p.string();
  }
  sc.controls = j.at("controls").get<std::vector<std::string>>();
  sc.u0 = j.at("u0").get<std::map<std::string, double>>();
  sc.u1 = j.at("u1").get<std::map<std::string, double>>();
  if (j.contains("frozen")) sc.frozen = j.at("frozen").get<std::map<std::string, double>>();
  sc.K = j.value("K", 19);
  if (j.contains("spacing") && j.at("spacing").is_array())
    sc.spacing = j.at("spacing").get<std::vector<double>>();
  sc.p_unit = j.value("p_unit", "pu");
  if (sc.p_unit != "pu" && sc.p_unit != "MW")
    throw std::runtime_error("scenario: p_unit must be 'pu' or 'MW'");

  if (j.contains("toggles")) {
    const json& t = j.at("toggles");
    sc.toggles.enable_det_constraint = t.value("det_constraint", false);
    sc.toggles.flow_limits = t.value("flow_limits", true);
    sc.toggles.angle_limits = t.value("angle_limits", true);
  }
  if (j.contains("params")) {
    const json& p = j.at("params");
    sc.ipm.tau = get_or(p, "tau", sc.ipm.tau);
    sc.ipm.gamma = get_or(p, "gamma", sc.ipm.gamma);
    sc.ipm.eta = get_or(p, "eta", sc.ipm.eta);
    sc.ipm.eps_ls = get_or(p, "eps_ls", sc.ipm.eps_ls);
    sc.ipm.rho_max = get_or(p, "rho_max", sc.ipm.rho_max);
    sc.ipm.eps_tol = get_or(p, "eps_tol", sc.ipm.eps_tol);
    sc.ipm.iter_max = static_cast<int>(get_or(p, "iter_max", sc.ipm.iter_max));
    sc.homotopy.beta = get_or(p, "beta", sc.homotopy.beta);
    sc.homotopy.mu_hi = get_or(p, "mu_hi", sc.homotopy.mu_hi);
    sc.homotopy.mu_lo = get_or(p, "mu_lo", sc.homotopy.mu_lo);
    sc.homotopy.eps_st = get_or(p, "eps_st", sc.homotopy.eps_st);
    sc.homotopy.patience = static_cast<int>(get_or(p, "patience", sc.homotopy.patience));
  }
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_json(ss.str(), std::filesystem::path(path).parent_path().string());
}

namespace {

/// Convert a named assignment to internal units (V -> V^2, MW -> p.u.).
double to_internal(const std::string& name, double value, const std::string& p_unit,
                   double base_mva) {
  if (name.rfind("V:", 0) == 0) {
    if (value <= 0.0) throw std::runtime_error("voltage assignment must be positive: " + name);
    return value * value;
  }
  if (p_unit == "MW") return value / base_mva;
  return value;
}

Vector assignment_vector(const std::vector<std::string>& names,
                         const std::map<std::string, double>& values, const std::string& p_unit,
                         double base_mva, const char* what) {
  Vector u(static_cast<Index>(names.size()));
  for (size_t k = 0; k < names.size(); ++k) {
    auto it = values.find(names[k]);
    if (it == values.end())
      throw std::runtime_error(std::string(what) + " is missing control '" + names[k] + "'");
    u(static_cast<Index>(k)) = to_internal(names[k], it->second, p_unit, base_mva);
  }
  return u;
}

}  // namespace

BuiltProblem build_problem(const Scenario& sc) {
  if (sc.case_path.empty()) throw std::runtime_error("scenario has no case file");
  NetworkCase nc = load_case_file(sc.case_path);
  BuiltProblem bp;
  bp.merged_case = merge_generators(nc);
  QuadraticModel full = QuadraticModel::build(bp.merged_case);

  std::map<std::string, double> frozen_internal;
  for (const auto& [name, value] : sc.frozen)
    frozen_internal[name] = to_internal(name, value, sc.p_unit, bp.merged_case.base_mva);
  bp.model = full.configure_controls(sc.controls, frozen_internal);
  bp.control_names = sc.controls;

  // frozen assignments must respect their own box limits
  for (const auto& [name, value] : sc.frozen) {
    const bool is_v = name.rfind("V:", 0) == 0;
    const int bus_id = std::stoi(name.substr(2));
    if (is_v) {
      const Bus& b = bp.merged_case.buses[static_cast<size_t>(bp.merged_case.bus_index(bus_id))];
      if (value < b.vmin - 1e-12 || value > b.vmax + 1e-12)
        throw std::runtime_error("frozen voltage at bus " + std::to_string(bus_id) +
                                 " violates its limits");
    } else {
      for (const auto& g : bp.merged_case.generators)
        if (g.bus == bus_id) {
          const double pu = sc.p_unit == "MW" ? value / bp.merged_case.base_mva : value;
          if (pu < g.pmin - 1e-12 || pu > g.pmax + 1e-12)
            throw std::runtime_error("frozen active power at bus " + std::to_string(bus_id) +
                                     " violates its limits");
        }
    }
  }

  bp.set = ConstraintSet::build(bp.merged_case, bp.model, sc.toggles);

  const Vector u0 =
      assignment_vector(sc.controls, sc.u0, sc.p_unit, bp.merged_case.base_mva, "u0");
  const Vector u1 =
      assignment_vector(sc.controls, sc.u1, sc.p_unit, bp.merged_case.base_mva, "u1");
  if ((u1 - u0).lpNorm<Eigen::Infinity>() == 0.0)
    throw std::runtime_error("scenario endpoints must differ");

  Vector t;
  if (sc.spacing.empty()) {
    t = uniform_spacing(sc.K);
  } else {
    if (static_cast<Index>(sc.spacing.size()) != sc.K)
      throw std::runtime_error("explicit spacing must list K interior parameters");
    t.resize(sc.K + 2);
    t(0) = 0.0;
    for (Index k = 0; k < sc.K; ++k) {
      const double tk = sc.spacing[static_cast<size_t>(k)];
      if (!(tk > 0.0 && tk < 1.0)) throw std::runtime_error("spacing values must lie in (0,1)");
      t(k + 1) = tk;
    }
    t(sc.K + 1) = 1.0;
  }
  bp.line = init_line_path(u0, u1, t);
  return bp;
}

namespace {

std::vector<std::string> csv_headers(const std::vector<std::string>& controls) {
  std::vector<std::string> out;
  out.reserve(controls.size());
  for (const auto& name : controls)
    out.push_back(name.rfind("V:", 0) == 0 ? "Vsq:" + name.substr(2) : name);
  return out;
}

json iteration_to_json(const IterationRecord& it) {
  return json{{"iter", it.iter},          {"E_mu", it.e_mu},   {"merit", it.merit},
              {"M", it.backoff},          {"alpha_z", it.alpha_z},
              {"corrected", it.corrected}};
}

}  // namespace

std::string report_to_json(const SolveReport& rep) {
  json j;
  j["status"] = to_string(rep.status);
  j["exit_code"] = rep.exit_code;
  j["case"] = rep.case_name;
  j["K"] = rep.K;
  j["controls"] = rep.controls;
  j["warnings"] = rep.warnings;
  j["max_violation_before"] = rep.max_violation_before;
  j["max_violation_after"] = rep.max_violation_after;
  j["v_inf"] = rep.v_inf;
  if (rep.path_diff_pct)
    j["path_diff_pct"] = *rep.path_diff_pct;
  else
    j["path_diff_pct"] = nullptr;
  if (rep.obj_fun_gap_pct)
    j["obj_fun_gap_pct"] = *rep.obj_fun_gap_pct;
  else
    j["obj_fun_gap_pct"] = nullptr;
  j["wall_time_s"] = rep.wall_time_s;
  j["stages"] = json::array();
  for (const auto& st : rep.stages)
    j["stages"].push_back(json{{"v_inf", st.v_inf},
                               {"mu", st.mu},
                               {"inner_iterations", st.inner_iterations},
                               {"E_mu_exit", st.e_mu_exit},
                               {"inner_status", to_string(st.inner_status)}});
  return j.dump(2);
}

SolveReport run_solve(const Scenario& sc, const std::string& out_dir, bool trace,
                      const std::string& resume_csv) {
  const auto t_start = std::chrono::steady_clock::now();
  BuiltProblem bp = build_problem(sc);
  if (!resume_csv.empty()) {
    std::ifstream in(resume_csv);
    if (!in) throw std::runtime_error("cannot open resume path '" + resume_csv + "'");
    PathDiscretization saved = read_path_csv(in);
    if (saved.dim() != bp.line.dim() || saved.K() != bp.line.K() ||
        (saved.u0() - bp.line.u0()).lpNorm<Eigen::Infinity>() > 1e-9 ||
        (saved.u1() - bp.line.u1()).lpNorm<Eigen::Infinity>() > 1e-9)
      throw std::runtime_error("resume path does not match the scenario endpoints");
    bp.line = std::move(saved);
  }
  OpfPathProblem problem(bp.model, bp.set);
  ShortestPathResult result = shortest_path(problem, bp.line, sc.homotopy, sc.ipm);

  SolveReport rep;
  rep.status = result.status;
  rep.exit_code = result.status == SolveStatus::Success
                      ? 0
                      : (result.status == SolveStatus::StagnationFailure ? 2 : 1);
  rep.max_violation_before = result.max_violation_before;
  rep.max_violation_after = result.max_violation_after;
  rep.v_inf = result.v_inf;
  rep.stages = result.stages;
  rep.case_name = bp.merged_case.name.empty() ? sc.case_path : bp.merged_case.name;
  rep.K = sc.K;
  rep.controls = sc.controls;
  rep.warnings = bp.merged_case.warnings;
  rep.path = result.path;
  if (result.status == SolveStatus::Success) {
    const PathMetrics pm = path_metrics(result.path);
    rep.path_diff_pct = pm.path_diff_pct;
    rep.obj_fun_gap_pct = pm.obj_fun_gap_pct;
  }
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      std::ofstream csv(std::filesystem::path(out_dir) / "path.csv");
      write_path_csv(csv, rep.path, csv_headers(sc.controls));
    }
    {
      std::ofstream rj(std::filesystem::path(out_dir) / "report.json");
      rj << report_to_json(rep) << '\n';
    }
    if (trace) {
      std::ofstream tj(std::filesystem::path(out_dir) / "trace.jsonl");
      for (size_t si = 0; si < rep.stages.size(); ++si)
        for (const auto& it : rep.stages[si].trace) {
          json row = iteration_to_json(it);
          row["stage"] = si;
          tj << row.dump() << '\n';
        }
    }
  }
  return rep;
}

PowerflowRun run_powerflow(const std::string& case_path,
                           const std::map<std::string, double>& assignments,
                           const std::string& p_unit) {
  NetworkCase nc = merge_generators(load_case_file(case_path));
  QuadraticModel model = QuadraticModel::build(nc);
  PowerflowRun run;
  run.u.resize(model.control_dim());
  for (Index j = 0; j < model.control_dim(); ++j) {
    const ControlSlot& slot = model.controls()[static_cast<size_t>(j)];
    const std::string name = slot.name();
    run.control_names.push_back(name);
    auto it = assignments.find(name);
    double value = 0.0;
    if (it != assignments.end()) {
      value = to_internal(name, it->second, p_unit, nc.base_mva);
    } else if (slot.kind == ControlSlot::Kind::VoltageSquared) {
      for (const auto& g : nc.generators)
        if (g.bus == slot.bus_id) value = g.vset * g.vset;
    } else {
      throw std::runtime_error("powerflow: missing assignment for control '" + name + "'");
    }
    run.u(j) = value;
  }
  for (const auto& b : nc.buses) run.bus_ids.push_back(b.id);
  run.result = solve_power_flow(model, run.u, model.flat_start());
  return run;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double rel_err(double a, double fd) { return std::abs(a - fd) / std::max(1.0, std::abs(fd)); }

}  // namespace

DerivativeCheckReport check_derivatives(const Scenario& sc, uint64_t seed, int n_points,
                                        bool corrupt_hessian) {
  DerivativeCheckReport rep;
  BuiltProblem bp = build_problem(sc);
  const Index m = bp.model.control_dim(), nI = bp.set.size();

  PowerFlowOptions tight{1e-12, 40};
  ConstraintEvaluator eval(bp.model, bp.set, tight);

  // solve the base point for branch-consistent warm starts
  PowerFlowResult base = solve_power_flow(bp.model, bp.line.u0(), bp.model.flat_start(), tight);
  if (!base.converged) throw std::runtime_error("check_derivatives: endpoint power flow failed");

  Vector lo = bp.line.u0().cwiseMin(bp.line.u1());
  Vector hi = bp.line.u0().cwiseMax(bp.line.u1());
  const Vector range = (hi - lo).cwiseMax(1e-3);
  lo -= 0.1 * range;
  hi += 0.1 * range;

  std::mt19937_64 rng(seed);
  auto phi = [&](const Vector& u, const Vector& warm) -> std::optional<Vector> {
    PowerFlowResult r = solve_power_flow(bp.model, u, warm, tight);
    if (!r.converged) return std::nullopt;
    return r.x;
  };

  const double h1 = 1e-6;  // first-derivative step
  const double h2 = 1e-4;  // second-derivative step
  int found = 0, attempts = 0;
  while (found < n_points && attempts < 500 * n_points) {
    ++attempts;
    Vector u(m);
    for (Index k = 0; k < m; ++k) u(k) = lo(k) + (hi(k) - lo(k)) * uniform01(rng);
    auto vals = eval.eval_values(u, base.x);
    if (!vals || (vals->first.array() >= -1e-4).any()) continue;
    auto bundle = eval.eval_bundle(u, base.x);
    if (!bundle) continue;
    ++found;
    const Vector xw = bundle->x;

    // dx/du vs central differences of the power-flow map
    for (Index j = 0; j < m; ++j) {
      Vector up = u, um = u;
      up(j) += h1;
      um(j) -= h1;
      auto xp = phi(up, xw), xm = phi(um, xw);
      if (!xp || !xm) continue;
      const Vector fd = (*xp - *xm) / (2.0 * h1);
      for (Index r = 0; r < fd.size(); ++r)
        rep.max_err_state_sensitivity =
            std::max(rep.max_err_state_sensitivity, rel_err(bundle->dx_du(r, j), fd(r)));
    }

    // d2x/du_a du_b vs second-order central differences
    for (Index a = 0; a < m; ++a) {
      const Matrix d2x = eval.state_sensitivity_second(*bundle, a);
      for (Index b2 = 0; b2 < m; ++b2) {
        Vector fd;
        if (a == b2) {
          Vector up = u, um = u;
          up(a) += h2;
          um(a) -= h2;
          auto xp = phi(up, xw), xm = phi(um, xw);
          if (!xp || !xm) continue;
          fd = (*xp - 2.0 * xw + *xm) / (h2 * h2);
        } else {
          Vector upp = u, upm = u, ump = u, umm = u;
          upp(a) += h2; upp(b2) += h2;
          upm(a) += h2; upm(b2) -= h2;
          ump(a) -= h2; ump(b2) += h2;
          umm(a) -= h2; umm(b2) -= h2;
          auto xpp = phi(upp, xw), xpm = phi(upm, xw), xmp = phi(ump, xw), xmm = phi(umm, xw);
          if (!xpp || !xpm || !xmp || !xmm) continue;
          fd = (*xpp - *xpm - *xmp + *xmm) / (4.0 * h2 * h2);
        }
        for (Index r = 0; r < fd.size(); ++r)
          rep.max_err_state_second =
              std::max(rep.max_err_state_second, rel_err(d2x(r, b2), fd(r)));
      }
    }

    // constraint gradients vs central differences of the values
    for (Index j = 0; j < m; ++j) {
      Vector up = u, um = u;
      up(j) += h1;
      um(j) -= h1;
      auto gp = eval.eval_values(up, xw), gm = eval.eval_values(um, xw);
      if (!gp || !gm) continue;
      const Vector fd = (gp->first - gm->first) / (2.0 * h1);
      for (Index r = 0; r < nI; ++r)
        rep.max_err_constraint_gradients =
            std::max(rep.max_err_constraint_gradients, rel_err(bundle->dg_du(r, j), fd(r)));
    }

    // z-weighted constraint Hessian vs differences of the analytic gradient
    Vector z(nI);
    for (Index r = 0; r < nI; ++r) z(r) = 0.1 + uniform01(rng);
    Matrix lag = eval.lagrangian_hessian(*bundle, z);
    if (corrupt_hessian) lag(0, 0) += 1.0;
    for (Index j = 0; j < m; ++j) {
      Vector up = u, um = u;
      up(j) += h2;
      um(j) -= h2;
      auto bp1 = eval.eval_bundle(up, xw), bm1 = eval.eval_bundle(um, xw);
      if (!bp1 || !bm1) continue;
      const Vector fd = ((bp1->dg_du.transpose() * z) - (bm1->dg_du.transpose() * z)) / (2.0 * h2);
      for (Index r = 0; r < m; ++r)
        rep.max_err_constraint_hessians =
            std::max(rep.max_err_constraint_hessians, rel_err(lag(r, j), fd(r)));
    }
  }
  rep.points_tested = found;

  // path-level derivative families (pure algebra, independent of the grid)
  {
    const Index K = 5;
    Vector u0(m), u1v(m);
    for (Index k = 0; k < m; ++k) {
      u0(k) = uniform01(rng);
      u1v(k) = u0(k) + 0.5 + uniform01(rng);
    }
    PathDiscretization disc = init_line_path(u0, u1v, uniform_spacing(K));
    Vector p = disc.interior();
    for (Index k = 0; k < p.size(); ++k) p(k) += 0.1 * (uniform01(rng) - 0.5);
    disc.set_interior(p);
    const double h = 1e-7;
    const Vector grad = path_objective_gradient(disc);
    const Matrix De = equality_jacobian_dense(disc);
    for (Index k = 0; k < p.size(); ++k) {
      Vector pp = p, pm = p;
      pp(k) += h;
      pm(k) -= h;
      PathDiscretization dp = disc, dm = disc;
      dp.set_interior(pp);
      dm.set_interior(pm);
      rep.max_err_path_gradient = std::max(
          rep.max_err_path_gradient,
          rel_err(grad(k), (path_objective(dp) - path_objective(dm)) / (2.0 * h)));
      const Vector cfd = (equality_constraints(dp) - equality_constraints(dm)) / (2.0 * h);
      for (Index r = 0; r < K; ++r)
        rep.max_err_equality_jacobian =
            std::max(rep.max_err_equality_jacobian, rel_err(De(r, k), cfd(r)));
    }
  }
  return rep;
}

std::string derivative_report_to_string(const DerivativeCheckReport& rep) {
  std::ostringstream os;
  os << "derivative check over " << rep.points_tested << " feasible points\n";
  os << "  max rel. error dx/du            : " << rep.max_err_state_sensitivity << '\n';
  os << "  max rel. error d2x/du2          : " << rep.max_err_state_second << '\n';
  os << "  max rel. error dg/du            : " << rep.max_err_constraint_gradients << '\n';
  os << "  max rel. error hessian blocks   : " << rep.max_err_constraint_hessians << '\n';
  os << "  max rel. error path gradient    : " << rep.max_err_path_gradient << '\n';
  os << "  max rel. error equality jacobian: " << rep.max_err_equality_jacobian << '\n';
  return os.str();
}

}  // namespace spopf
