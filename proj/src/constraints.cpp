#include "spopf/constraints.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spopf {

namespace {

// Non-finite bounds keep their constraint rows with a huge surrogate bound
// so the row count does not depend on which limits a case provides.
constexpr double kVacuousBound = 1e30;

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

SpMat scaled(const SpMat& A, double s) {
  SpMat out = A;
  out *= s;
  return out;
}

SpMat voltage_sq_form(Index n, Index bus, double scale) {
  SpMat A(2 * n, 2 * n);
  A.insert(bus, bus) = scale;
  A.insert(n + bus, n + bus) = scale;
  A.makeCompressed();
  return A;
}

}  // namespace

ConstraintSet ConstraintSet::build(const NetworkCase& nc, const QuadraticModel& model,
                                   const ConstraintOptions& opts) {
  ConstraintSet set;
  const Index n = model.n_buses();

  auto gen_at = [&](int bus_id) -> const Generator* {
    for (const auto& g : nc.generators)
      if (g.bus == bus_id) return &g;
    return nullptr;
  };

  // Control box constraints.
  for (Index j = 0; j < model.control_dim(); ++j) {
    const ControlSlot& slot = model.controls()[static_cast<size_t>(j)];
    double lo, hi;
    if (slot.kind == ControlSlot::Kind::ActivePower) {
      const Generator* g = gen_at(slot.bus_id);
      if (!g) throw CaseError("control references missing generator");
      lo = finite_or(g->pmin, -kVacuousBound);
      hi = finite_or(g->pmax, kVacuousBound);
    } else {
      const Bus& b = nc.buses[static_cast<size_t>(nc.bus_index(slot.bus_id))];
      lo = std::isfinite(b.vmin) ? b.vmin * b.vmin : -kVacuousBound;
      hi = std::isfinite(b.vmax) ? std::min(b.vmax * b.vmax, kVacuousBound) : kVacuousBound;
    }
    ConstraintSpec clo;
    clo.domain = ConstraintDomain::Control;
    clo.kind = ConstraintKind::ControlLower;
    clo.label = "u_lo:" + slot.name();
    clo.slot = j;
    clo.sign = -1.0;
    clo.bound = -lo;  // g = lo - u
    set.specs_.push_back(clo);
    ConstraintSpec chi = clo;
    chi.kind = ConstraintKind::ControlUpper;
    chi.label = "u_hi:" + slot.name();
    chi.sign = 1.0;
    chi.bound = hi;  // g = u - hi
    set.specs_.push_back(chi);
  }

  const auto Y = admittance_matrix(nc);
  std::vector<std::vector<ComplexCoeff>> rows(static_cast<size_t>(n));
  for (Index col = 0; col < n; ++col)
    for (Eigen::SparseMatrix<std::complex<double>>::InnerIterator it(Y, col); it; ++it)
      rows[static_cast<size_t>(it.row())].push_back({col, it.value()});

  // Voltage magnitude limits at buses without a generator (generator bus
  // voltages are controls or frozen constants).
  for (Index i = 0; i < n; ++i) {
    const Bus& bus = nc.buses[static_cast<size_t>(i)];
    if (nc.has_generator_at(bus.id)) continue;
    ConstraintSpec lo;
    lo.domain = ConstraintDomain::State;
    lo.kind = ConstraintKind::VoltageLower;
    lo.label = "V_lo:" + std::to_string(bus.id);
    lo.qf.A = voltage_sq_form(n, i, -1.0);
    lo.qf.c = std::isfinite(bus.vmin) ? bus.vmin * bus.vmin : -kVacuousBound;
    set.specs_.push_back(lo);
    ConstraintSpec hi;
    hi.domain = ConstraintDomain::State;
    hi.kind = ConstraintKind::VoltageUpper;
    hi.label = "V_hi:" + std::to_string(bus.id);
    hi.qf.A = voltage_sq_form(n, i, 1.0);
    hi.qf.c = std::isfinite(bus.vmax) ? -std::min(bus.vmax * bus.vmax, kVacuousBound)
                                      : -kVacuousBound;
    set.specs_.push_back(hi);
  }

  // Slack active power is a dependent quantity: Pg = P_slack(x) + Pd.
  {
    const Index s = model.slack_bus();
    const Bus& sb = nc.buses[static_cast<size_t>(s)];
    const Generator* g = gen_at(sb.id);
    if (!g) throw CaseError("slack bus has no generator");
    const SpMat P = power_quadratic_form(n, s, rows[static_cast<size_t>(s)], false);
    ConstraintSpec lo;
    lo.domain = ConstraintDomain::State;
    lo.kind = ConstraintKind::ActivePowerLower;
    lo.label = "Pg_lo:" + std::to_string(sb.id);
    lo.qf.A = scaled(P, -1.0);
    lo.qf.c = finite_or(g->pmin, -kVacuousBound) - sb.pd;
    set.specs_.push_back(lo);
    ConstraintSpec hi;
    hi.domain = ConstraintDomain::State;
    hi.kind = ConstraintKind::ActivePowerUpper;
    hi.label = "Pg_hi:" + std::to_string(sb.id);
    hi.qf.A = P;
    hi.qf.c = sb.pd - finite_or(g->pmax, kVacuousBound);
    set.specs_.push_back(hi);
  }

  // Reactive power limits at every generator bus: Qg = Q_i(x) + Qd.
  for (Index i = 0; i < n; ++i) {
    const Bus& bus = nc.buses[static_cast<size_t>(i)];
    const Generator* g = gen_at(bus.id);
    if (!g) continue;
    const SpMat Q = power_quadratic_form(n, i, rows[static_cast<size_t>(i)], true);
    ConstraintSpec lo;
    lo.domain = ConstraintDomain::State;
    lo.kind = ConstraintKind::ReactivePowerLower;
    lo.label = "Qg_lo:" + std::to_string(bus.id);
    lo.qf.A = scaled(Q, -1.0);
    lo.qf.c = finite_or(g->qmin, -kVacuousBound) - bus.qd;
    set.specs_.push_back(lo);
    ConstraintSpec hi;
    hi.domain = ConstraintDomain::State;
    hi.kind = ConstraintKind::ReactivePowerUpper;
    hi.label = "Qg_hi:" + std::to_string(bus.id);
    hi.qf.A = Q;
    hi.qf.c = bus.qd - finite_or(g->qmax, kVacuousBound);
    set.specs_.push_back(hi);
  }

  // Apparent power flow limits, squared form at both branch ends.
  if (opts.flow_limits) {
    const auto ends = branch_admittances(nc);
    for (size_t b = 0; b < nc.branches.size(); ++b) {
      const Branch& br = nc.branches[b];
      if (!(br.flow_limit > 0.0)) continue;
      const Index fi = nc.bus_index(br.from), ti = nc.bus_index(br.to);
      const double lim2 = std::min(br.flow_limit * br.flow_limit, kVacuousBound);
      for (int end = 0; end < 2; ++end) {
        const Index at = end == 0 ? fi : ti;
        const std::vector<ComplexCoeff> coeffs =
            end == 0 ? std::vector<ComplexCoeff>{{fi, ends[b].yff}, {ti, ends[b].yft}}
                     : std::vector<ComplexCoeff>{{ti, ends[b].ytt}, {fi, ends[b].ytf}};
        ConstraintSpec fs;
        fs.domain = ConstraintDomain::State;
        fs.kind = ConstraintKind::ApparentFlow;
        fs.label = std::string(end == 0 ? "flow_from:" : "flow_to:") + std::to_string(br.from) +
                   "-" + std::to_string(br.to);
        fs.quartic = true;
        fs.fp.A = power_quadratic_form(n, at, coeffs, false);
        fs.fq.A = power_quadratic_form(n, at, coeffs, true);
        fs.bound = lim2;
        set.specs_.push_back(fs);
      }
    }
  }

  // Angle difference limits as quadratic inequalities, valid for limits in
  // (-pi/2, pi/2): Im(Vf conj(Vt)) <=> tan(lim) * Re(Vf conj(Vt)).
  if (opts.angle_limits) {
    for (const Branch& br : nc.branches) {
      if (!br.has_angle_limit) continue;
      const Index fi = nc.bus_index(br.from), ti = nc.bus_index(br.to);
      // a = e_f e_t + f_f f_t, b = f_f e_t - e_f f_t as symmetric forms
      auto cross_form = [&](bool imag) {
        std::vector<Eigen::Triplet<double>> trips;
        if (!imag) {
          trips.emplace_back(fi, ti, 0.5);
          trips.emplace_back(ti, fi, 0.5);
          trips.emplace_back(n + fi, n + ti, 0.5);
          trips.emplace_back(n + ti, n + fi, 0.5);
        } else {
          trips.emplace_back(n + fi, ti, 0.5);
          trips.emplace_back(ti, n + fi, 0.5);
          trips.emplace_back(fi, n + ti, -0.5);
          trips.emplace_back(n + ti, fi, -0.5);
        }
        SpMat A(2 * n, 2 * n);
        A.setFromTriplets(trips.begin(), trips.end());
        return A;
      };
      const SpMat a = cross_form(false), b = cross_form(true);
      ConstraintSpec hi;
      hi.domain = ConstraintDomain::State;
      hi.kind = ConstraintKind::AngleDifference;
      hi.label = "ang_hi:" + std::to_string(br.from) + "-" + std::to_string(br.to);
      hi.qf.A = SpMat(b - SpMat(scaled(a, std::tan(br.angle_max))));
      set.specs_.push_back(hi);
      ConstraintSpec lo = hi;
      lo.label = "ang_lo:" + std::to_string(br.from) + "-" + std::to_string(br.to);
      lo.qf.A = SpMat(SpMat(scaled(a, std::tan(br.angle_min))) - b);
      set.specs_.push_back(lo);
    }
  }

  if (opts.enable_det_constraint) {
    ConstraintSpec det;
    det.domain = ConstraintDomain::PowerFlowFeasibility;
    det.kind = ConstraintKind::Determinant;
    det.label = "det";
    set.det_index_ = static_cast<Index>(set.specs_.size());
    set.specs_.push_back(det);
  }
  return set;
}

ConstraintEvaluator::ConstraintEvaluator(const QuadraticModel& model, const ConstraintSet& set,
                                         PowerFlowOptions pf_opts)
    : model_(&model), set_(&set), pf_opts_(pf_opts) {}

namespace {

double spec_value(const ConstraintSpec& s, const Vector& u, const Vector& x, double neg_abs_det_val) {
  switch (s.domain) {
    case ConstraintDomain::Control:
      return s.sign * u(s.slot) - s.bound;
    case ConstraintDomain::State:
      if (s.quartic) {
        const double p = s.fp.value(x), q = s.fq.value(x);
        return p * p + q * q - s.bound;
      }
      return s.qf.value(x);
    case ConstraintDomain::PowerFlowFeasibility:
      return neg_abs_det_val;
  }
  return 0.0;
}

}  // namespace

std::optional<std::pair<Vector, Vector>> ConstraintEvaluator::eval_values(
    const Vector& u, const Vector& x_warm) const {
  PowerFlowResult pf = solve_power_flow(*model_, u, x_warm, pf_opts_);
  if (!pf.converged) return std::nullopt;
  double nad = 0.0;
  if (set_->det_index() >= 0) nad = neg_abs_det(det_sign_logabs(model_->jacobian(pf.x)));
  Vector g(set_->size());
  for (Index j = 0; j < set_->size(); ++j) g(j) = spec_value(set_->spec(j), u, pf.x, nad);
  return std::make_pair(std::move(g), std::move(pf.x));
}

Matrix ConstraintEvaluator::state_sensitivity(const Eigen::PartialPivLU<Matrix>& lu_J) const {
  const Index m = model_->control_dim();
  Matrix E = Matrix::Zero(model_->num_equations(), m);
  for (Index j = 0; j < m; ++j) E(model_->controls()[static_cast<size_t>(j)].equation, j) = 1.0;
  return lu_J.solve(E);
}

std::optional<DerivativeBundle> ConstraintEvaluator::eval_bundle(const Vector& u,
                                                                 const Vector& x_warm) const {
  PowerFlowResult pf = solve_power_flow(*model_, u, x_warm, pf_opts_);
  if (!pf.converged) return std::nullopt;
  DerivativeBundle b;
  b.x = std::move(pf.x);
  const Matrix J = model_->jacobian(b.x);
  b.lu_J.compute(J);
  b.det = det_sign_logabs(J);
  if (b.det.sign == 0) return std::nullopt;
  b.dx_du = state_sensitivity(b.lu_J);

  const Index nI = set_->size(), m = model_->control_dim(), nx = model_->state_dim();
  b.g.resize(nI);
  b.dg_du = Matrix::Zero(nI, m);
  b.dg_dx = Matrix::Zero(nI, nx);
  const double nad = neg_abs_det(b.det);
  for (Index j = 0; j < nI; ++j) {
    const ConstraintSpec& s = set_->spec(j);
    b.g(j) = spec_value(s, u, b.x, nad);
    switch (s.domain) {
      case ConstraintDomain::Control:
        b.dg_du(j, s.slot) = s.sign;
        break;
      case ConstraintDomain::State: {
        Vector gx;
        if (s.quartic) {
          const double p = s.fp.value(b.x), q = s.fq.value(b.x);
          gx = 2.0 * p * s.fp.gradient(b.x) + 2.0 * q * s.fq.gradient(b.x);
        } else {
          gx = s.qf.gradient(b.x);
        }
        b.dg_dx.row(j) = gx.transpose();
        b.dg_du.row(j) = gx.transpose() * b.dx_du;
        break;
      }
      case ConstraintDomain::PowerFlowFeasibility: {
        const Vector t = det_trace_vector(b);
        const Vector gx = nad * t;  // d(-|det J|)/dx = -|det J| tr(J^{-1} J_k)
        b.dg_dx.row(j) = gx.transpose();
        b.dg_du.row(j) = gx.transpose() * b.dx_du;
        break;
      }
    }
  }
  return b;
}

Vector ConstraintEvaluator::det_trace_vector(const DerivativeBundle& b) const {
  // t_k = tr(J^{-1} J_k) = sum_q (H_q W e_q)_k with W = J^{-1}.
  const Index nx = model_->state_dim();
  const Matrix W = b.lu_J.solve(Matrix::Identity(nx, nx));
  Vector t = Vector::Zero(nx);
  for (Index q = 0; q < nx; ++q) {
    const SpMat& Hq = model_->H(q);
    if (Hq.nonZeros() > 0) t += Hq * W.col(q);
  }
  return t;
}

Matrix ConstraintEvaluator::state_sensitivity_second(const DerivativeBundle& b, Index m) const {
  const Vector vm = b.dx_du.col(m);
  return -b.lu_J.solve(model_->jacobian_linear_part(vm) * b.dx_du);
}

Matrix ConstraintEvaluator::state_hessian_x(const DerivativeBundle& b, Index j) const {
  const ConstraintSpec& s = set_->spec(j);
  const Index nx = model_->state_dim();
  switch (s.domain) {
    case ConstraintDomain::Control:
      return Matrix::Zero(nx, nx);
    case ConstraintDomain::State: {
      if (!s.quartic) return 2.0 * Matrix(s.qf.A);
      const double p = s.fp.value(b.x), q = s.fq.value(b.x);
      const Vector gp = s.fp.gradient(b.x), gq = s.fq.gradient(b.x);
      return 2.0 * gp * gp.transpose() + 2.0 * p * 2.0 * Matrix(s.fp.A) +
             2.0 * gq * gq.transpose() + 2.0 * q * 2.0 * Matrix(s.fq.A);
    }
    case ConstraintDomain::PowerFlowFeasibility: {
      // d^2 g/(dx_m dx_k) = (dg/dx_m) tr(J^{-1} J_k) + |det J| tr(J^{-1} J_m J^{-1} J_k)
      // Intended for small systems; the pairwise traces cost O(n^4).
      const Vector t = det_trace_vector(b);
      const double adet = -neg_abs_det(b.det);
      const Matrix W = b.lu_J.solve(Matrix::Identity(nx, nx));
      std::vector<Matrix> WJ(static_cast<size_t>(nx));
      for (Index k = 0; k < nx; ++k) {
        // row q of J_k is row k of H_q
        Matrix Jk = Matrix::Zero(nx, nx);
        for (Index q = 0; q < nx; ++q) {
          const SpMat& Hq = model_->H(q);
          if (Hq.nonZeros() == 0) continue;
          for (SpMat::InnerIterator it(Hq, k); it; ++it) Jk(q, it.row()) = it.value();
        }
        WJ[static_cast<size_t>(k)] = W * Jk;
      }
      Matrix T2(nx, nx);
      for (Index mm = 0; mm < nx; ++mm)
        for (Index k = mm; k < nx; ++k) {
          const double tr = (WJ[static_cast<size_t>(mm)].array() *
                             WJ[static_cast<size_t>(k)].transpose().array())
                                .sum();
          T2(mm, k) = tr;
          T2(k, mm) = tr;
        }
      const Vector gx = -adet * t;  // dg/dx
      Matrix H = gx * t.transpose() + adet * T2;
      return 0.5 * (H + H.transpose());
    }
  }
  return Matrix::Zero(nx, nx);
}

Matrix ConstraintEvaluator::lagrangian_hessian(const DerivativeBundle& b, const Vector& z) const {
  const Index nx = model_->state_dim(), m = model_->control_dim();
  // Control-constraint rows are affine in u, so they contribute nothing.
  Vector vrow = Vector::Zero(nx);  // d(z^T g_{X u P})/dx
  Matrix Hx = Matrix::Zero(nx, nx);
  bool any_state = false;
  for (Index j = 0; j < set_->size(); ++j) {
    const ConstraintSpec& s = set_->spec(j);
    if (s.domain == ConstraintDomain::Control || z(j) == 0.0) continue;
    any_state = true;
    vrow += z(j) * b.dg_dx.row(j).transpose();
    Hx += z(j) * state_hessian_x(b, j);
  }
  if (!any_state) return Matrix::Zero(m, m);
  // theta_1 = v^T J^{-1}; stacked theta_2 rows equal sum_q (theta_1)_q H_q.
  const Vector theta1 = b.lu_J.transpose().solve(vrow);
  const Matrix theta2 = model_->weighted_hessian_sum(theta1);
  const Matrix Theta3 = Hx - theta2;
  Matrix L = b.dx_du.transpose() * Theta3 * b.dx_du;
  return 0.5 * (L + L.transpose());
}

Matrix ConstraintEvaluator::constraint_hessian(const DerivativeBundle& b, Index j) const {
  Vector z = Vector::Zero(set_->size());
  z(j) = 1.0;
  return lagrangian_hessian(b, z);
}

}  // namespace spopf
