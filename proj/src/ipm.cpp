#include "spopf/ipm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace spopf {

const char* to_string(BarrierStatus s) {
  switch (s) {
    case BarrierStatus::Converged: return "converged";
    case BarrierStatus::IterationLimit: return "iteration_limit";
    case BarrierStatus::FailedAfterCorrection: return "failed_after_correction";
    case BarrierStatus::InfeasibleStart: return "infeasible_start";
    case BarrierStatus::EvaluationError: return "evaluation_error";
  }
  return "unknown";
}

void parallel_for(Index n, int threads, const std::function<void(Index)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<Index>(std::max(threads, 1), n));
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&]() {
      while (true) {
        const Index i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

void assemble_reduced_kkt(const PathDiscretization& disc, const Vector& y,
                          const std::vector<PointData>& pts, const Vector& z, const Vector& s,
                          double mu, const Vector& deltas, BTDMatrix& kkt, Vector& rhs) {
  const Index K = disc.K(), m = disc.dim();
  const Index nI = pts.empty() ? 0 : pts[0].g.size();
  const Index b = m + 1;
  const Matrix d = disc.differences();
  const Vector a = phi_scalars(disc, y);  // a_k = 2 w_k (1 + y_k - y_{k-1}), k = 1..K+1

  kkt = BTDMatrix(K, b);
  rhs.resize(K * b);

  const Vector grad_L = lagrangian_gradient(disc, y, pts, z);
  const Vector c_E = equality_constraints(disc);

  for (Index i = 1; i <= K; ++i) {
    const PointData& pt = pts[static_cast<size_t>(i - 1)];
    Matrix& D = kkt.diag(i - 1);
    // Gamma_i = D_I^T Sigma D_I + z-weighted constraint Hessian + delta I
    Matrix gamma = pt.lag_hess;
    if (nI > 0) {
      const auto zi = z.segment((i - 1) * nI, nI).array();
      const auto si = s.segment((i - 1) * nI, nI).array();
      gamma.noalias() += pt.dg_du.transpose() * (zi / si).matrix().asDiagonal() * pt.dg_du;
    }
    gamma.diagonal().array() += deltas(i - 1);
    D.topLeftCorner(m, m) = gamma + (a(i - 1) + a(i)) * Matrix::Identity(m, m);
    const Vector coupling = 2.0 * disc.w(i) * d.col(i - 1) + 2.0 * disc.w(i + 1) * d.col(i);
    D.block(0, m, m, 1) = coupling;
    D.block(m, 0, 1, m) = coupling.transpose();
    D(m, m) = 0.0;

    if (i <= K - 1) {
      Matrix& S = kkt.super(i - 1);
      S.topLeftCorner(m, m) = -a(i) * Matrix::Identity(m, m);
      const Vector off = -2.0 * disc.w(i + 1) * d.col(i);
      S.block(0, m, m, 1) = off;
      S.block(m, 0, 1, m) = off.transpose();
      S(m, m) = 0.0;
    }

    // rhs block: -[grad_L + D_I^T (Sigma c_I + mu ./ s); c_E]_i interleaved
    Vector top = grad_L.segment(m * (i - 1), m);
    if (nI > 0) {
      const auto zi = z.segment((i - 1) * nI, nI).array();
      const auto si = s.segment((i - 1) * nI, nI).array();
      const auto gi = pt.g.array();
      top.noalias() += pt.dg_du.transpose() * ((zi / si) * gi + mu / si).matrix();
    }
    rhs.segment(b * (i - 1), m) = -top;
    rhs(b * (i - 1) + m) = -c_E(i - 1);
  }
}

Vector lagrangian_gradient(const PathDiscretization& disc, const Vector& y,
                           const std::vector<PointData>& pts, const Vector& z) {
  const Index K = disc.K(), m = disc.dim();
  const Index nI = pts.empty() ? 0 : pts[0].g.size();
  Vector g = path_objective_gradient(disc) + equality_jacobian_transpose_product(disc, y);
  if (nI > 0)
    for (Index i = 0; i < K; ++i)
      g.segment(m * i, m).noalias() +=
          pts[static_cast<size_t>(i)].dg_du.transpose() * z.segment(i * nI, nI);
  return g;
}

void recover_steps(const std::vector<PointData>& pts, const Vector& z, const Vector& s, double mu,
                   NewtonStep& step) {
  const Index K = static_cast<Index>(pts.size());
  const Index nI = pts.empty() ? 0 : pts[0].g.size();
  const Index m = K > 0 ? pts[0].dg_du.cols() : 0;
  step.dz.resize(K * nI);
  step.ds.resize(K * nI);
  for (Index i = 0; i < K; ++i) {
    const PointData& pt = pts[static_cast<size_t>(i)];
    const auto zi = z.segment(i * nI, nI).array();
    const auto si = s.segment(i * nI, nI).array();
    const Vector cip = pt.g;
    const Vector di = pt.dg_du * step.dp.segment(m * i, m);
    // dz = Sigma (D_I dp + c_I + mu ./ z); ds = Sigma^{-1} (mu ./ s - z - dz)
    step.dz.segment(i * nI, nI) =
        ((zi / si) * (di.array() + cip.array() + mu / zi)).matrix();
    step.ds.segment(i * nI, nI) =
        ((si / zi) * (mu / si - zi - step.dz.segment(i * nI, nI).array())).matrix();
  }
}

double full_system_residual(const PathDiscretization& disc, const Vector& y,
                            const std::vector<PointData>& pts, const Vector& z, const Vector& s,
                            double mu, const Vector& deltas, const NewtonStep& step) {
  const Index K = disc.K(), m = disc.dim();
  const Index nI = pts.empty() ? 0 : pts[0].g.size();
  const Vector a = phi_scalars(disc, y);
  const Matrix d = disc.differences();

  const Vector grad_L = lagrangian_gradient(disc, y, pts, z);
  const Vector c_E = equality_constraints(disc);

  double rnorm = 0.0, bnorm = 1.0;
  auto track = [&](double resid, double ref) {
    rnorm = std::max(rnorm, std::abs(resid));
    bnorm = std::max(bnorm, std::abs(ref));
  };

  // Row 1: (H + S) dp + D_E^T dy + D_I^T dz = -grad_L
  Vector r1 = equality_jacobian_transpose_product(disc, step.dy);
  for (Index i = 1; i <= K; ++i) {
    auto blk = r1.segment(m * (i - 1), m);
    blk += (a(i - 1) + a(i)) * step.dp.segment(m * (i - 1), m);
    if (i >= 2) blk -= a(i - 1) * step.dp.segment(m * (i - 2), m);
    if (i <= K - 1) blk -= a(i) * step.dp.segment(m * i, m);
    const PointData& pt = pts[static_cast<size_t>(i - 1)];
    blk += pt.lag_hess * step.dp.segment(m * (i - 1), m);
    blk += deltas(i - 1) * step.dp.segment(m * (i - 1), m);
    if (nI > 0) blk += pt.dg_du.transpose() * step.dz.segment((i - 1) * nI, nI);
    blk += grad_L.segment(m * (i - 1), m);
  }
  for (Index j = 0; j < r1.size(); ++j) track(r1(j), grad_L(j));

  // Row 2 (scaled by diag(s)^{-1}): Sigma ds + dz = mu ./ s - z
  for (Index i = 0; i < K * nI; ++i) {
    const double resid = z(i) / s(i) * step.ds(i) + step.dz(i) - (mu / s(i) - z(i));
    track(resid, mu / s(i) - z(i));
  }

  // Row 3: D_E dp = -c_E
  for (Index j = 1; j <= K; ++j) {
    const Vector bj = 2.0 * disc.w(j) * d.col(j - 1);
    const Vector bj1 = 2.0 * disc.w(j + 1) * d.col(j);
    double v = (bj + bj1).dot(step.dp.segment(m * (j - 1), m));
    if (j >= 2) v -= bj.dot(step.dp.segment(m * (j - 2), m));
    if (j <= K - 1) v -= bj1.dot(step.dp.segment(m * j, m));
    track(v + c_E(j - 1), c_E(j - 1));
  }

  // Row 4: D_I dp + ds = -(c_I + s)
  for (Index i = 0; i < K; ++i) {
    const PointData& pt = pts[static_cast<size_t>(i)];
    const Vector v = pt.dg_du * step.dp.segment(m * i, m);
    for (Index j = 0; j < nI; ++j)
      track(v(j) + step.ds(i * nI + j) + pt.g(j) + s(i * nI + j), pt.g(j) + s(i * nI + j));
  }
  return rnorm / bnorm;
}

double fraction_to_boundary(const Vector& z, const Vector& dz, double tau) {
  double alpha = 1.0;
  for (Index i = 0; i < z.size(); ++i)
    if (dz(i) < 0.0) alpha = std::min(alpha, -tau * z(i) / dz(i));
  return alpha;
}

double merit_function(double phi, const Vector& g_stacked, double mu) {
  double barrier = 0.0;
  for (Index j = 0; j < g_stacked.size(); ++j) {
    const double margin = -g_stacked(j);
    if (!(margin > 0.0)) return std::numeric_limits<double>::infinity();
    barrier += std::log(margin);
  }
  return phi - mu * barrier;
}

double error_metric(const Vector& grad_L, const Vector& c_E, const Vector& s, const Vector& y,
                    const Vector& z, double mu, double rho_max) {
  const double nE = static_cast<double>(c_E.size());
  const double nIs = static_cast<double>(z.size());
  const double rho_d = std::max(rho_max, (y.lpNorm<1>() + z.lpNorm<1>()) / (nE + nIs)) / rho_max;
  double e = grad_L.lpNorm<Eigen::Infinity>() / rho_d;
  if (z.size() > 0) {
    const double rho_c = std::max(rho_max, z.lpNorm<1>() / nIs) / rho_max;
    const double comp = ((s.array() * z.array()) - mu).abs().maxCoeff();
    e = std::max(e, comp / rho_c);
  }
  e = std::max(e, c_E.lpNorm<Eigen::Infinity>());
  return e;
}

Vector inertia_correction(const PathDiscretization& disc, const Vector& y,
                          const std::vector<PointData>& pts) {
  const Index K = disc.K();
  auto y_at = [&](Index j) { return (j >= 1 && j <= K) ? y(j - 1) : 0.0; };
  double wmin = 0.0;
  for (Index j = 1; j <= K + 1; ++j)
    wmin = std::min(wmin, disc.w(j) * (y_at(j) - y_at(j - 1)));
  const double l_E = -4.0 * (1.0 + std::cos(M_PI / static_cast<double>(K + 1))) * wmin;
  Vector deltas(K);
  for (Index i = 0; i < K; ++i)
    deltas(i) = l_E + pts[static_cast<size_t>(i)].lag_hess.norm();
  return deltas;
}

BarrierResult barrier_solve(StageEvaluator& eval, const PathDiscretization& start,
                            const Vector& relaxation, double mu, const IPMParams& prm) {
  BarrierResult res;
  PathDiscretization disc = start;
  const Index K = disc.K(), m = disc.dim();
  const Index nI = eval.num_constraints();

  if (!eval.prime(disc)) {
    res.status = BarrierStatus::InfeasibleStart;
    res.p = disc.interior();
    return res;
  }
  {
    const RankMargins mg = rank_margins(disc, prm.eps_ls);
    if (!mg.pass) {
      res.status = BarrierStatus::InfeasibleStart;
      res.p = disc.interior();
      return res;
    }
  }

  std::vector<PointData> pts(static_cast<size_t>(K));
  Vector s(K * nI), y = Vector::Zero(K), z(K * nI);
  double phi = 0.0;

  auto eval_full_sweep = [&]() -> bool {
    std::atomic<bool> ok{true};
    parallel_for(K, prm.threads, [&](Index i) {
      PointData& pt = pts[static_cast<size_t>(i)];
      Vector g;
      if (!eval.eval_full(i, disc.point(i + 1), g, pt.dg_du)) {
        ok = false;
        return;
      }
      pt.g = g - relaxation;
    });
    return ok;
  };

  bool first = true;
  for (int iter = 1; iter <= prm.iter_max; ++iter) {
    if (!eval_full_sweep()) {
      res.status = first ? BarrierStatus::InfeasibleStart : BarrierStatus::EvaluationError;
      break;
    }
    if (first) {
      first = false;
      bool strictly_feasible = true;
      for (Index i = 0; i < K && strictly_feasible; ++i)
        if ((pts[static_cast<size_t>(i)].g.array() >= 0.0).any()) strictly_feasible = false;
      if (!strictly_feasible) {
        res.status = BarrierStatus::InfeasibleStart;
        break;
      }
      for (Index i = 0; i < K; ++i) s.segment(i * nI, nI) = -pts[static_cast<size_t>(i)].g;
      if (nI > 0) z = (mu / s.array()).matrix();
    }
    phi = path_objective(disc);

    const Vector grad_L = lagrangian_gradient(disc, y, pts, z);
    const Vector c_E = equality_constraints(disc);
    res.e_mu = error_metric(grad_L, c_E, s, y, z, mu, prm.rho_max);
    res.iterations = iter - 1;
    if (res.e_mu <= prm.eps_tol) {
      res.status = BarrierStatus::Converged;
      break;
    }

    parallel_for(K, prm.threads, [&](Index i) {
      pts[static_cast<size_t>(i)].lag_hess =
          nI > 0 ? eval.lagrangian_hessian(i, z.segment(i * nI, nI))
                 : Matrix::Zero(m, m);
    });

    Vector deltas = Vector::Zero(K);
    bool did_correction = false;
    NewtonStep step;
    int backoff = 0;
    double alpha_z = 1.0;
    bool accepted = false;

    // stacked relaxed values at the current iterate, for merit bookkeeping
    Vector gv(K * nI);
    for (Index i = 0; i < K; ++i) gv.segment(i * nI, nI) = pts[static_cast<size_t>(i)].g;
    const double psi0 = merit_function(phi, gv, mu);

    while (true) {
      BTDMatrix kkt;
      Vector rhs;
      assemble_reduced_kkt(disc, y, pts, z, s, mu, deltas, kkt, rhs);
      BTDFactorization fact = factor(kkt);
      if (!fact.ok()) {
        if (did_correction) break;
        deltas = inertia_correction(disc, y, pts);
        did_correction = true;
        continue;
      }
      const Vector sol = fact.solve(rhs);
      step.dp.resize(m * K);
      step.dy.resize(K);
      for (Index i = 0; i < K; ++i) {
        step.dp.segment(m * i, m) = sol.segment((m + 1) * i, m);
        step.dy(i) = sol((m + 1) * i + m);
      }
      recover_steps(pts, z, s, mu, step);
      if (prm.check_full_residual)
        res.max_full_residual = std::max(
            res.max_full_residual,
            full_system_residual(disc, y, pts, z, s, mu, deltas, step));

      alpha_z = fraction_to_boundary(z, step.dz, prm.tau);

      // directional derivative of the barrier merit at the iterate
      Vector grad_psi = path_objective_gradient(disc);
      for (Index i = 0; i < K; ++i) {
        const PointData& pt = pts[static_cast<size_t>(i)];
        if (nI > 0)
          grad_psi.segment(m * i, m) +=
              pt.dg_du.transpose() * (-mu / pt.g.array()).matrix();
      }
      const double dir = grad_psi.dot(step.dp);

      backoff = 0;
      accepted = false;
      PathDiscretization trial = disc;
      while (std::pow(prm.gamma, backoff) > prm.eps_ls) {
        const double alpha = std::pow(prm.gamma, backoff);
        trial.set_interior(disc.interior() + alpha * step.dp);
        const RankMargins mg = rank_margins(trial, prm.eps_ls);
        if (!mg.pass) {
          ++backoff;
          continue;
        }
        std::atomic<bool> feasible{true};
        Vector trial_gv(K * nI);
        parallel_for(K, prm.threads, [&](Index i) {
          Vector g;
          if (!eval.eval_values(i, trial.point(i + 1), g)) {
            feasible = false;
            return;
          }
          trial_gv.segment(i * nI, nI) = g - relaxation;
        });
        double psi_trial = std::numeric_limits<double>::infinity();
        if (feasible) psi_trial = merit_function(path_objective(trial), trial_gv, mu);
        if (psi_trial <= psi0 + prm.eta * alpha * dir) {
          accepted = true;
          // commit the trial
          disc = trial;
          y += alpha * alpha_z * step.dy;
          if (nI > 0) {
            z += alpha * alpha_z * step.dz;
            s = -trial_gv;
          }
          eval.accept_trials();
          res.trace.push_back({iter, res.e_mu, psi0, backoff, alpha_z, did_correction});
          break;
        }
        ++backoff;
      }
      if (accepted) break;
      if (did_correction) break;
      deltas = inertia_correction(disc, y, pts);
      did_correction = true;
    }

    if (!accepted) {
      res.status = BarrierStatus::FailedAfterCorrection;
      res.iterations = iter;
      break;
    }
  }

  if (res.status == BarrierStatus::IterationLimit) res.iterations = prm.iter_max;
  res.p = disc.interior();
  res.s = s;
  res.y = y;
  res.z = z;
  return res;
}

}  // namespace spopf
