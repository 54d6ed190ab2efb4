#include "spopf/path.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace spopf {

PathDiscretization::PathDiscretization(Vector u0, Vector u1, Vector t)
    : u0_(std::move(u0)), u1_(std::move(u1)), t_(std::move(t)) {
  const Index K = t_.size() - 2;
  if (K < 1) throw std::invalid_argument("path spacing needs at least one interior parameter");
  if (t_(0) != 0.0 || t_(K + 1) != 1.0)
    throw std::invalid_argument("path spacing must start at 0 and end at 1");
  for (Index k = 0; k + 1 < t_.size(); ++k)
    if (!(t_(k) < t_(k + 1))) throw std::invalid_argument("path spacing must be strictly increasing");
  w_.resize(K + 1);
  for (Index k = 1; k <= K + 1; ++k) {
    const double dt = t_(k) - t_(k - 1);
    w_(k - 1) = 1.0 / (dt * dt * static_cast<double>(K + 1));
  }
  p_ = Vector::Zero(dim() * K);
}

Vector PathDiscretization::point(Index k) const {
  const Index m = dim();
  if (k == 0) return u0_;
  if (k == K() + 1) return u1_;
  return p_.segment(m * (k - 1), m);
}

void PathDiscretization::set_interior(const Vector& p) {
  if (p.size() != p_.size()) throw std::invalid_argument("interior size mismatch");
  p_ = p;
}

Matrix PathDiscretization::differences() const {
  const Index m = dim();
  Matrix d(m, K() + 1);
  Vector prev = u0_;
  for (Index k = 1; k <= K() + 1; ++k) {
    Vector cur = point(k);
    d.col(k - 1) = cur - prev;
    prev = std::move(cur);
  }
  return d;
}

Vector uniform_spacing(Index K) {
  Vector t(K + 2);
  for (Index k = 0; k <= K + 1; ++k) t(k) = static_cast<double>(k) / static_cast<double>(K + 1);
  t(K + 1) = 1.0;
  return t;
}

PathDiscretization init_line_path(const Vector& u0, const Vector& u1, const Vector& t) {
  if (u0.size() != u1.size()) throw std::invalid_argument("endpoint dimension mismatch");
  if ((u1 - u0).lpNorm<Eigen::Infinity>() == 0.0)
    throw std::invalid_argument("endpoints must differ");
  PathDiscretization disc(u0, u1, t);
  const Index m = disc.dim();
  Vector p(m * disc.K());
  for (Index k = 1; k <= disc.K(); ++k) p.segment(m * (k - 1), m) = u0 + t(k) * (u1 - u0);
  disc.set_interior(p);
  return disc;
}

double path_objective(const PathDiscretization& disc) {
  const Matrix d = disc.differences();
  double phi = 0.0;
  for (Index k = 1; k <= disc.K() + 1; ++k) phi += disc.w(k) * d.col(k - 1).squaredNorm();
  return phi;
}

Vector path_objective_gradient(const PathDiscretization& disc) {
  const Index m = disc.dim(), K = disc.K();
  const Matrix d = disc.differences();
  Vector grad(m * K);
  for (Index i = 1; i <= K; ++i)
    grad.segment(m * (i - 1), m) = 2.0 * disc.w(i) * d.col(i - 1) - 2.0 * disc.w(i + 1) * d.col(i);
  return grad;
}

Vector equality_constraints(const PathDiscretization& disc) {
  const Index K = disc.K();
  const Matrix d = disc.differences();
  Vector c(K);
  for (Index i = 1; i <= K; ++i)
    c(i - 1) = disc.w(i) * d.col(i - 1).squaredNorm() - disc.w(i + 1) * d.col(i).squaredNorm();
  return c;
}

Matrix equality_jacobian_dense(const PathDiscretization& disc) {
  const Index m = disc.dim(), K = disc.K();
  const Matrix d = disc.differences();
  Matrix D = Matrix::Zero(K, m * K);
  for (Index j = 1; j <= K; ++j) {
    const Vector bj = 2.0 * disc.w(j) * d.col(j - 1);
    const Vector bj1 = 2.0 * disc.w(j + 1) * d.col(j);
    if (j >= 2) D.row(j - 1).segment(m * (j - 2), m) = -bj.transpose();
    D.row(j - 1).segment(m * (j - 1), m) = (bj + bj1).transpose();
    if (j <= K - 1) D.row(j - 1).segment(m * j, m) = -bj1.transpose();
  }
  return D;
}

Vector equality_jacobian_transpose_product(const PathDiscretization& disc, const Vector& y) {
  const Index m = disc.dim(), K = disc.K();
  const Matrix d = disc.differences();
  auto y_at = [&](Index j) { return (j >= 1 && j <= K) ? y(j - 1) : 0.0; };
  Vector out(m * K);
  for (Index i = 1; i <= K; ++i)
    out.segment(m * (i - 1), m) = 2.0 * disc.w(i) * (y_at(i) - y_at(i - 1)) * d.col(i - 1) +
                                  2.0 * disc.w(i + 1) * (y_at(i) - y_at(i + 1)) * d.col(i);
  return out;
}

Matrix objective_hessian_tridiag(const PathDiscretization& disc) {
  const Index K = disc.K();
  Matrix Y = Matrix::Zero(K, K);
  for (Index i = 1; i <= K; ++i) {
    Y(i - 1, i - 1) = disc.w(i) + disc.w(i + 1);
    if (i <= K - 1) {
      Y(i - 1, i) = -disc.w(i + 1);
      Y(i, i - 1) = -disc.w(i + 1);
    }
  }
  return Y;
}

Matrix equality_hessian_term_dense(const PathDiscretization& disc, const Vector& y) {
  const Index m = disc.dim(), K = disc.K();
  auto y_at = [&](Index j) { return (j >= 1 && j <= K) ? y(j - 1) : 0.0; };
  Matrix H = Matrix::Zero(m * K, m * K);
  const Matrix I = Matrix::Identity(m, m);
  for (Index j = 1; j <= K; ++j) {
    const double diag =
        2.0 * (disc.w(j) * (y_at(j) - y_at(j - 1)) + disc.w(j + 1) * (y_at(j + 1) - y_at(j)));
    H.block(m * (j - 1), m * (j - 1), m, m) = diag * I;
    if (j >= 2) {
      const double off = -2.0 * disc.w(j) * (y_at(j) - y_at(j - 1));
      H.block(m * (j - 2), m * (j - 1), m, m) = off * I;
      H.block(m * (j - 1), m * (j - 2), m, m) = off * I;
    }
  }
  return H;
}

Vector phi_scalars(const PathDiscretization& disc, const Vector& y) {
  const Index K = disc.K();
  auto y_at = [&](Index j) { return (j >= 1 && j <= K) ? y(j - 1) : 0.0; };
  Vector a(K + 1);
  for (Index k = 1; k <= K + 1; ++k) a(k - 1) = 2.0 * disc.w(k) * (1.0 + y_at(k) - y_at(k - 1));
  return a;
}

RankMargins rank_margins(const PathDiscretization& disc, double eps_ls) {
  RankMargins out;
  const Index K = disc.K();
  const Matrix d = disc.differences();
  double bmin = std::numeric_limits<double>::infinity(), bmax = 0.0, qmax = 0.0;
  Vector qsum = Vector::Zero(disc.dim());
  for (Index j = 1; j <= K + 1; ++j) {
    const Vector b = disc.w(j) * d.col(j - 1);
    const double bn = b.lpNorm<Eigen::Infinity>();
    const double b2 = b.squaredNorm();
    if (b2 == 0.0) {
      out.degenerate_segment = true;
      out.pass = false;
      return out;
    }
    const Vector q = b / b2;
    bmin = std::min(bmin, bn);
    bmax = std::max(bmax, bn);
    qmax = std::max(qmax, q.lpNorm<Eigen::Infinity>());
    qsum += q;
  }
  out.ratio_b = bmin / bmax;
  out.ratio_q = qsum.lpNorm<Eigen::Infinity>() / (static_cast<double>(K + 1) * qmax);
  out.pass = out.ratio_b > eps_ls && out.ratio_q > eps_ls;
  return out;
}

void write_path_csv(std::ostream& os, const PathDiscretization& disc,
                    const std::vector<std::string>& control_names) {
  os << "k,t";
  for (const auto& name : control_names) os << ',' << name;
  os << '\n';
  os << std::setprecision(17);
  for (Index k = 0; k <= disc.K() + 1; ++k) {
    os << k << ',' << disc.t(k);
    const Vector p = disc.point(k);
    for (Index j = 0; j < p.size(); ++j) os << ',' << p(j);
    os << '\n';
  }
}

PathDiscretization read_path_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("path csv: missing header");
  std::vector<Vector> rows;
  std::vector<double> ts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> vals;
    while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
    if (vals.size() < 3) throw std::runtime_error("path csv: row too short");
    ts.push_back(vals[1]);
    Vector u(vals.size() - 2);
    for (size_t j = 2; j < vals.size(); ++j) u(static_cast<Index>(j - 2)) = vals[j];
    rows.push_back(std::move(u));
  }
  if (rows.size() < 3) throw std::runtime_error("path csv: need at least one interior point");
  const Index K = static_cast<Index>(rows.size()) - 2;
  Vector t(K + 2);
  for (Index k = 0; k <= K + 1; ++k) t(k) = ts[static_cast<size_t>(k)];
  PathDiscretization disc(rows.front(), rows.back(), t);
  Vector p(disc.dim() * K);
  for (Index k = 1; k <= K; ++k) p.segment(disc.dim() * (k - 1), disc.dim()) = rows[static_cast<size_t>(k)];
  disc.set_interior(p);
  return disc;
}

}  // namespace spopf
