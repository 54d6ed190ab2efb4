#include "spopf/quadratic_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace spopf {

namespace {
using Complex = std::complex<double>;
using Triplet = Eigen::Triplet<double>;
}  // namespace

SpMat power_quadratic_form(Index n, Index bus, const std::vector<ComplexCoeff>& coeffs,
                           bool reactive) {
  // V_i conj(I_i) with I_i = sum_j y_j V_j; real part e^T..., collected as an
  // asymmetric form M then symmetrized (x^T A x with A = (M + M^T)/2).
  std::vector<Triplet> trips;
  const Index ei = bus, fi = n + bus;
  for (const auto& [j, y] : coeffs) {
    const Index ej = j, fj = n + j;
    const double g = y.real(), b = y.imag();
    if (!reactive) {
      // P contribution: e_i (g e_j - b f_j) + f_i (g f_j + b e_j)
      trips.emplace_back(ei, ej, g);
      trips.emplace_back(ei, fj, -b);
      trips.emplace_back(fi, fj, g);
      trips.emplace_back(fi, ej, b);
    } else {
      // Q contribution: f_i (g e_j - b f_j) - e_i (g f_j + b e_j)
      trips.emplace_back(fi, ej, g);
      trips.emplace_back(fi, fj, -b);
      trips.emplace_back(ei, fj, -g);
      trips.emplace_back(ei, ej, -b);
    }
  }
  SpMat M(2 * n, 2 * n);
  M.setFromTriplets(trips.begin(), trips.end());
  SpMat A = SpMat(0.5 * (M + SpMat(M.transpose())));
  A.makeCompressed();
  return A;
}

Eigen::SparseMatrix<Complex> admittance_matrix(const NetworkCase& nc) {
  const Index n = static_cast<Index>(nc.buses.size());
  std::vector<Eigen::Triplet<Complex>> trips;
  const auto ends = branch_admittances(nc);
  for (size_t b = 0; b < nc.branches.size(); ++b) {
    const auto& br = nc.branches[b];
    const Index i = nc.bus_index(br.from), j = nc.bus_index(br.to);
    trips.emplace_back(i, i, ends[b].yff);
    trips.emplace_back(i, j, ends[b].yft);
    trips.emplace_back(j, i, ends[b].ytf);
    trips.emplace_back(j, j, ends[b].ytt);
  }
  for (size_t i = 0; i < nc.buses.size(); ++i)
    trips.emplace_back(static_cast<Index>(i), static_cast<Index>(i),
                       Complex(nc.buses[i].gs, nc.buses[i].bs));
  Eigen::SparseMatrix<Complex> Y(n, n);
  Y.setFromTriplets(trips.begin(), trips.end());
  return Y;
}

std::vector<BranchAdmittance> branch_admittances(const NetworkCase& nc) {
  std::vector<BranchAdmittance> out;
  out.reserve(nc.branches.size());
  for (const auto& br : nc.branches) {
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b_charging / 2.0);
    const Complex tap = br.tap * std::exp(Complex(0.0, br.shift));
    BranchAdmittance ba;
    ba.yff = (ys + ysh) / (br.tap * br.tap);
    ba.yft = -ys / std::conj(tap);
    ba.ytf = -ys / tap;
    ba.ytt = ys + ysh;
    out.push_back(ba);
  }
  return out;
}

QuadraticModel QuadraticModel::build(const NetworkCase& nc) {
  nc.validate();
  for (size_t i = 0; i < nc.generators.size(); ++i)
    for (size_t j = i + 1; j < nc.generators.size(); ++j)
      if (nc.generators[i].bus == nc.generators[j].bus)
        throw CaseError("model requires a merged case (one generator per bus)");

  QuadraticModel m;
  m.n_ = static_cast<Index>(nc.buses.size());
  const Index n = m.n_;
  m.slack_ = nc.slack_index();
  m.H_.assign(static_cast<size_t>(2 * n), SpMat(2 * n, 2 * n));
  m.r_.assign(static_cast<size_t>(2 * n), Vector::Zero(2 * n));
  m.c_ = Vector::Zero(2 * n);

  const auto Y = admittance_matrix(nc);
  std::vector<std::vector<ComplexCoeff>> rows(static_cast<size_t>(n));
  for (Index col = 0; col < n; ++col)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(Y, col); it; ++it)
      rows[static_cast<size_t>(it.row())].push_back({col, it.value()});

  for (Index i = 0; i < n; ++i) {
    const Bus& bus = nc.buses[static_cast<size_t>(i)];
    const bool is_slack = (i == m.slack_);
    const bool is_gen = nc.has_generator_at(bus.id);

    // Row i: active power balance P_i(x) + Pd_i - Pg_i = 0, except the
    // slack row which pins the imaginary part of the slack voltage.
    if (is_slack) {
      m.r_[static_cast<size_t>(i)](n + i) = 1.0;
    } else {
      m.H_[static_cast<size_t>(i)] =
          SpMat(2.0 * power_quadratic_form(n, i, rows[static_cast<size_t>(i)], false));
      m.c_(i) = bus.pd;
      if (is_gen)
        m.slots_.push_back({ControlSlot::Kind::ActivePower, bus.id, i});
    }

    // Row n+i: reactive balance for load buses, squared voltage magnitude
    // for generator buses (including the slack).
    if (is_gen) {
      SpMat V(2 * n, 2 * n);
      V.insert(i, i) = 2.0;
      V.insert(n + i, n + i) = 2.0;
      V.makeCompressed();
      m.H_[static_cast<size_t>(n + i)] = V;
      m.slots_.push_back({ControlSlot::Kind::VoltageSquared, bus.id, n + i});
    } else {
      m.H_[static_cast<size_t>(n + i)] =
          SpMat(2.0 * power_quadratic_form(n, i, rows[static_cast<size_t>(i)], true));
      m.c_(n + i) = bus.qd;
    }
  }

  // Controls ordered P first then V, by bus id.
  std::stable_sort(m.slots_.begin(), m.slots_.end(), [](const ControlSlot& a, const ControlSlot& b) {
    if (a.kind != b.kind) return a.kind == ControlSlot::Kind::ActivePower;
    return a.bus_id < b.bus_id;
  });

  m.flat_ = Vector::Zero(2 * n);
  for (Index i = 0; i < n; ++i) m.flat_(i) = 1.0;
  for (const auto& g : nc.generators) m.flat_(nc.bus_index(g.bus)) = g.vset;
  return m;
}

Index QuadraticModel::control_index(const std::string& name) const {
  for (size_t j = 0; j < slots_.size(); ++j)
    if (slots_[j].name() == name) return static_cast<Index>(j);
  throw std::invalid_argument("unknown control '" + name + "'");
}

Vector QuadraticModel::f(const Vector& x, const Vector& u) const {
  const Index ne = num_equations();
  Vector out(ne);
  for (Index k = 0; k < ne; ++k) {
    const SpMat& Hk = H_[static_cast<size_t>(k)];
    double quad = Hk.nonZeros() > 0 ? 0.5 * x.dot(Hk * x) : 0.0;
    out(k) = quad + r_[static_cast<size_t>(k)].dot(x) + c_(k);
  }
  for (size_t j = 0; j < slots_.size(); ++j) out(slots_[j].equation) -= u(static_cast<Index>(j));
  return out;
}

Matrix QuadraticModel::jacobian(const Vector& x) const {
  Matrix J = jacobian_linear_part(x);
  for (Index k = 0; k < num_equations(); ++k) J.row(k) += r_[static_cast<size_t>(k)].transpose();
  return J;
}

Matrix QuadraticModel::jacobian_at_zero() const {
  Matrix J = Matrix::Zero(num_equations(), state_dim());
  for (Index k = 0; k < num_equations(); ++k) J.row(k) = r_[static_cast<size_t>(k)].transpose();
  return J;
}

Matrix QuadraticModel::jacobian_linear_part(const Vector& v) const {
  Matrix J = Matrix::Zero(num_equations(), state_dim());
  for (Index k = 0; k < num_equations(); ++k) {
    const SpMat& Hk = H_[static_cast<size_t>(k)];
    if (Hk.nonZeros() > 0) J.row(k) = (Hk * v).transpose();
  }
  return J;
}

Matrix QuadraticModel::weighted_hessian_sum(const Vector& theta) const {
  Matrix out = Matrix::Zero(state_dim(), state_dim());
  for (Index k = 0; k < num_equations(); ++k) {
    const double t = theta(k);
    if (t == 0.0) continue;
    const SpMat& Hk = H_[static_cast<size_t>(k)];
    for (Index col = 0; col < Hk.outerSize(); ++col)
      for (SpMat::InnerIterator it(Hk, col); it; ++it) out(it.row(), it.col()) += t * it.value();
  }
  return out;
}

QuadraticModel QuadraticModel::configure_controls(const std::vector<std::string>& active,
                                                  const std::map<std::string, double>& frozen) const {
  QuadraticModel m = *this;
  m.slots_.clear();
  std::vector<bool> used(slots_.size(), false);
  for (const auto& name : active) {
    const Index j = control_index(name);
    if (used[static_cast<size_t>(j)]) throw std::invalid_argument("duplicate control '" + name + "'");
    if (frozen.count(name)) throw std::invalid_argument("control '" + name + "' both active and frozen");
    used[static_cast<size_t>(j)] = true;
    m.slots_.push_back(slots_[static_cast<size_t>(j)]);
  }
  for (const auto& [name, value] : frozen) {
    const Index j = control_index(name);
    if (used[static_cast<size_t>(j)]) throw std::invalid_argument("duplicate control '" + name + "'");
    used[static_cast<size_t>(j)] = true;
    m.c_(slots_[static_cast<size_t>(j)].equation) -= value;
  }
  for (size_t j = 0; j < slots_.size(); ++j)
    if (!used[j])
      throw std::invalid_argument("control '" + slots_[j].name() +
                                  "' is neither active nor frozen");
  return m;
}

}  // namespace spopf
