#include "spopf/linalg_btd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spopf {

BTDMatrix::BTDMatrix(Index num_blocks, Index block_size) : block_size_(block_size) {
  if (num_blocks < 1 || block_size < 1) throw std::invalid_argument("BTDMatrix: bad dimensions");
  diag_.assign(static_cast<size_t>(num_blocks), Matrix::Zero(block_size, block_size));
  if (num_blocks > 1)
    super_.assign(static_cast<size_t>(num_blocks - 1), Matrix::Zero(block_size, block_size));
}

Matrix BTDMatrix::dense() const {
  const Index b = block_size_, n = size();
  Matrix A = Matrix::Zero(n, n);
  for (Index i = 0; i < num_blocks(); ++i) {
    A.block(i * b, i * b, b, b) = diag(i);
    if (i + 1 < num_blocks()) {
      A.block(i * b, (i + 1) * b, b, b) = super(i);
      A.block((i + 1) * b, i * b, b, b) = super(i).transpose();
    }
  }
  return A;
}

namespace {

// Pivot-ratio reciprocal condition estimate from an LU factorization.
double rcond_estimate(const Eigen::PartialPivLU<Matrix>& lu) {
  const auto& U = lu.matrixLU();
  double umin = std::numeric_limits<double>::infinity(), umax = 0.0;
  for (Index i = 0; i < U.rows(); ++i) {
    const double d = std::abs(U(i, i));
    umin = std::min(umin, d);
    umax = std::max(umax, d);
  }
  if (umax == 0.0) return 0.0;
  return umin / umax;
}

}  // namespace

BTDFactorization factor(const BTDMatrix& btd) {
  BTDFactorization f;
  const Index K = btd.num_blocks(), b = btd.block_size();
  f.block_size_ = b;
  f.pivots_.reserve(static_cast<size_t>(K));
  f.coupling_.reserve(static_cast<size_t>(K > 0 ? K - 1 : 0));
  f.super_t_.reserve(static_cast<size_t>(K > 0 ? K - 1 : 0));
  Matrix S = btd.diag(0);
  for (Index i = 0; i < K; ++i) {
    f.pivots_.emplace_back(S);
    if (rcond_estimate(f.pivots_.back()) < BTDFactorization::kSingularRcond) {
      f.ok_ = false;
      f.singular_block_ = i;
      return f;
    }
    if (i + 1 < K) {
      f.coupling_.push_back(f.pivots_.back().solve(btd.super(i)));
      f.super_t_.push_back(btd.super(i).transpose());
      S = btd.diag(i + 1) - f.super_t_.back() * f.coupling_.back();
    }
  }
  f.ok_ = true;
  return f;
}

Matrix BTDFactorization::solve(const Matrix& rhs) const {
  if (!ok_) throw std::logic_error("BTDFactorization::solve on failed factorization");
  const Index K = static_cast<Index>(pivots_.size());
  const Index b = block_size_;
  if (rhs.rows() != K * b) throw std::invalid_argument("BTD solve: rhs size mismatch");
  Matrix z(rhs.rows(), rhs.cols());
  for (Index i = 0; i < K; ++i) {
    Matrix r = rhs.middleRows(i * b, b);
    if (i > 0) r -= super_t_[static_cast<size_t>(i - 1)] * z.middleRows((i - 1) * b, b);
    z.middleRows(i * b, b) = pivots_[static_cast<size_t>(i)].solve(r);
  }
  for (Index i = K - 2; i >= 0; --i)
    z.middleRows(i * b, b) -= coupling_[static_cast<size_t>(i)] * z.middleRows((i + 1) * b, b);
  return z;
}

Vector BTDFactorization::solve(const Vector& rhs) const {
  return Vector(solve(Matrix(rhs)));
}

size_t BTDFactorization::storage_doubles() const {
  const size_t b = static_cast<size_t>(block_size_);
  size_t total = pivots_.size() * b * b;  // LU factors
  total += coupling_.size() * b * b;
  total += super_t_.size() * b * b;
  return total;
}

}  // namespace spopf
