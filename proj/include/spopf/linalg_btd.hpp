#pragma once

#include <vector>

#include <Eigen/LU>

#include "spopf/types.hpp"

namespace spopf {

/// Symmetric block-tridiagonal matrix with square dense blocks. The full
/// matrix is [A_1 C_1; C_1^T A_2 C_2; ...]; diagonal blocks are symmetric
/// and super-diagonal blocks are arbitrary.
class BTDMatrix {
 public:
  BTDMatrix() = default;
  BTDMatrix(Index num_blocks, Index block_size);

  Index num_blocks() const { return static_cast<Index>(diag_.size()); }
  Index block_size() const { return block_size_; }
  Index size() const { return num_blocks() * block_size_; }

  Matrix& diag(Index i) { return diag_[static_cast<size_t>(i)]; }
  const Matrix& diag(Index i) const { return diag_[static_cast<size_t>(i)]; }
  /// Super-diagonal block coupling block rows i and i+1.
  Matrix& super(Index i) { return super_[static_cast<size_t>(i)]; }
  const Matrix& super(Index i) const { return super_[static_cast<size_t>(i)]; }

  /// Assemble the dense matrix; tests only.
  Matrix dense() const;

 private:
  Index block_size_ = 0;
  std::vector<Matrix> diag_;
  std::vector<Matrix> super_;
};

/// Block LDL^T-style forward factorization of a BTDMatrix. Pivoting is
/// within-block only; the Schur-complement pivot blocks are factored with
/// partially pivoted LU.
class BTDFactorization {
 public:
  /// Reciprocal condition estimate (pivot-magnitude ratio) below which a
  /// pivot block is declared numerically singular.
  static constexpr double kSingularRcond = 1e-14;

  bool ok() const { return ok_; }
  /// Index of the first singular pivot block when !ok().
  Index singular_block() const { return singular_block_; }

  /// Forward/backward substitution; supports multiple right-hand sides.
  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;

  /// Number of doubles held by the factorization; used to verify the
  /// O(K b^2) memory contract.
  size_t storage_doubles() const;

  friend BTDFactorization factor(const BTDMatrix& btd);

 private:
  Index block_size_ = 0;
  bool ok_ = false;
  Index singular_block_ = -1;
  std::vector<Eigen::PartialPivLU<Matrix>> pivots_;  // factorizations of S_i
  std::vector<Matrix> coupling_;                     // W_i = S_i^{-1} C_i
  std::vector<Matrix> super_t_;                      // C_i^T
};

BTDFactorization factor(const BTDMatrix& btd);

}  // namespace spopf
