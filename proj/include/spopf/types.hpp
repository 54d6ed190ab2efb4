#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace spopf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

}  // namespace spopf
