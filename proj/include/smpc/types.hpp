#ifndef SMPC_TYPES_HPP
#define SMPC_TYPES_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace smpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Symmetric part of a (possibly nonsymmetric) sparse operator, 1/2 (A + A^T).
inline SpMat symmetric_part(const SpMat& A) {
  SpMat At = SpMat(A.transpose());
  return 0.5 * (A + At);
}

} // namespace smpc

#endif
