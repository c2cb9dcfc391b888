#pragma once

// Sparse Cholesky factorization of symmetric positive-definite matrices.
// Backed by CHOLMOD's simplicial LL^T with the best of its fill-reducing
// orderings (AMD, METIS, nested dissection); no dense BLAS kernels are used.

#include <Eigen/Sparse>
#include <memory>

namespace heislab {

class SpdFactor {
 public:
  SpdFactor();
  explicit SpdFactor(const Eigen::SparseMatrix<double>& a);
  ~SpdFactor();
  SpdFactor(SpdFactor&&) noexcept;
  SpdFactor& operator=(SpdFactor&&) noexcept;

  /// Throws Error(solver) if the matrix is not numerically positive definite.
  void compute(const Eigen::SparseMatrix<double>& a);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  Eigen::Index rows() const noexcept { return rows_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index rows_ = 0;
};

}  // namespace heislab
