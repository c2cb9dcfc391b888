#include "heislab/sparse_factor.hpp"

#include <Eigen/CholmodSupport>

#include "heislab/error.hpp"

namespace heislab {

struct SpdFactor::Impl {
  Eigen::CholmodSimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
};

SpdFactor::SpdFactor() : impl_(std::make_unique<Impl>()) {}

SpdFactor::SpdFactor(const Eigen::SparseMatrix<double>& a) : SpdFactor() { compute(a); }

SpdFactor::~SpdFactor() = default;
SpdFactor::SpdFactor(SpdFactor&&) noexcept = default;
SpdFactor& SpdFactor::operator=(SpdFactor&&) noexcept = default;

void SpdFactor::compute(const Eigen::SparseMatrix<double>& a) {
  rows_ = a.rows();
  impl_->llt.compute(a);
  if (impl_->llt.info() != Eigen::Success) {
    throw Error(ErrorKind::solver, "linear",
                "sparse Cholesky failed: matrix is not numerically positive definite");
  }
}

Eigen::MatrixXd SpdFactor::solve(const Eigen::MatrixXd& b) const { return impl_->llt.solve(b); }

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& b) const { return impl_->llt.solve(b); }

}  // namespace heislab
