#include "switchsafe/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace switchsafe {

void BaseKernelParams::validate() const {
  if (lengthscales.size() == 0) {
    throw std::invalid_argument("base kernel needs at least one lengthscale");
  }
  if ((lengthscales.array() <= 0.0).any() || !lengthscales.allFinite()) {
    throw std::invalid_argument("lengthscales must be positive and finite");
  }
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw std::invalid_argument("signal variance must be positive and finite");
  }
}

BaseKernelParams make_se(VectorXd lengthscales, double signal_variance) {
  BaseKernelParams p{std::move(lengthscales), signal_variance, KernelKind::SquaredExponential};
  p.validate();
  return p;
}

void CompositeKernel::validate() const {
  if (base.empty()) {
    throw std::invalid_argument("composite kernel needs at least one base kernel");
  }
  for (const auto& b : base) {
    b.validate();
    if (b.lengthscales.size() != base.front().lengthscales.size()) {
      throw std::invalid_argument("base kernels disagree on state dimension");
    }
  }
}

VectorXd augment(const Eigen::Ref<const VectorXd>& u) {
  VectorXd y(u.size() + 1);
  y(0) = 1.0;
  y.tail(u.size()) = u;
  return y;
}

double base_eval(const BaseKernelParams& params, const Eigen::Ref<const VectorXd>& x,
                 const Eigen::Ref<const VectorXd>& xp) {
  const auto d = params.lengthscales.size();
  if (x.size() != d || xp.size() != d) {
    throw std::invalid_argument("base_eval: expected state dimension " + std::to_string(d) +
                                ", got " + std::to_string(x.size()) + " and " +
                                std::to_string(xp.size()));
  }
  const double r2 = ((x - xp).array() / params.lengthscales.array()).square().sum();
  return params.signal_variance * std::exp(-0.5 * r2);
}

VectorXd lambda_diag(const CompositeKernel& kernel, const Eigen::Ref<const VectorXd>& x,
                     const Eigen::Ref<const VectorXd>& xp) {
  VectorXd out(kernel.augmented_dim());
  for (int i = 0; i < kernel.augmented_dim(); ++i) {
    out(i) = base_eval(kernel.base[i], x, xp);
  }
  return out;
}

double composite_eval(const CompositeKernel& kernel, const Eigen::Ref<const VectorXd>& x,
                      const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& xp,
                      const Eigen::Ref<const VectorXd>& yp) {
  if (y.size() != kernel.augmented_dim() || yp.size() != kernel.augmented_dim()) {
    throw std::invalid_argument("composite_eval: augmented input length must be " +
                                std::to_string(kernel.augmented_dim()));
  }
  double acc = 0.0;
  for (int i = 0; i < kernel.augmented_dim(); ++i) {
    acc += y(i) * base_eval(kernel.base[i], x, xp) * yp(i);
  }
  return acc;
}

namespace {

void check_columns(const CompositeKernel& kernel, const Eigen::Ref<const MatrixXd>& X,
                   const Eigen::Ref<const MatrixXd>& Y) {
  if (X.cols() != Y.cols()) {
    throw std::invalid_argument("state and augmented-input column counts differ");
  }
  if (X.cols() > 0 && X.rows() != kernel.state_dim()) {
    throw std::invalid_argument("state rows do not match kernel lengthscales");
  }
  if (Y.cols() > 0 && Y.rows() != kernel.augmented_dim()) {
    throw std::invalid_argument("augmented-input rows do not match base kernel count");
  }
}

} // namespace

MatrixXd gram(const CompositeKernel& kernel, const Eigen::Ref<const MatrixXd>& X,
              const Eigen::Ref<const MatrixXd>& Y) {
  check_columns(kernel, X, Y);
  const Eigen::Index n = X.cols();
  MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = composite_eval(kernel, X.col(i), Y.col(i), X.col(j), Y.col(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

MatrixXd cross_matrix(const CompositeKernel& kernel, const Eigen::Ref<const VectorXd>& xs,
                      const Eigen::Ref<const MatrixXd>& X, const Eigen::Ref<const MatrixXd>& Y) {
  check_columns(kernel, X, Y);
  if (xs.size() != kernel.state_dim()) {
    throw std::invalid_argument("cross_matrix: test state has wrong dimension");
  }
  MatrixXd Kbar(kernel.augmented_dim(), X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    Kbar.col(i) = lambda_diag(kernel, xs, X.col(i)).cwiseProduct(Y.col(i));
  }
  return Kbar;
}

} // namespace switchsafe
