#pragma once

#include <Eigen/Dense>
#include <vector>

namespace switchsafe {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KernelKind { SquaredExponential };

/// Stationary base covariance k(x, x') over the GP state features.
struct BaseKernelParams {
  VectorXd lengthscales;  // one per feature, ARD
  double signal_variance = 1.0;
  KernelKind kind = KernelKind::SquaredExponential;

  /// Throws std::invalid_argument unless every lengthscale and the signal
  /// variance are strictly positive.
  void validate() const;
};

BaseKernelParams make_se(VectorXd lengthscales, double signal_variance);

/// Control-affine kernel k((x,y),(x',y')) = y^T diag(k^1(x,x'),...,k^{m+1}(x,x')) y'.
///
/// The augmented input is y = [1, u^T]^T, so a GP with this kernel has a
/// posterior mean linear in y and a variance quadratic in y.
struct CompositeKernel {
  std::vector<BaseKernelParams> base;  // m + 1 entries
  int region_id = 1;

  int control_dim() const { return static_cast<int>(base.size()) - 1; }
  int augmented_dim() const { return static_cast<int>(base.size()); }
  int state_dim() const {
    return base.empty() ? 0 : static_cast<int>(base.front().lengthscales.size());
  }
  void validate() const;
};

/// y = [1, u^T]^T.
VectorXd augment(const Eigen::Ref<const VectorXd>& u);

double base_eval(const BaseKernelParams& params, const Eigen::Ref<const VectorXd>& x,
                 const Eigen::Ref<const VectorXd>& xp);

/// Diagonal of Lambda(x, x'): the m+1 base kernel evaluations.
VectorXd lambda_diag(const CompositeKernel& kernel, const Eigen::Ref<const VectorXd>& x,
                     const Eigen::Ref<const VectorXd>& xp);

double composite_eval(const CompositeKernel& kernel, const Eigen::Ref<const VectorXd>& x,
                      const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& xp,
                      const Eigen::Ref<const VectorXd>& yp);

/// N x N Gram matrix over columns of X (states) and Y (augmented inputs).
MatrixXd gram(const CompositeKernel& kernel, const Eigen::Ref<const MatrixXd>& X,
              const Eigen::Ref<const MatrixXd>& Y);

/// (m+1) x N matrix whose column i is lambda_diag(x*, x_i) .* y_i.
MatrixXd cross_matrix(const CompositeKernel& kernel, const Eigen::Ref<const VectorXd>& xs,
                      const Eigen::Ref<const MatrixXd>& X, const Eigen::Ref<const MatrixXd>& Y);

} // namespace switchsafe
