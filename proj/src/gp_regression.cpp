#include "switchsafe/gp_regression.hpp"

#include "switchsafe/errors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace switchsafe {

namespace {

struct Factor {
  MatrixXd L;
  double jitter = 0.0;
};

// A is K + noise I. Returns the lower factor and the extra diagonal used.
Factor cholesky_with_jitter(const MatrixXd& A, const std::string& context) {
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) {
    return {llt.matrixL(), 0.0};
  }
  const double scale = A.diagonal().mean();
  for (double rel = 1e-8; rel <= 1e-2 * (1.0 + 1e-12); rel *= 10.0) {
    const double jitter = rel * scale;
    MatrixXd Aj = A;
    Aj.diagonal().array() += jitter;
    llt.compute(Aj);
    if (llt.info() == Eigen::Success) {
      return {llt.matrixL(), jitter};
    }
  }
  throw NumericalError(context + ": Cholesky of the Gram matrix failed after jitter escalation");
}

} // namespace

FittedGP FittedGP::fit(CompositeKernel kernel, MatrixXd X, MatrixXd Y, VectorXd omega,
                       double noise_variance, const std::string& context) {
  kernel.validate();
  if (!(noise_variance > 0.0)) {
    throw std::invalid_argument(context + ": noise variance must be positive");
  }
  if (X.cols() != Y.cols() || X.cols() != omega.size()) {
    throw std::invalid_argument(context + ": X, Y and omega sizes disagree");
  }
  FittedGP gp;
  gp.noise_variance_ = noise_variance;
  if (X.cols() == 0) {
    gp.kernel_ = std::move(kernel);
    gp.X_.resize(gp.kernel_.state_dim(), 0);
    gp.Y_.resize(gp.kernel_.augmented_dim(), 0);
    gp.omega_.resize(0);
    return gp;
  }
  MatrixXd K = gram(kernel, X, Y);
  K.diagonal().array() += noise_variance;
  Factor f = cholesky_with_jitter(K, context);
  gp.L_ = std::move(f.L);
  gp.jitter_ = f.jitter;
  gp.alpha_ = gp.L_.triangularView<Eigen::Lower>().solve(omega);
  gp.L_.triangularView<Eigen::Lower>().transpose().solveInPlace(gp.alpha_);
  gp.kernel_ = std::move(kernel);
  gp.X_ = std::move(X);
  gp.Y_ = std::move(Y);
  gp.omega_ = std::move(omega);
  return gp;
}

AffinePosterior affine_posterior(const FittedGP& model, const Eigen::Ref<const VectorXd>& xs) {
  const CompositeKernel& kernel = model.kernel();
  if (xs.size() != kernel.state_dim()) {
    throw std::invalid_argument("affine_posterior: test state has wrong dimension");
  }
  AffinePosterior post;
  const VectorXd prior = lambda_diag(kernel, xs, xs);
  post.prior_variance = prior;
  if (!model.trained()) {
    post.mu = RowVectorXd::Zero(kernel.augmented_dim());
    post.Sigma = prior.asDiagonal();
    return post;
  }
  const MatrixXd Kbar = cross_matrix(kernel, xs, model.X(), model.Y());
  post.mu = (Kbar * model.weights()).transpose();
  const MatrixXd V = model.chol().triangularView<Eigen::Lower>().solve(Kbar.transpose());
  MatrixXd Sigma = -V.transpose() * V;
  Sigma.diagonal() += prior;
  post.Sigma = 0.5 * (Sigma + Sigma.transpose());
  return post;
}

double nlml(const CompositeKernel& kernel, const Eigen::Ref<const MatrixXd>& X,
            const Eigen::Ref<const MatrixXd>& Y, const Eigen::Ref<const VectorXd>& omega,
            double noise_variance) {
  const Eigen::Index n = X.cols();
  if (n < 1) {
    throw std::invalid_argument("nlml needs at least one sample");
  }
  if (omega.size() != n) {
    throw std::invalid_argument("nlml: omega length differs from sample count");
  }
  MatrixXd K = gram(kernel, X, Y);
  K.diagonal().array() += noise_variance;
  const Factor f = cholesky_with_jitter(K, "nlml");
  const auto L = f.L.triangularView<Eigen::Lower>();
  const VectorXd a = L.solve(omega);
  const double fit = 0.5 * a.squaredNorm();
  const double logdet_half = f.L.diagonal().array().log().sum();
  return fit + logdet_half + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

StackedGP fit_sogp(StackedKernel kernel, MatrixXd inputs, VectorXd omega, double noise_variance) {
  if (inputs.cols() != omega.size()) {
    throw std::invalid_argument("fit_sogp: inputs and outputs disagree");
  }
  StackedGP gp;
  gp.kernel = std::move(kernel);
  gp.noise_variance = noise_variance;
  const Eigen::Index n = inputs.cols();
  if (n > 0) {
    MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        K(i, j) = gp.kernel(inputs.col(i), inputs.col(j));
      }
    }
    K.diagonal().array() += noise_variance;
    gp.factor.compute(K);
    if (gp.factor.info() != Eigen::Success) {
      throw NumericalError("fit_sogp: LDLT factorization failed");
    }
    gp.alpha = gp.factor.solve(omega);
  }
  gp.inputs = std::move(inputs);
  gp.omega = std::move(omega);
  return gp;
}

GaussianPrediction sogp_posterior(const StackedGP& model, const VectorXd& test) {
  GaussianPrediction out;
  const double prior = model.kernel(test, test);
  const Eigen::Index n = model.inputs.cols();
  if (n == 0) {
    out.variance = prior;
    return out;
  }
  VectorXd kbar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kbar(i) = model.kernel(test, model.inputs.col(i));
  }
  out.mean = kbar.dot(model.alpha);
  out.variance = std::max(0.0, prior - kbar.dot(model.factor.solve(kbar)));
  return out;
}

StackedKernel stacked_kernel(const CompositeKernel& kernel) {
  return [kernel](const VectorXd& a, const VectorXd& b) {
    const int n = kernel.state_dim();
    const int p = kernel.augmented_dim();
    if (a.size() != n + p || b.size() != n + p) {
      throw std::invalid_argument("stacked kernel: point has wrong length");
    }
    return composite_eval(kernel, a.head(n), a.tail(p), b.head(n), b.tail(p));
  };
}

} // namespace switchsafe
