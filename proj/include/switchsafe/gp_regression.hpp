#pragma once

#include "switchsafe/kernels.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace switchsafe {

using Eigen::RowVectorXd;

/// Exact GP conditioned on (X, Y, omega) under a composite kernel.
///
/// Holds the lower Cholesky factor of K + (noise + jitter) I and the weights
/// alpha = (K + noise I)^{-1} omega. An empty training set is a valid model and
/// represents the prior.
class FittedGP {
public:
  /// Factorizes the Gram matrix. Jitter of 1e-8 * mean(diag) is added if the
  /// plain factorization fails and escalated by 10x up to 1e-2 * mean(diag);
  /// after that a NumericalError naming `context` is thrown.
  static FittedGP fit(CompositeKernel kernel, MatrixXd X, MatrixXd Y, VectorXd omega,
                      double noise_variance, const std::string& context = "gp");

  const CompositeKernel& kernel() const { return kernel_; }
  const MatrixXd& X() const { return X_; }
  const MatrixXd& Y() const { return Y_; }
  const VectorXd& omega() const { return omega_; }
  double noise_variance() const { return noise_variance_; }
  double jitter() const { return jitter_; }
  const MatrixXd& chol() const { return L_; }
  const VectorXd& weights() const { return alpha_; }
  Eigen::Index size() const { return X_.cols(); }
  bool trained() const { return X_.cols() > 0; }

private:
  CompositeKernel kernel_;
  MatrixXd X_;
  MatrixXd Y_;
  VectorXd omega_;
  double noise_variance_ = 1e-6;
  double jitter_ = 0.0;
  MatrixXd L_;
  VectorXd alpha_;
};

/// Posterior at a fixed state, as functions of the augmented input y:
/// mean = mu * y, variance = y^T Sigma y.
struct AffinePosterior {
  RowVectorXd mu;
  MatrixXd Sigma;
  VectorXd prior_variance;  // diag of Lambda(x*, x*); empty if unknown

  double mean(const Eigen::Ref<const VectorXd>& y) const { return mu.dot(y); }
  double variance(const Eigen::Ref<const VectorXd>& y) const { return y.dot(Sigma * y); }
};

AffinePosterior affine_posterior(const FittedGP& model, const Eigen::Ref<const VectorXd>& xs);

/// Negative log marginal likelihood of omega under kernel + noise, through Cholesky.
double nlml(const CompositeKernel& kernel, const Eigen::Ref<const MatrixXd>& X,
            const Eigen::Ref<const MatrixXd>& Y, const Eigen::Ref<const VectorXd>& omega,
            double noise_variance);

// --- generic single-output GP over arbitrary stacked inputs -------------------------

using StackedKernel = std::function<double(const VectorXd&, const VectorXd&)>;

/// Plain single-output GP on column inputs, factorized with LDL^T.
struct StackedGP {
  StackedKernel kernel;
  MatrixXd inputs;
  VectorXd omega;
  double noise_variance = 0.0;
  Eigen::LDLT<MatrixXd> factor;
  VectorXd alpha;
};

struct GaussianPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

StackedGP fit_sogp(StackedKernel kernel, MatrixXd inputs, VectorXd omega, double noise_variance);

GaussianPrediction sogp_posterior(const StackedGP& model, const VectorXd& test);

/// The composite kernel seen as a kernel over stacked [x; y] vectors.
StackedKernel stacked_kernel(const CompositeKernel& kernel);

// --- hyperparameters -------------------------------------------------------------

struct HyperOptConfig {
  int restarts = 5;
  int max_iterations = 300;
  double tolerance = 1e-4;     // simplex size at which a restart stops
  double noise_floor = 1e-6;
  bool optimize_noise = true;
  double fixed_noise = 1e-6;   // used when optimize_noise is false
  int max_points = 300;        // stride subsample used for the search itself
  std::uint64_t seed = 0;

  // Initial ranges for random restarts, as log-offsets around data scales.
  double log_lengthscale_lo = -1.0;
  double log_lengthscale_hi = 1.5;
  double log_signal_lo = -2.0;
  double log_signal_hi = 2.0;
  double log_noise_lo = -8.0;
  double log_noise_hi = -2.0;

  /// Explicit starting points (packed log-parameters). When non-empty these
  /// replace the generated restarts.
  std::vector<VectorXd> initial_points;

  void validate() const;
};

struct HyperOptResult {
  CompositeKernel kernel;
  double noise_variance = 0.0;
  double nlml = 0.0;
  std::vector<double> start_nlml;  // per restart, at the initial point
  std::vector<double> final_nlml;  // per restart, after the search
  int evaluations = 0;
};

/// Packs [log l_1.., log sf2] per base kernel then log noise.
VectorXd pack_hyperparams(const CompositeKernel& kernel, double noise_variance);
void unpack_hyperparams(const VectorXd& theta, CompositeKernel& kernel, double& noise_variance,
                        double noise_floor);

/// Multi-restart simplex search over log-parameters minimizing nlml.
/// `shape` supplies the number of base kernels and the region id.
HyperOptResult optimize_hyperparams(const CompositeKernel& shape, const Eigen::Ref<const MatrixXd>& X,
                                    const Eigen::Ref<const MatrixXd>& Y,
                                    const Eigen::Ref<const VectorXd>& omega,
                                    const HyperOptConfig& config);

/// Evenly spaced column indices, at most `max_points` of them.
std::vector<Eigen::Index> stride_subsample(Eigen::Index n, int max_points);

} // namespace switchsafe
