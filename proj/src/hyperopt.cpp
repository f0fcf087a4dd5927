#include "switchsafe/errors.hpp"
#include "switchsafe/gp_regression.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

namespace switchsafe {

void HyperOptConfig::validate() const {
  if (restarts < 1 && initial_points.empty()) {
    throw std::invalid_argument("hyperopt: restarts must be >= 1");
  }
  if (max_iterations < 1) throw std::invalid_argument("hyperopt: max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("hyperopt: tolerance must be positive");
  if (!(noise_floor > 0.0)) throw std::invalid_argument("hyperopt: noise floor must be positive");
  if (max_points < 2) throw std::invalid_argument("hyperopt: max_points must be >= 2");
}

VectorXd pack_hyperparams(const CompositeKernel& kernel, double noise_variance) {
  const int d = kernel.state_dim();
  const int p = kernel.augmented_dim();
  VectorXd theta(p * (d + 1) + 1);
  int k = 0;
  for (const auto& b : kernel.base) {
    for (int j = 0; j < d; ++j) theta(k++) = std::log(b.lengthscales(j));
    theta(k++) = std::log(b.signal_variance);
  }
  theta(k) = std::log(noise_variance);
  return theta;
}

void unpack_hyperparams(const VectorXd& theta, CompositeKernel& kernel, double& noise_variance,
                        double noise_floor) {
  const int d = kernel.state_dim();
  const int p = kernel.augmented_dim();
  if (theta.size() != p * (d + 1) + 1) {
    throw std::invalid_argument("unpack_hyperparams: parameter vector has wrong length");
  }
  int k = 0;
  for (auto& b : kernel.base) {
    for (int j = 0; j < d; ++j) b.lengthscales(j) = std::exp(theta(k++));
    b.signal_variance = std::exp(theta(k++));
  }
  noise_variance = std::max(noise_floor, std::exp(theta(k)));
}

std::vector<Eigen::Index> stride_subsample(Eigen::Index n, int max_points) {
  std::vector<Eigen::Index> idx;
  if (n <= max_points) {
    idx.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
  }
  idx.reserve(static_cast<std::size_t>(max_points));
  for (int i = 0; i < max_points; ++i) {
    idx.push_back(static_cast<Eigen::Index>(std::llround(
        static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(max_points - 1))));
  }
  return idx;
}

namespace {

constexpr double kLogBound = 40.0;

struct Objective {
  CompositeKernel kernel;
  const MatrixXd* X;
  const MatrixXd* Y;
  const VectorXd* omega;
  const HyperOptConfig* config;
  int evaluations = 0;

  double operator()(const VectorXd& theta) {
    ++evaluations;
    if ((theta.array().abs() > kLogBound).any() || !theta.allFinite()) {
      return std::numeric_limits<double>::infinity();
    }
    double noise = 0.0;
    unpack_hyperparams(theta, kernel, noise, config->noise_floor);
    if (!config->optimize_noise) noise = config->fixed_noise;
    try {
      const double v = nlml(kernel, *X, *Y, *omega, noise);
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  }
};

double gsl_objective(const gsl_vector* v, void* params) {
  auto* obj = static_cast<Objective*>(params);
  VectorXd theta(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) theta(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
  const double f = (*obj)(theta);
  // The simplex method tolerates large values better than inf.
  return std::isfinite(f) ? f : 1e300;
}

struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

struct LocalResult {
  VectorXd theta;
  double value;
};

LocalResult nelder_mead(Objective& obj, const VectorXd& start, const HyperOptConfig& config) {
  const std::size_t n = static_cast<std::size_t>(start.size());
  std::unique_ptr<gsl_vector, GslVectorDeleter> x0(gsl_vector_alloc(n));
  std::unique_ptr<gsl_vector, GslVectorDeleter> step(gsl_vector_alloc(n));
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x0.get(), i, start(static_cast<Eigen::Index>(i)));
  }
  gsl_vector_set_all(step.get(), 1.0);

  gsl_multimin_function fn{&gsl_objective, n, &obj};
  std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
  gsl_multimin_fminimizer_set(s.get(), &fn, x0.get(), step.get());

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    const double size = gsl_multimin_fminimizer_size(s.get());
    if (gsl_multimin_test_size(size, config.tolerance) == GSL_SUCCESS) break;
  }
  LocalResult out;
  out.theta.resize(start.size());
  for (std::size_t i = 0; i < n; ++i) {
    out.theta(static_cast<Eigen::Index>(i)) = gsl_vector_get(s->x, i);
  }
  out.value = obj(out.theta);
  return out;
}

double safe_variance(const VectorXd& v) {
  if (v.size() < 2) return 1.0;
  const double var = (v.array() - v.mean()).square().mean();
  return var > 0.0 && std::isfinite(var) ? var : 1.0;
}

} // namespace

HyperOptResult optimize_hyperparams(const CompositeKernel& shape, const Eigen::Ref<const MatrixXd>& X,
                                    const Eigen::Ref<const MatrixXd>& Y,
                                    const Eigen::Ref<const VectorXd>& omega,
                                    const HyperOptConfig& config) {
  config.validate();
  shape.validate();
  if (X.cols() < 1 || X.cols() != Y.cols() || X.cols() != omega.size()) {
    throw std::invalid_argument("optimize_hyperparams: needs matching, non-empty data");
  }
  gsl_set_error_handler_off();

  const auto idx = stride_subsample(X.cols(), config.max_points);
  MatrixXd Xs(X.rows(), static_cast<Eigen::Index>(idx.size()));
  MatrixXd Ys(Y.rows(), static_cast<Eigen::Index>(idx.size()));
  VectorXd ws(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    Xs.col(c) = X.col(idx[k]);
    Ys.col(c) = Y.col(idx[k]);
    ws(c) = omega(idx[k]);
  }

  const int d = shape.state_dim();
  const int p = shape.augmented_dim();

  // Centers of the initial ranges come from the data scales.
  const double omega_var = safe_variance(ws);
  VectorXd log_spread(d);
  for (int j = 0; j < d; ++j) {
    const double var = safe_variance(Xs.row(j).transpose());
    log_spread(j) = 0.5 * std::log(var);
  }
  VectorXd log_signal(p);
  for (int i = 0; i < p; ++i) {
    double m2 = Ys.row(i).array().square().mean();
    if (!(m2 > 0.0)) m2 = 1.0;
    log_signal(i) = std::log(omega_var / (static_cast<double>(p) * m2));
  }
  const double log_noise_center = std::log(omega_var);

  auto make_start = [&](auto&& draw) {
    VectorXd theta(p * (d + 1) + 1);
    int k = 0;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < d; ++j) {
        theta(k++) = log_spread(j) + draw(config.log_lengthscale_lo, config.log_lengthscale_hi);
      }
      theta(k++) = log_signal(i) + draw(config.log_signal_lo, config.log_signal_hi);
    }
    theta(k) = log_noise_center + draw(config.log_noise_lo, config.log_noise_hi);
    return theta;
  };

  std::vector<VectorXd> starts = config.initial_points;
  if (starts.empty()) {
    starts.push_back(make_start([](double lo, double hi) { return 0.5 * (lo + hi); }));
    std::mt19937_64 rng(config.seed);
    for (int r = 1; r < config.restarts; ++r) {
      starts.push_back(make_start([&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
      }));
    }
  }

  Objective obj{shape, &Xs, &Ys, &ws, &config};
  HyperOptResult result;
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_theta;
  for (const auto& start : starts) {
    if (start.size() != p * (d + 1) + 1) {
      throw std::invalid_argument("optimize_hyperparams: initial point has wrong length");
    }
    const double f0 = obj(start);
    LocalResult local = nelder_mead(obj, start, config);
    // The simplex never returns a point worse than its best vertex, but the
    // start itself is kept as a candidate so the result is never above it.
    if (!(local.value <= f0)) {
      local.theta = start;
      local.value = f0;
    }
    result.start_nlml.push_back(f0);
    result.final_nlml.push_back(local.value);
    if (local.value < best) {
      best = local.value;
      best_theta = local.theta;
    }
  }
  result.evaluations = obj.evaluations;
  if (!std::isfinite(best)) {
    std::ostringstream msg;
    msg << "hyperparameter search failed on all " << starts.size()
        << " restarts (N=" << Xs.cols() << ", omega variance " << omega_var << ")";
    throw OptimizationError(msg.str());
  }
  result.kernel = shape;
  unpack_hyperparams(best_theta, result.kernel, result.noise_variance, config.noise_floor);
  if (!config.optimize_noise) result.noise_variance = config.fixed_noise;
  result.nlml = best;
  return result;
}

} // namespace switchsafe
