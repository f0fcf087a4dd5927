#pragma once

#include <Eigen/Dense>
#include <functional>

namespace switchsafe {

using Eigen::VectorXd;

/// A scalar function of the state together with its gradient.
struct ScalarField {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;
};

/// CLF V, CBF h and the gains of the min-norm program.
///
/// The class-K function is alpha(h) = gamma * h.
struct CertificatePair {
  ScalarField V;
  ScalarField h;
  double lambda = 1.0;  // CLF decay rate
  double gamma = 1.0;   // CBF class-K slope
  double rho = 100.0;   // slack weight in |u|^2 + rho d^2

  double alpha(double hx) const { return gamma * hx; }
  void validate() const;
};

} // namespace switchsafe
