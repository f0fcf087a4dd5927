#pragma once

#include "switchsafe/certificates.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace switchsafe {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// ||M z + n||_2 <= p^T z + q. A zero-row M is a plain linear inequality.
struct SOCConstraint {
  MatrixXd M;
  VectorXd n;
  VectorXd p;
  double q = 0.0;

  /// ||M z + n|| - (p^T z + q); non-positive when satisfied.
  double residual(const VectorXd& z) const;
};

/// min f^T z subject to a list of second-order cone constraints.
struct SOCPProblem {
  VectorXd f;
  std::vector<SOCConstraint> cones;

  Eigen::Index dim() const { return f.size(); }
  void validate() const;
  double max_residual(const VectorXd& z) const;
};

enum class SolverStatus { Optimal, Infeasible, MaxIterations, NumericalFailure };

std::string to_string(SolverStatus status);
SolverStatus solver_status_from_string(const std::string& text);

struct SolverSettings {
  int max_iterations = 100;
  double gap_tol = 1e-8;       // absolute duality gap
  double rel_gap_tol = 1e-9;   // relative duality gap
  double feas_tol = 1e-9;
  double cone_tol = 1e-8;      // absolute violation allowed at an optimal point
  double step_fraction = 0.99;
  int equilibration_passes = 10;
};

struct SOCPSolution {
  SolverStatus status = SolverStatus::NumericalFailure;
  VectorXd z;
  double objective = 0.0;
  int iterations = 0;
  double max_residual = 0.0;
  std::string message;
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra correction, dense linear algebra. Never throws on infeasible or
/// badly conditioned problems; the status says what happened.
SOCPSolution solve_socp(const SOCPProblem& problem, const SolverSettings& settings = {});

/// Lie derivatives of V and h along a control-affine field at a state.
struct LieTerms {
  double LfV = 0.0;
  RowVectorXd LgV;
  double Lfh = 0.0;
  RowVectorXd Lgh;
};

struct QPResult {
  VectorXd u;
  double d = 0.0;
  SolverStatus status = SolverStatus::NumericalFailure;
  int iterations = 0;
};

/// Certainty-equivalent CLF-CBF QP
///   min |u|^2 + rho d^2  s.t.  LfV + LgV u + lambda V <= d,  Lfh + Lgh u + gamma h >= 0
/// solved as an SOCP whose two constraints are degenerate (linear) cones.
SOCPProblem nominal_qp_problem(const VectorXd& x, const CertificatePair& certs, const LieTerms& lie);
QPResult solve_nominal_qp(const VectorXd& x, const CertificatePair& certs, const LieTerms& lie,
                          const SolverSettings& settings = {});

/// Text dump of (f, cones) with round-trip precision.
std::string dump_problem(const SOCPProblem& problem);
SOCPProblem parse_problem(const std::string& text);

} // namespace switchsafe
