#pragma once

#include "switchsafe/certificates.hpp"
#include "switchsafe/conic_solver.hpp"
#include "switchsafe/gp_regression.hpp"
#include "switchsafe/residual_learning.hpp"
#include "switchsafe/switching_plant.hpp"

namespace switchsafe {

/// grad V . f, grad V . g, grad h . f, grad h . g at x.
LieTerms nominal_lie_terms(const ControlAffineField& field, const CertificatePair& certs, const VectorXd& x);

/// Cone data of one certificate: ||A u + b|| <= c u + d (+ slack for the CLF).
struct CBFConeData {
  MatrixXd A;      // (m+1) x m
  VectorXd b;      // m+1
  RowVectorXd c;   // 1 x m
  double d = 0.0;

  int control_dim() const { return static_cast<int>(c.size()); }
  /// c u + d - ||A u + b||; non-negative when u satisfies the cone.
  double margin(const VectorXd& u) const;
};

/// Upper-triangular L with L^T L = Sigma. Falls back to a clamped eigen
/// square root for semidefinite input; throws NumericalError when Sigma has an
/// eigenvalue below -1e-10 * max(|eig|, round_off_scale) or is not finite.
/// Posterior covariances pass their largest prior variance as round_off_scale,
/// since the subtraction that forms them loses precision relative to the prior.
MatrixXd matrix_sqrt(const MatrixXd& Sigma, double round_off_scale = 0.0);

/// Lfh + Lgh u + (mu . y) - beta sqrt(y^T Sigma y) + gamma h(x) >= 0, y = [1, u].
CBFConeData build_cbf_cone(const VectorXd& x, const AffinePosterior& posterior_h, double beta, const LieTerms& lie,
                           const CertificatePair& certs);

/// LfV + LgV u + (mu . y) + beta sqrt(y^T Sigma y) + lambda V(x) <= d_slack, written as
/// ||A u + b|| <= c u + d + d_slack.
CBFConeData build_clf_cone(const VectorXd& x, const AffinePosterior& posterior_V, double beta, const LieTerms& lie,
                           const CertificatePair& certs);

/// Decision vector z = [u, d_slack, t]; minimizes t subject to the epigraph
/// ||[u; sqrt(rho) d_slack]|| <= t, the CLF cone and the CBF cone.
SOCPProblem assemble_socp(const CBFConeData& clf, const CBFConeData& cbf, const CertificatePair& certs);

/// Everything the controller computed at one state.
struct SafetyProgram {
  int region = 0;
  double beta = 0.0;
  AffinePosterior posterior_V;
  AffinePosterior posterior_h;
  LieTerms lie;
  CBFConeData clf;
  CBFConeData cbf;
  SOCPProblem problem;
};

/// Program at x using the posteriors of the region containing x.
SafetyProgram assemble_socp(const VectorXd& x, const BatchMOGPModel& model, const CertificatePair& certs,
                            const NominalModel& nominal);

/// Same program for fixed posteriors (no region lookup).
SafetyProgram assemble_socp(const VectorXd& x, const AffinePosterior& posterior_V, const AffinePosterior& posterior_h,
                            double beta, const CertificatePair& certs, const NominalModel& nominal);

/// S = [[b^T b - d^2, b^T A - d c], [A^T b - c^T d, A^T A - c^T c]].
MatrixXd feasibility_matrix(const CBFConeData& cone);

/// True iff c u + d >= 0 and [1, u^T] S [1; u] <= 0.
bool feasibility_conditions(const VectorXd& u, const CBFConeData& cone);

/// 1 - phi Sigma^{-1} phi^T / beta^2 with phi = [d, c]; positive means no input
/// satisfies the cone. Returns -inf for beta = 0 and phi != 0.
double necessary_condition(const CBFConeData& cone, const MatrixXd& Sigma, double beta);

struct SufficientResult {
  bool holds = false;
  double lambda_max = 0.0;
  VectorXd witness;  // an input satisfying the cone when holds is true
};

/// Largest eigenvalue of A^T A - c^T c. When negative, scales the top
/// eigenvector until the cone is satisfied and reports that input.
SufficientResult sufficient_condition(const CBFConeData& cone);

enum class Verdict { ProvablyInfeasible, ProvablyFeasible, Indeterminate };

std::string to_string(Verdict v);

struct FeasibilityReport {
  double necessary_lhs = 0.0;
  MatrixXd S;
  double lambda_max_S3 = 0.0;
  bool sufficient_holds = false;
  VectorXd witness;
  Verdict verdict = Verdict::Indeterminate;
};

FeasibilityReport feasibility_report(const CBFConeData& cone, const MatrixXd& Sigma, double beta);

} // namespace switchsafe
