#include "switchsafe/safety_filter.hpp"

#include "switchsafe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace switchsafe {

void CertificatePair::validate() const {
  if (!V.value || !V.gradient || !h.value || !h.gradient) {
    throw std::invalid_argument("certificates need values and gradients for V and h");
  }
  if (!(lambda > 0.0)) throw std::invalid_argument("CLF rate lambda must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("CBF slope gamma must be positive");
  if (!(rho > 0.0)) throw std::invalid_argument("slack weight rho must be positive");
}

LieTerms nominal_lie_terms(const ControlAffineField& field, const CertificatePair& certs, const VectorXd& x) {
  const VectorXd f = field.f(x);
  const MatrixXd g = field.g(x);
  const VectorXd gV = certs.V.gradient(x);
  const VectorXd gh = certs.h.gradient(x);
  LieTerms lie;
  lie.LfV = gV.dot(f);
  lie.LgV = gV.transpose() * g;
  lie.Lfh = gh.dot(f);
  lie.Lgh = gh.transpose() * g;
  return lie;
}

double CBFConeData::margin(const VectorXd& u) const {
  const double lin = c.dot(u) + d;
  return lin - (A * u + b).norm();
}

MatrixXd matrix_sqrt(const MatrixXd& Sigma, double round_off_scale) {
  if (Sigma.rows() != Sigma.cols()) throw std::invalid_argument("matrix_sqrt: matrix must be square");
  if (!Sigma.allFinite()) throw NumericalError("matrix_sqrt: non-finite covariance");
  const MatrixXd S = 0.5 * (Sigma + Sigma.transpose());
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() == Eigen::Success) return llt.matrixU();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  const VectorXd ev = es.eigenvalues();
  const double scale = std::max({ev.cwiseAbs().maxCoeff(), round_off_scale, 1e-300});
  if (ev.minCoeff() < -1e-10 * scale) {
    throw NumericalError("matrix_sqrt: covariance has a negative eigenvalue");
  }
  const VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  return root.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

// beta * [l1, L^m] with L^T L = Sigma, split by columns.
void uncertainty_terms(const AffinePosterior& post, double beta, int m, CBFConeData& cone) {
  if (post.Sigma.rows() != m + 1 || post.mu.size() != m + 1) {
    throw std::invalid_argument("posterior size does not match the control dimension");
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  if (beta == 0.0) {
    cone.A = MatrixXd::Zero(m + 1, m);
    cone.b = VectorXd::Zero(m + 1);
    return;
  }
  const double prior = post.prior_variance.size() > 0 ? post.prior_variance.cwiseAbs().maxCoeff() : 0.0;
  const MatrixXd L = matrix_sqrt(post.Sigma, prior);
  cone.b = beta * L.col(0);
  cone.A = beta * L.rightCols(m);
}

} // namespace

CBFConeData build_cbf_cone(const VectorXd& x, const AffinePosterior& posterior_h, double beta, const LieTerms& lie,
                           const CertificatePair& certs) {
  const int m = static_cast<int>(lie.Lgh.size());
  CBFConeData cone;
  uncertainty_terms(posterior_h, beta, m, cone);
  cone.c = lie.Lgh + posterior_h.mu.tail(m);
  cone.d = lie.Lfh + posterior_h.mu(0) + certs.alpha(certs.h.value(x));
  return cone;
}

CBFConeData build_clf_cone(const VectorXd& x, const AffinePosterior& posterior_V, double beta, const LieTerms& lie,
                           const CertificatePair& certs) {
  const int m = static_cast<int>(lie.LgV.size());
  CBFConeData cone;
  uncertainty_terms(posterior_V, beta, m, cone);
  cone.c = -(lie.LgV + posterior_V.mu.tail(m));
  cone.d = -(lie.LfV + posterior_V.mu(0) + certs.lambda * certs.V.value(x));
  return cone;
}

SOCPProblem assemble_socp(const CBFConeData& clf, const CBFConeData& cbf, const CertificatePair& certs) {
  const Eigen::Index m = cbf.c.size();
  if (clf.c.size() != m) throw std::invalid_argument("assemble_socp: cone widths differ");
  const Eigen::Index nz = m + 2;
  SOCPProblem prob;
  prob.f = VectorXd::Zero(nz);
  prob.f(nz - 1) = 1.0;

  SOCConstraint epi;
  epi.M = MatrixXd::Zero(m + 1, nz);
  epi.M.topLeftCorner(m, m).setIdentity();
  epi.M(m, m) = std::sqrt(certs.rho);
  epi.n = VectorXd::Zero(m + 1);
  epi.p = VectorXd::Zero(nz);
  epi.p(nz - 1) = 1.0;

  SOCConstraint V;
  V.M = MatrixXd::Zero(m + 1, nz);
  V.M.leftCols(m) = clf.A;
  V.n = clf.b;
  V.p = VectorXd::Zero(nz);
  V.p.head(m) = clf.c.transpose();
  V.p(m) = 1.0;
  V.q = clf.d;

  SOCConstraint H;
  H.M = MatrixXd::Zero(m + 1, nz);
  H.M.leftCols(m) = cbf.A;
  H.n = cbf.b;
  H.p = VectorXd::Zero(nz);
  H.p.head(m) = cbf.c.transpose();
  H.q = cbf.d;

  prob.cones = {epi, V, H};
  return prob;
}

SafetyProgram assemble_socp(const VectorXd& x, const AffinePosterior& posterior_V, const AffinePosterior& posterior_h,
                            double beta, const CertificatePair& certs, const NominalModel& nominal) {
  SafetyProgram sp;
  sp.beta = beta;
  sp.posterior_V = posterior_V;
  sp.posterior_h = posterior_h;
  sp.lie = nominal_lie_terms(nominal, certs, x);
  sp.clf = build_clf_cone(x, posterior_V, beta, sp.lie, certs);
  sp.cbf = build_cbf_cone(x, posterior_h, beta, sp.lie, certs);
  sp.problem = assemble_socp(sp.clf, sp.cbf, certs);
  return sp;
}

SafetyProgram assemble_socp(const VectorXd& x, const BatchMOGPModel& model, const CertificatePair& certs,
                            const NominalModel& nominal) {
  const ResidualQuery qV = query_residual(model, x, ResidualTarget::V);
  const ResidualQuery qh = query_residual(model, x, ResidualTarget::h);
  SafetyProgram sp = assemble_socp(x, qV.posterior, qh.posterior, qh.beta, certs, nominal);
  sp.region = qh.region;
  return sp;
}

MatrixXd feasibility_matrix(const CBFConeData& cone) {
  const Eigen::Index m = cone.c.size();
  MatrixXd S(m + 1, m + 1);
  S(0, 0) = cone.b.squaredNorm() - cone.d * cone.d;
  const RowVectorXd s2 = cone.b.transpose() * cone.A - cone.d * cone.c;
  S.block(0, 1, 1, m) = s2;
  S.block(1, 0, m, 1) = s2.transpose();
  S.block(1, 1, m, m) = cone.A.transpose() * cone.A - cone.c.transpose() * cone.c;
  return S;
}

bool feasibility_conditions(const VectorXd& u, const CBFConeData& cone) {
  const double lin = cone.c.dot(u) + cone.d;
  if (lin < 0.0) return false;
  const VectorXd y = augment(u);
  return y.dot(feasibility_matrix(cone) * y) <= 0.0;
}

double necessary_condition(const CBFConeData& cone, const MatrixXd& Sigma, double beta) {
  const Eigen::Index m = cone.c.size();
  if (Sigma.rows() != m + 1 || Sigma.cols() != m + 1) {
    throw std::invalid_argument("necessary_condition: Sigma size does not match the cone");
  }
  RowVectorXd phi(m + 1);
  phi(0) = cone.d;
  phi.tail(m) = cone.c;
  if (beta == 0.0) {
    return phi.isZero(0.0) ? 1.0 : -std::numeric_limits<double>::infinity();
  }
  Eigen::LLT<MatrixXd> llt(0.5 * (Sigma + Sigma.transpose()));
  if (llt.info() != Eigen::Success) throw NumericalError("necessary_condition: Sigma is not positive definite");
  const double quad = phi.dot(llt.solve(phi.transpose()));
  return 1.0 - quad / (beta * beta);
}

SufficientResult sufficient_condition(const CBFConeData& cone) {
  const MatrixXd S3 = cone.A.transpose() * cone.A - cone.c.transpose() * cone.c;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S3);
  SufficientResult res;
  const Eigen::Index m = S3.rows();
  res.lambda_max = es.eigenvalues()(m - 1);
  res.holds = res.lambda_max < 0.0;
  if (!res.holds) return res;
  VectorXd e = es.eigenvectors().col(m - 1);
  if (cone.c.dot(e) < 0.0) e = -e;
  for (double a = 1.0; a < 1e300; a *= 2.0) {
    const VectorXd u = a * e;
    if (cone.margin(u) >= 0.0) {
      res.witness = u;
      break;
    }
  }
  return res;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::ProvablyInfeasible: return "provably-infeasible";
    case Verdict::ProvablyFeasible: return "provably-feasible";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

FeasibilityReport feasibility_report(const CBFConeData& cone, const MatrixXd& Sigma, double beta) {
  FeasibilityReport rep;
  rep.S = feasibility_matrix(cone);
  rep.necessary_lhs = necessary_condition(cone, Sigma, beta);
  const SufficientResult suff = sufficient_condition(cone);
  rep.lambda_max_S3 = suff.lambda_max;
  rep.sufficient_holds = suff.holds;
  rep.witness = suff.witness;
  if (rep.necessary_lhs > 0.0) rep.verdict = Verdict::ProvablyInfeasible;
  else if (rep.sufficient_holds) rep.verdict = Verdict::ProvablyFeasible;
  return rep;
}

} // namespace switchsafe
