#include "switchsafe/conic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace switchsafe {

double SOCConstraint::residual(const VectorXd& z) const {
  const double lhs = M.rows() > 0 ? (M * z + n).norm() : 0.0;
  return lhs - (p.dot(z) + q);
}

void SOCPProblem::validate() const {
  if (f.size() < 1) throw std::invalid_argument("SOCP: decision dimension must be >= 1");
  for (std::size_t i = 0; i < cones.size(); ++i) {
    const auto& c = cones[i];
    if (c.M.cols() != f.size() && c.M.rows() > 0) {
      throw std::invalid_argument("SOCP: cone " + std::to_string(i) + " has wrong column count");
    }
    if (c.p.size() != f.size()) {
      throw std::invalid_argument("SOCP: cone " + std::to_string(i) + " has wrong p length");
    }
    if (c.n.size() != c.M.rows()) {
      throw std::invalid_argument("SOCP: cone " + std::to_string(i) + " has mismatched n");
    }
  }
}

double SOCPProblem::max_residual(const VectorXd& z) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : cones) worst = std::max(worst, c.residual(z));
  return cones.empty() ? 0.0 : worst;
}

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Optimal: return "optimal";
    case SolverStatus::Infeasible: return "infeasible";
    case SolverStatus::MaxIterations: return "max-iterations";
    case SolverStatus::NumericalFailure: return "numerical-failure";
  }
  return "numerical-failure";
}

SolverStatus solver_status_from_string(const std::string& text) {
  if (text == "optimal") return SolverStatus::Optimal;
  if (text == "infeasible") return SolverStatus::Infeasible;
  if (text == "max-iterations") return SolverStatus::MaxIterations;
  if (text == "numerical-failure") return SolverStatus::NumericalFailure;
  throw std::invalid_argument("unknown solver status '" + text + "'");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Block of the slack vector: dim 1 is the nonnegative orthant.
struct ConeBlock {
  Eigen::Index offset = 0;
  Eigen::Index dim = 1;
};

// min c^T x  s.t.  G x + s = h,  s in K.
struct ConicForm {
  MatrixXd G;
  VectorXd h;
  VectorXd c;
  std::vector<ConeBlock> blocks;
};

ConicForm to_conic(const SOCPProblem& problem) {
  const Eigen::Index n = problem.dim();
  std::vector<std::vector<Eigen::Index>> kept(problem.cones.size());
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < problem.cones.size(); ++i) {
    const auto& cone = problem.cones[i];
    for (Eigen::Index r = 0; r < cone.M.rows(); ++r) {
      // rows of [M n] that are identically zero add nothing to the norm
      if (cone.M.row(r).cwiseAbs().maxCoeff() > 0.0 || cone.n(r) != 0.0) kept[i].push_back(r);
    }
    total += 1 + static_cast<Eigen::Index>(kept[i].size());
  }
  ConicForm form;
  form.G = MatrixXd::Zero(total, n);
  form.h = VectorXd::Zero(total);
  form.c = problem.f;
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < problem.cones.size(); ++i) {
    const auto& cone = problem.cones[i];
    ConeBlock b{off, 1 + static_cast<Eigen::Index>(kept[i].size())};
    form.G.row(off) = -cone.p.transpose();
    form.h(off) = cone.q;
    for (std::size_t k = 0; k < kept[i].size(); ++k) {
      const auto row = off + 1 + static_cast<Eigen::Index>(k);
      form.G.row(row) = -cone.M.row(kept[i][k]);
      form.h(row) = cone.n(kept[i][k]);
    }
    form.blocks.push_back(b);
    off += b.dim;
  }
  return form;
}

double jdet(const VectorXd& v, const ConeBlock& b) {
  const double v0 = v(b.offset);
  if (b.dim == 1) return v0;
  const double nv = v.segment(b.offset + 1, b.dim - 1).norm();
  return (v0 - nv) * (v0 + nv);
}

// Smallest alpha >= 0 with v + alpha dv leaving the cone (inf if it never does).
double max_step(const VectorXd& v, const VectorXd& dv, const std::vector<ConeBlock>& blocks) {
  double amax = kInf;
  for (const auto& b : blocks) {
    if (b.dim == 1) {
      if (dv(b.offset) < 0.0) amax = std::min(amax, -v(b.offset) / dv(b.offset));
      continue;
    }
    const double v0 = v(b.offset);
    const double d0 = dv(b.offset);
    const auto v1 = v.segment(b.offset + 1, b.dim - 1);
    const auto d1 = dv.segment(b.offset + 1, b.dim - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double bb = v0 * d0 - v1.dot(d1);
    const double cc = jdet(v, b);
    if (!(cc > 0.0) || v0 <= 0.0) return 0.0;
    double root = kInf;
    auto consider = [&root](double r) {
      if (r > 0.0 && std::isfinite(r)) root = std::min(root, r);
    };
    const double scale = std::max({std::abs(a), std::abs(bb), 1e-300});
    if (std::abs(a) <= 1e-14 * scale) {
      if (bb < 0.0) consider(-cc / (2.0 * bb));
    } else {
      const double disc = bb * bb - a * cc;
      if (disc >= 0.0) {
        const double q = -(bb + std::copysign(std::sqrt(disc), bb));
        if (q != 0.0) {
          consider(q / a);
          consider(cc / q);
        }
      }
    }
    // The cone's first coordinate must stay positive along the way.
    if (d0 < 0.0) root = std::min(root, -v0 / d0);
    amax = std::min(amax, root);
  }
  return amax;
}

VectorXd unit_e(Eigen::Index total, const std::vector<ConeBlock>& blocks) {
  VectorXd e = VectorXd::Zero(total);
  for (const auto& b : blocks) e(b.offset) = 1.0;
  return e;
}

VectorXd jordan(const VectorXd& u, const VectorXd& v, const std::vector<ConeBlock>& blocks) {
  VectorXd out(u.size());
  for (const auto& b : blocks) {
    if (b.dim == 1) {
      out(b.offset) = u(b.offset) * v(b.offset);
      continue;
    }
    const auto u1 = u.segment(b.offset + 1, b.dim - 1);
    const auto v1 = v.segment(b.offset + 1, b.dim - 1);
    out(b.offset) = u.segment(b.offset, b.dim).dot(v.segment(b.offset, b.dim));
    out.segment(b.offset + 1, b.dim - 1) = u(b.offset) * v1 + v(b.offset) * u1;
  }
  return out;
}

// Solves lambda o x = d blockwise.
VectorXd jordan_div(const VectorXd& lambda, const VectorXd& d, const std::vector<ConeBlock>& blocks) {
  VectorXd out(d.size());
  for (const auto& b : blocks) {
    if (b.dim == 1) {
      out(b.offset) = d(b.offset) / lambda(b.offset);
      continue;
    }
    const double l0 = lambda(b.offset);
    const auto l1 = lambda.segment(b.offset + 1, b.dim - 1);
    const double d0 = d(b.offset);
    const auto d1 = d.segment(b.offset + 1, b.dim - 1);
    const double x0 = (l0 * d0 - l1.dot(d1)) / jdet(lambda, b);
    out(b.offset) = x0;
    out.segment(b.offset + 1, b.dim - 1) = (d1 - x0 * l1) / l0;
  }
  return out;
}

struct Scaling {
  MatrixXd W;
  MatrixXd Winv;
  VectorXd lambda;
};

// Nesterov-Todd scaling: symmetric W with W z = W^{-1} s = lambda.
Scaling nt_scaling(const VectorXd& s, const VectorXd& z, const std::vector<ConeBlock>& blocks) {
  const Eigen::Index total = s.size();
  Scaling sc;
  sc.W = MatrixXd::Zero(total, total);
  sc.Winv = MatrixXd::Zero(total, total);
  for (const auto& b : blocks) {
    if (b.dim == 1) {
      const double w = std::sqrt(s(b.offset) / z(b.offset));
      sc.W(b.offset, b.offset) = w;
      sc.Winv(b.offset, b.offset) = 1.0 / w;
      continue;
    }
    const Eigen::Index k = b.dim - 1;
    const double sr = std::sqrt(jdet(s, b));
    const double zr = std::sqrt(jdet(z, b));
    const VectorXd sb = s.segment(b.offset, b.dim) / sr;
    const VectorXd zb = z.segment(b.offset, b.dim) / zr;
    const double gam = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    const double w0 = (sb(0) + zb(0)) / (2.0 * gam);
    const VectorXd w1 = (sb.tail(k) - zb.tail(k)) / (2.0 * gam);
    const double eta = std::sqrt(sr / zr);
    MatrixXd inner = MatrixXd::Identity(k, k) + w1 * w1.transpose() / (1.0 + w0);
    auto Wb = sc.W.block(b.offset, b.offset, b.dim, b.dim);
    Wb(0, 0) = eta * w0;
    Wb.block(0, 1, 1, k) = eta * w1.transpose();
    Wb.block(1, 0, k, 1) = eta * w1;
    Wb.block(1, 1, k, k) = eta * inner;
    auto Wi = sc.Winv.block(b.offset, b.offset, b.dim, b.dim);
    Wi(0, 0) = w0 / eta;
    Wi.block(0, 1, 1, k) = -w1.transpose() / eta;
    Wi.block(1, 0, k, 1) = -w1 / eta;
    Wi.block(1, 1, k, k) = inner / eta;
  }
  sc.lambda = sc.W * z;
  return sc;
}

// Moves v into the interior of K by adding a multiple of e when needed.
void shift_into_cone(VectorXd& v, const std::vector<ConeBlock>& blocks) {
  double worst = -kInf;
  for (const auto& b : blocks) {
    const double v0 = v(b.offset);
    const double nv = b.dim == 1 ? 0.0 : v.segment(b.offset + 1, b.dim - 1).norm();
    worst = std::max(worst, nv - v0);
  }
  if (worst >= -1e-8) {
    const VectorXd e = unit_e(v.size(), blocks);
    v += (1.0 + std::max(worst, 0.0)) * e;
  }
}

struct Equilibration {
  VectorXd col;    // x_original = col .* x_scaled
  VectorXd row;    // per slack entry, constant within a cone block
};

Equilibration equilibrate(const ConicForm& form, int passes) {
  Equilibration eq{VectorXd::Ones(form.G.cols()), VectorXd::Ones(form.G.rows())};
  for (int pass = 0; pass < passes; ++pass) {
    const MatrixXd Gs = eq.row.asDiagonal() * form.G * eq.col.asDiagonal();
    for (Eigen::Index j = 0; j < Gs.cols(); ++j) {
      const double m = Gs.col(j).cwiseAbs().maxCoeff();
      if (m > 0.0) eq.col(j) /= std::sqrt(m);
    }
    const MatrixXd Gs2 = eq.row.asDiagonal() * form.G * eq.col.asDiagonal();
    for (const auto& b : form.blocks) {
      const double m = Gs2.middleRows(b.offset, b.dim).cwiseAbs().maxCoeff();
      if (m > 0.0) eq.row.segment(b.offset, b.dim) /= std::sqrt(m);
    }
  }
  eq.col = eq.col.cwiseMax(1e-8).cwiseMin(1e8);
  eq.row = eq.row.cwiseMax(1e-8).cwiseMin(1e8);
  return eq;
}

} // namespace

SOCPSolution solve_socp(const SOCPProblem& problem, const SolverSettings& settings) {
  SOCPSolution out;
  try {
    problem.validate();
  } catch (const std::invalid_argument& e) {
    out.message = e.what();
    return out;
  }
  const ConicForm orig = to_conic(problem);
  const Eigen::Index n = orig.G.cols();
  const Eigen::Index N = orig.G.rows();
  out.z = VectorXd::Zero(n);

  if (N == 0) {
    // No constraints: bounded only when the objective is zero.
    out.status = problem.f.isZero(0.0) ? SolverStatus::Optimal : SolverStatus::NumericalFailure;
    if (out.status != SolverStatus::Optimal) out.message = "unbounded: no constraints";
    return out;
  }

  const Equilibration eq = equilibrate(orig, settings.equilibration_passes);
  const MatrixXd G = eq.row.asDiagonal() * orig.G * eq.col.asDiagonal();
  const VectorXd h = eq.row.cwiseProduct(orig.h);
  const VectorXd c = eq.col.cwiseProduct(orig.c);
  const auto& blocks = orig.blocks;
  const double nu = static_cast<double>(blocks.size());
  const VectorXd e = unit_e(N, blocks);

  const double hnorm = orig.h.norm();
  const double cnorm = orig.c.norm();
  double pres = kInf, dres = kInf, gap = kInf, relgap = kInf;

  // Initial point: least-squares primal, least-norm dual, shifted into K.
  VectorXd x = G.colPivHouseholderQr().solve(h);
  VectorXd s = h - G * x;
  const MatrixXd GtG = G.transpose() * G;
  VectorXd z = -G * GtG.completeOrthogonalDecomposition().solve(c);
  shift_into_cone(s, blocks);
  shift_into_cone(z, blocks);
  double tau = 1.0;
  double kappa = 1.0;

  const Eigen::Index kdim = n + N + 1;
  MatrixXd K = MatrixXd::Zero(kdim, kdim);

  auto original_point = [&](double t) {
    return VectorXd(eq.col.cwiseProduct(x) / t);
  };

  out.status = SolverStatus::MaxIterations;
  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    out.iterations = iter;
    const VectorXd rx = G.transpose() * z + c * tau;
    const VectorXd rz = G * x + s - h * tau;
    const double rt = kappa + c.dot(x) + h.dot(z);

    // Convergence and certificates, measured in the original scaling.
    const VectorXd xo = eq.col.cwiseProduct(x);
    const VectorXd so = s.cwiseQuotient(eq.row);
    const VectorXd zo = z.cwiseProduct(eq.row);
    // Residuals relative to the size of the terms that produce them.
    const VectorXd Gx = orig.G * xo;
    const VectorXd Gtz = orig.G.transpose() * zo;
    pres = (Gx + so - orig.h * tau).norm() / tau / std::max({1.0, hnorm, Gx.norm() / tau});
    dres = (Gtz + orig.c * tau).norm() / tau / std::max({1.0, cnorm, Gtz.norm() / tau});
    const double pcost = orig.c.dot(xo) / tau;
    const double dcost = -orig.h.dot(zo) / tau;
    gap = s.dot(z) / (tau * tau);
    relgap = kInf;
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;
    if (pres < settings.feas_tol && dres < settings.feas_tol &&
        (gap < settings.gap_tol || relgap < settings.rel_gap_tol) &&
        problem.max_residual(xo / tau) <= settings.cone_tol) {
      out.status = SolverStatus::Optimal;
      break;
    }
    const double hz = orig.h.dot(zo);
    if (hz < 0.0 && (orig.G.transpose() * zo).norm() / -hz < settings.feas_tol) {
      out.status = SolverStatus::Infeasible;
      out.message = "primal infeasibility certificate found";
      break;
    }
    const double cx = orig.c.dot(xo);
    if (cx < 0.0 && (orig.G * xo + so).norm() / -cx < settings.feas_tol) {
      out.status = SolverStatus::NumericalFailure;
      out.message = "dual infeasible: the problem is unbounded below";
      break;
    }
    if (iter == settings.max_iterations) break;

    const Scaling sc = nt_scaling(s, z, blocks);
    const double mu = (s.dot(z) + tau * kappa) / (nu + 1.0);

    // Scaled system in (dx, W dz, dtau): the middle block is -I.
    const MatrixXd WiG = sc.Winv * G;
    const VectorXd Wih = sc.Winv * h;
    K.setZero();
    K.block(0, n, n, N) = WiG.transpose();
    K.block(0, n + N, n, 1) = c;
    K.block(n, 0, N, n) = WiG;
    K.block(n, n, N, N) = -MatrixXd::Identity(N, N);
    K.block(n, n + N, N, 1) = -Wih;
    K.block(n + N, 0, 1, n) = c.transpose();
    K.block(n + N, n, 1, N) = Wih.transpose();
    K(n + N, n + N) = -kappa / tau;
    const Eigen::FullPivLU<MatrixXd> lu(K);

    struct Direction {
      VectorXd dx, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto solve_direction = [&](double eta, const VectorXd& dsc, double dk) {
      const VectorXd q = jordan_div(sc.lambda, dsc, blocks);
      VectorXd rhs(kdim);
      rhs.head(n) = -eta * rx;
      rhs.segment(n, N) = -eta * (sc.Winv * rz) - q;
      rhs(n + N) = -eta * rt - dk / tau;
      VectorXd sol = lu.solve(rhs);
      for (int pass = 0; pass < 3; ++pass) sol += lu.solve(rhs - K * sol);
      Direction d;
      d.dx = sol.head(n);
      const VectorXd wdz = sol.segment(n, N);
      d.dz = sc.Winv * wdz;
      d.dtau = sol(n + N);
      d.ds = sc.W * (q - wdz);
      d.dkappa = (dk - kappa * d.dtau) / tau;
      return d;
    };
    auto step_length = [&](const Direction& d) {
      double a = std::min(max_step(s, d.ds, blocks), max_step(z, d.dz, blocks));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    const VectorXd ll = jordan(sc.lambda, sc.lambda, blocks);
    const Direction aff = solve_direction(1.0, -ll, -tau * kappa);
    if (!aff.dx.allFinite() || !aff.dz.allFinite() || !std::isfinite(aff.dtau)) {
      out.status = SolverStatus::NumericalFailure;
      out.message = "KKT solve produced non-finite values";
      break;
    }
    const double alpha_aff = std::min(1.0, step_length(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    const VectorXd corr = jordan(sc.Winv * aff.ds, sc.W * aff.dz, blocks);
    const VectorXd dsc = -ll - corr + sigma * mu * e;
    const double dk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    const Direction dir = solve_direction(1.0 - sigma, dsc, dk);
    if (!dir.dx.allFinite() || !dir.dz.allFinite() || !std::isfinite(dir.dtau)) {
      out.status = SolverStatus::NumericalFailure;
      out.message = "KKT solve produced non-finite values";
      break;
    }
    const double alpha = std::min(1.0, settings.step_fraction * step_length(dir));
    if (!(alpha > 1e-12)) {
      out.status = SolverStatus::NumericalFailure;
      out.message = "step length collapsed";
      break;
    }
    x += alpha * dir.dx;
    s += alpha * dir.ds;
    z += alpha * dir.dz;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
    if (!(tau > 0.0) || !(kappa > 0.0)) {
      out.status = SolverStatus::NumericalFailure;
      out.message = "homogeneous variables left the positive orthant";
      break;
    }
  }

  out.z = original_point(tau);
  if (out.status == SolverStatus::MaxIterations || out.status == SolverStatus::NumericalFailure) {
    // Breakdown close to the optimum: keep the point if it is verifiably good.
    const bool near = pres < 1e-6 && dres < 1e-6 && (gap < 1e-6 || relgap < 1e-6);
    if (near && out.z.allFinite() && problem.max_residual(out.z) <= 1e-7) {
      out.status = SolverStatus::Optimal;
      out.message = "reduced accuracy: " + out.message;
    }
  }
  if (out.status == SolverStatus::Infeasible) {
    out.z = VectorXd::Zero(n);
  }
  out.objective = problem.f.dot(out.z);
  out.max_residual = problem.max_residual(out.z);
  return out;
}

SOCPProblem nominal_qp_problem(const VectorXd& x, const CertificatePair& certs, const LieTerms& lie) {
  const Eigen::Index m = lie.LgV.size();
  if (lie.Lgh.size() != m) throw std::invalid_argument("nominal QP: Lie term widths differ");
  const Eigen::Index nz = m + 2;  // [u, d, t]
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
  epi.q = 0.0;

  // d - LgV u >= LfV + lambda V
  SOCConstraint clf;
  clf.M = MatrixXd(0, nz);
  clf.n = VectorXd(0);
  clf.p = VectorXd::Zero(nz);
  clf.p.head(m) = -lie.LgV.transpose();
  clf.p(m) = 1.0;
  clf.q = -(lie.LfV + certs.lambda * certs.V.value(x));

  // Lgh u + Lfh + gamma h >= 0
  SOCConstraint cbf;
  cbf.M = MatrixXd(0, nz);
  cbf.n = VectorXd(0);
  cbf.p = VectorXd::Zero(nz);
  cbf.p.head(m) = lie.Lgh.transpose();
  cbf.q = lie.Lfh + certs.alpha(certs.h.value(x));

  prob.cones = {epi, clf, cbf};
  return prob;
}

namespace {

// Re-solves min |u|^2 + rho d^2 with the constraints that are tight at w
// held as equalities. Returns nothing unless the result is feasible and every
// multiplier is non-negative.
std::optional<VectorXd> polish_qp(const SOCPProblem& prob, double rho, const VectorXd& w) {
  const Eigen::Index k = w.size();
  VectorXd hdiag = VectorXd::Ones(k);
  hdiag(k - 1) = rho;
  std::vector<const SOCConstraint*> lin;
  for (const auto& c : prob.cones) {
    if (c.M.rows() == 0) lin.push_back(&c);
  }
  std::vector<const SOCConstraint*> active;
  for (const auto* c : lin) {
    const double slack = c->p.head(k).dot(w) + c->q;
    const double scale = 1.0 + std::abs(c->q) + c->p.head(k).cwiseAbs().dot(w.cwiseAbs());
    if (slack <= 1e-6 * scale) active.push_back(c);
  }
  const Eigen::Index na = static_cast<Eigen::Index>(active.size());
  MatrixXd K = MatrixXd::Zero(k + na, k + na);
  VectorXd rhs = VectorXd::Zero(k + na);
  K.topLeftCorner(k, k) = (2.0 * hdiag).asDiagonal();
  for (Eigen::Index i = 0; i < na; ++i) {
    K.block(0, k + i, k, 1) = -active[static_cast<std::size_t>(i)]->p.head(k);
    K.block(k + i, 0, 1, k) = active[static_cast<std::size_t>(i)]->p.head(k).transpose();
    rhs(k + i) = -active[static_cast<std::size_t>(i)]->q;
  }
  Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) return std::nullopt;
  const VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite() || (sol.tail(na).array() < 0.0).any()) return std::nullopt;
  const VectorXd wp = sol.head(k);
  for (const auto* c : lin) {
    const double scale = 1.0 + std::abs(c->q) + c->p.head(k).cwiseAbs().dot(wp.cwiseAbs());
    if (c->p.head(k).dot(wp) + c->q < -1e-12 * scale) return std::nullopt;
  }
  return wp;
}

} // namespace

QPResult solve_nominal_qp(const VectorXd& x, const CertificatePair& certs, const LieTerms& lie,
                          const SolverSettings& settings) {
  const SOCPProblem prob = nominal_qp_problem(x, certs, lie);
  const SOCPSolution sol = solve_socp(prob, settings);
  const Eigen::Index m = lie.LgV.size();
  QPResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  VectorXd w = sol.z.head(m + 1);
  if (sol.status == SolverStatus::Optimal) {
    // A feasible point with non-negative multipliers satisfies KKT, so it is the optimum.
    if (auto p = polish_qp(prob, certs.rho, w)) w = *p;
  }
  res.u = w.head(m);
  res.d = w(m);
  return res;
}

std::string dump_problem(const SOCPProblem& problem) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "socp 1\n";
  os << "dim " << problem.dim() << "\n";
  os << "f";
  for (Eigen::Index i = 0; i < problem.f.size(); ++i) os << ' ' << problem.f(i);
  os << "\ncones " << problem.cones.size() << "\n";
  for (const auto& c : problem.cones) {
    os << "cone " << c.M.rows() << "\n";
    os << "q " << c.q << "\n";
    os << "p";
    for (Eigen::Index i = 0; i < c.p.size(); ++i) os << ' ' << c.p(i);
    os << "\nn";
    for (Eigen::Index i = 0; i < c.n.size(); ++i) os << ' ' << c.n(i);
    os << "\n";
    for (Eigen::Index r = 0; r < c.M.rows(); ++r) {
      os << "M";
      for (Eigen::Index j = 0; j < c.M.cols(); ++j) os << ' ' << c.M(r, j);
      os << "\n";
    }
  }
  return os.str();
}

namespace {

void expect(std::istream& is, const std::string& word) {
  std::string tok;
  if (!(is >> tok) || tok != word) {
    throw std::invalid_argument("parse_problem: expected '" + word + "', got '" + tok + "'");
  }
}

double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::invalid_argument("parse_problem: unexpected end of input");
  std::size_t used = 0;
  const double v = std::stod(tok, &used);
  if (used != tok.size()) throw std::invalid_argument("parse_problem: bad number '" + tok + "'");
  return v;
}

} // namespace

SOCPProblem parse_problem(const std::string& text) {
  std::istringstream is(text);
  expect(is, "socp");
  int version = 0;
  if (!(is >> version) || version != 1) throw std::invalid_argument("parse_problem: unsupported version");
  expect(is, "dim");
  Eigen::Index dim = 0;
  if (!(is >> dim) || dim < 1) throw std::invalid_argument("parse_problem: bad dimension");
  SOCPProblem prob;
  expect(is, "f");
  prob.f.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) prob.f(i) = read_double(is);
  expect(is, "cones");
  std::size_t count = 0;
  if (!(is >> count)) throw std::invalid_argument("parse_problem: bad cone count");
  for (std::size_t k = 0; k < count; ++k) {
    expect(is, "cone");
    Eigen::Index rows = 0;
    if (!(is >> rows) || rows < 0) throw std::invalid_argument("parse_problem: bad row count");
    SOCConstraint c;
    expect(is, "q");
    c.q = read_double(is);
    expect(is, "p");
    c.p.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) c.p(i) = read_double(is);
    expect(is, "n");
    c.n.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) c.n(i) = read_double(is);
    c.M.resize(rows, dim);
    for (Eigen::Index r = 0; r < rows; ++r) {
      expect(is, "M");
      for (Eigen::Index j = 0; j < dim; ++j) c.M(r, j) = read_double(is);
    }
    prob.cones.push_back(std::move(c));
  }
  prob.validate();
  return prob;
}

} // namespace switchsafe
