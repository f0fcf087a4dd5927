#include "switchsafe/errors.hpp"
#include "switchsafe/safety_filter.hpp"
#include "instances.hpp"

#include <doctest.h>

#include <cmath>

using namespace switchsafe;
using testutil::gauss;
using testutil::unif;

namespace {

VectorXd acc_state(double x1, double x2, double z) {
  VectorXd x(3);
  x << x1, x2, z;
  return x;
}

AffinePosterior random_posterior(std::mt19937_64& rng, int m) {
  AffinePosterior p;
  p.Sigma = testutil::random_covariance(rng, VectorXd::Constant(m + 1, unif(rng, 0.1, 2.0)));
  p.mu = RowVectorXd(m + 1);
  for (int i = 0; i <= m; ++i) p.mu(i) = gauss(rng);
  return p;
}

LieTerms random_lie(std::mt19937_64& rng, int m) {
  LieTerms l;
  l.LfV = gauss(rng);
  l.Lfh = gauss(rng);
  l.LgV = RowVectorXd(m);
  l.Lgh = RowVectorXd(m);
  for (int i = 0; i < m; ++i) {
    l.LgV(i) = gauss(rng);
    l.Lgh(i) = gauss(rng);
  }
  return l;
}

} // namespace

TEST_CASE("nominal Lie terms on the ACC benchmark") {
  const AccConfig cfg;
  const AccBenchmark b = acc_benchmark(cfg);
  const VectorXd x = acc_state(0, 10, 100);
  const LieTerms l = nominal_lie_terms(b.nominal, b.certs, x);
  const double F = 0.1 + 15.0 * 10 + 2.25 * 100;
  CHECK(l.LfV == doctest::Approx(2.0 * (10.0 - 24.0) * (-F / 1050.0)).epsilon(1e-12));
  CHECK(l.LgV(0) == doctest::Approx(2.0 * (10.0 - 24.0) / 1050.0).epsilon(1e-12));
  CHECK(l.Lgh(0) == doctest::Approx(-1.6 * (1.0 / 1050.0)).epsilon(1e-12));
  CHECK(l.Lfh == doctest::Approx((10.0 - 10.0) - 1.6 * (-F / 1050.0)).epsilon(1e-12));

  const LieTerms at_target = nominal_lie_terms(b.nominal, b.certs, acc_state(0, cfg.v_d, 100));
  CHECK(at_target.LfV == 0.0);
  CHECK(at_target.LgV(0) == 0.0);
}

TEST_CASE("matrix square root") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd S = testutil::random_covariance(rng, VectorXd::Constant(3, 1.0));
    const MatrixXd L = matrix_sqrt(S);
    CHECK((L.transpose() * L - S).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(L.isUpperTriangular());
  }
  MatrixXd semi = MatrixXd::Zero(2, 2);
  semi(0, 0) = 1.0;
  const MatrixXd Ls = matrix_sqrt(semi);
  CHECK((Ls.transpose() * Ls - semi).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(matrix_sqrt(-MatrixXd::Identity(2, 2)), NumericalError);
  // Round-off below a large prior scale is tolerated.
  MatrixXd tiny = MatrixXd::Zero(2, 2);
  tiny(0, 0) = -1e-6;
  CHECK_THROWS_AS(matrix_sqrt(tiny), NumericalError);
  CHECK_NOTHROW(matrix_sqrt(tiny, 1e8));
}

TEST_CASE("CBF cone equals the chance-constraint expression") {
  std::mt19937_64 rng(2);
  CertificatePair certs = acc_benchmark(AccConfig{}).certs;
  for (int t = 0; t < 50; ++t) {
    const int m = 1 + t % 2;
    const AffinePosterior post = random_posterior(rng, m);
    const LieTerms lie = random_lie(rng, m);
    const double beta = unif(rng, 0.1, 3.0);
    const VectorXd x = acc_state(unif(rng, 0, 700), unif(rng, 0, 30), unif(rng, 0, 100));
    const CBFConeData cone = build_cbf_cone(x, post, beta, lie, certs);
    const CBFConeData clf = build_clf_cone(x, post, beta, lie, certs);
    for (int k = 0; k < 100; ++k) {
      VectorXd u(m);
      for (int i = 0; i < m; ++i) u(i) = 5.0 * gauss(rng);
      VectorXd y(m + 1);
      y << 1.0, u;
      const double mean = post.mu.dot(y), sd = std::sqrt(y.dot(post.Sigma * y));
      const double h_lhs = lie.Lfh + lie.Lgh.dot(u) + mean - beta * sd + certs.gamma * certs.h.value(x);
      CHECK(std::abs(cone.margin(u) - h_lhs) <= 1e-8 * (1.0 + std::abs(h_lhs)));
      const double v_lhs = lie.LfV + lie.LgV.dot(u) + mean + beta * sd + certs.lambda * certs.V.value(x);
      CHECK(std::abs(-clf.margin(u) - v_lhs) <= 1e-8 * (1.0 + std::abs(v_lhs)));
    }
  }
}

TEST_CASE("zero beta and prior-only posteriors") {
  std::mt19937_64 rng(3);
  const CertificatePair certs = acc_benchmark(AccConfig{}).certs;
  const VectorXd x = acc_state(50, 20, 60);
  const LieTerms lie = random_lie(rng, 1);
  const AffinePosterior post = random_posterior(rng, 1);
  const CBFConeData c0 = build_cbf_cone(x, post, 0.0, lie, certs);
  CHECK(c0.A.isZero(0.0));
  CHECK(c0.b.isZero(0.0));

  AffinePosterior prior;
  prior.mu = RowVectorXd::Zero(2);
  prior.Sigma = Eigen::Vector2d(2.0, 0.5).asDiagonal();
  const CBFConeData cp = build_cbf_cone(x, prior, 1.5, lie, certs);
  CHECK(cp.c(0) == lie.Lgh(0));
  CHECK(cp.d == doctest::Approx(lie.Lfh + certs.gamma * certs.h.value(x)));
  CHECK((cp.b - Eigen::Vector2d(1.5 * std::sqrt(2.0), 0.0)).norm() <= 1e-12);
  CHECK(std::abs(cp.A(1, 0) - 1.5 * std::sqrt(0.5)) <= 1e-12);
}

TEST_CASE("assembled program layout") {
  std::mt19937_64 rng(4);
  const AccBenchmark b = acc_benchmark(AccConfig{}, CertificateGains{2.0, 1.0, 1e4});
  const SafetyProgram sp = testutil::random_acc_program(rng, b);
  CHECK(sp.problem.dim() == 3);
  CHECK(sp.problem.cones.size() == 3);
  CHECK(sp.problem.f == Eigen::Vector3d(0, 0, 1));
  const auto& epi = sp.problem.cones[0];
  CHECK(epi.M(1, 1) == doctest::Approx(100.0));
  // Cone residuals reproduce the margins.
  for (int k = 0; k < 10; ++k) {
    const Eigen::Vector3d z(1000.0 * gauss(rng), gauss(rng), 10.0);
    VectorXd u = z.head(1);
    CHECK(sp.problem.cones[2].residual(z) == doctest::Approx(-sp.cbf.margin(u)).epsilon(1e-10));
    CHECK(sp.problem.cones[1].residual(z) == doctest::Approx(-sp.clf.margin(u) - z(1)).epsilon(1e-10));
  }
}

TEST_CASE("inactive program solves to the origin") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  AffinePosterior zero;
  zero.mu = RowVectorXd::Zero(2);
  zero.Sigma = MatrixXd::Zero(2, 2);
  // At v = v_d the CLF is slack at u = 0; a large headway keeps the CBF slack too.
  const VectorXd x = acc_state(100, AccConfig{}.v_d, 100);
  const AccBenchmark flat = acc_benchmark(AccConfig{}, CertificateGains{1.0, 1.0, 100.0});
  CertificatePair certs = flat.certs;
  ControlAffineField still;
  still.f = [](const VectorXd& s) { return VectorXd::Zero(s.size()).eval(); };
  still.g = b.nominal.g;
  const SafetyProgram sp = assemble_socp(x, zero, zero, 0.0, certs, still);
  const SOCPSolution s = solve_socp(sp.problem);
  REQUIRE(s.status == SolverStatus::Optimal);
  CHECK(s.z.norm() <= 1e-6);
}

TEST_CASE("slack shrinks as rho grows") {
  // CLF needs u > 0 with an expensive input, so the slack absorbs part of it.
  CBFConeData clf = testutil::slack_only_clf(1);
  clf.c(0) = 0.1;
  clf.d = -5.0;
  CBFConeData cbf = testutil::slack_only_clf(1);
  cbf.d = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {1.0, 1e2, 1e4}) {
    CertificatePair certs;
    certs.rho = rho;
    const SOCPSolution s = solve_socp(assemble_socp(clf, cbf, certs));
    REQUIRE(s.status == SolverStatus::Optimal);
    CHECK(std::abs(s.z(1)) < prev);
    prev = std::abs(s.z(1));
  }
}

TEST_CASE("region selection follows the state") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  BatchMOGPModel model;
  model.partition = b.partition;
  model.features = {1};
  model.control_dim = 1;
  model.beta = {2.0, 2.0};
  for (int r = 0; r < 2; ++r) {
    CompositeKernel k;
    k.region_id = r + 1;
    k.base = {make_se(VectorXd::Ones(1), 1.0 + r), make_se(VectorXd::Ones(1), 1e-6)};
    MatrixXd X(1, 1), Y(2, 1);
    X << 20.0;
    Y << 1.0, 0.0;
    const VectorXd w = VectorXd::Constant(1, r == 0 ? 1.0 : -3.0);
    model.V.push_back(FittedGP::fit(k, X, Y, w, 0.01));
    model.h.push_back(FittedGP::fit(k, X, Y, w, 0.01));
  }
  const SafetyProgram a = assemble_socp(acc_state(14.999, 20, 80), model, b.certs, b.nominal);
  const SafetyProgram c = assemble_socp(acc_state(15.0, 20, 80), model, b.certs, b.nominal);
  CHECK(a.region == 1);
  CHECK(c.region == 2);
  CHECK(a.posterior_h.mu(0) > 0.0);
  CHECK(c.posterior_h.mu(0) < 0.0);
  const SafetyProgram again = assemble_socp(acc_state(15.0, 20, 80), model, b.certs, b.nominal);
  CHECK(again.cbf.d == c.cbf.d);
}

TEST_CASE("feasibility conditions: examples") {
  CBFConeData cone;
  cone.A = MatrixXd::Zero(2, 1);
  cone.b = VectorXd::Zero(2);
  cone.c = RowVectorXd::Constant(1, 1.0);
  cone.d = -1.0;
  CHECK(feasibility_conditions(VectorXd::Constant(1, 2.0), cone));
  CHECK_FALSE(feasibility_conditions(VectorXd::Constant(1, 0.5), cone));
  cone.A(1, 0) = 0.5;
  cone.b(0) = 0.2;
  // c u + d < 0 is rejected whatever S says.
  CHECK_FALSE(feasibility_conditions(VectorXd::Constant(1, -10.0), cone));
  CHECK(feasibility_conditions(VectorXd::Constant(1, 3.0), cone) == (cone.margin(VectorXd::Constant(1, 3.0)) >= 0.0));
}

TEST_CASE("feasibility conditions agree with the direct cone check") {
  std::mt19937_64 rng(5);
  int disagreements = 0, boundary = 0;
  for (int t = 0; t < 10000; ++t) {
    const int m = 1 + t % 2;
    const auto rc = testutil::random_cone(rng, m);
    CBFConeData cone = rc.cone;
    VectorXd u(m);
    for (int i = 0; i < m; ++i) u(i) = 3.0 * gauss(rng);
    if (t % 4 == 0) {
      // Put u on the boundary, then nudge by 1e-9 to 1e-6.
      cone.d += -cone.margin(u) + std::copysign(std::pow(10.0, unif(rng, -9.0, -6.0)), gauss(rng));
      ++boundary;
    }
    const double margin = cone.margin(u);
    const bool direct = margin >= 0.0;
    if (std::abs(margin) <= 1e-9) continue;
    if (feasibility_conditions(u, cone) != direct) ++disagreements;
  }
  CHECK(disagreements == 0);
  CHECK(boundary == 2500);
}

TEST_CASE("necessary condition examples") {
  CBFConeData cone;
  cone.A = MatrixXd::Zero(2, 1);
  cone.b = VectorXd::Zero(2);
  cone.c = RowVectorXd::Zero(1);
  cone.d = 2.0;
  CHECK(necessary_condition(cone, MatrixXd::Identity(2, 2), 1.0) == doctest::Approx(-3.0));
  cone.d = 0.5;
  CHECK(necessary_condition(cone, MatrixXd::Identity(2, 2), 1.0) == doctest::Approx(0.75));
  CHECK(necessary_condition(cone, MatrixXd::Identity(2, 2), 0.0) == -std::numeric_limits<double>::infinity());
  CHECK(necessary_condition(cone, MatrixXd::Identity(2, 2), 1e-6) < -1e10);
  CHECK_THROWS_AS(necessary_condition(cone, MatrixXd::Zero(2, 2), 1.0), NumericalError);
}

TEST_CASE("sufficient condition examples") {
  CBFConeData cone;
  cone.A = MatrixXd::Zero(2, 1);
  cone.b = Eigen::Vector2d(0.5, 0.0);
  cone.c = RowVectorXd::Constant(1, 2.0);
  cone.d = -3.0;
  const SufficientResult s = sufficient_condition(cone);
  CHECK(s.holds);
  CHECK(s.lambda_max == doctest::Approx(-4.0));
  REQUIRE(s.witness.size() == 1);
  CHECK(cone.margin(s.witness) >= 0.0);

  CBFConeData wide;
  wide.A = MatrixXd::Zero(3, 2);
  wide.A.bottomRows(2) = 10.0 * MatrixXd::Identity(2, 2);
  wide.b = VectorXd::Zero(3);
  wide.c = RowVectorXd(2);
  wide.c << 1.0, 0.0;
  wide.d = 0.0;
  const SufficientResult w = sufficient_condition(wide);
  CHECK_FALSE(w.holds);
  CHECK(w.lambda_max > 0.0);
}

TEST_CASE("necessary and sufficient checks are sound against the solver") {
  std::mt19937_64 rng(6);
  int feasible = 0, infeasible = 0, suff = 0;
  for (int t = 0; t < 300; ++t) {
    const int m = 1 + t % 2;
    const auto rc = testutil::random_cone(rng, m);
    const SOCPSolution s = solve_socp(testutil::feasibility_program(rc.cone));
    const double lhs = necessary_condition(rc.cone, rc.Sigma, rc.beta);
    if (s.status == SolverStatus::Optimal) {
      ++feasible;
      CHECK(lhs <= 1e-9);
    }
    if (lhs > 0.0) {
      ++infeasible;
      CHECK(s.status == SolverStatus::Infeasible);
    }
    const SufficientResult sr = sufficient_condition(rc.cone);
    if (sr.holds) {
      ++suff;
      CHECK(s.status == SolverStatus::Optimal);
      CHECK(rc.cone.margin(sr.witness) >= 0.0);
    }
    const FeasibilityReport rep = feasibility_report(rc.cone, rc.Sigma, rc.beta);
    if (lhs > 0.0) CHECK(rep.verdict == Verdict::ProvablyInfeasible);
    else if (sr.holds) CHECK(rep.verdict == Verdict::ProvablyFeasible);
    else CHECK(rep.verdict == Verdict::Indeterminate);
  }
  CHECK(feasible > 30);
  CHECK(infeasible > 30);
  CHECK(suff > 30);
}
