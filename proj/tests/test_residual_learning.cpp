#include "switchsafe/errors.hpp"
#include "switchsafe/residual_learning.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace switchsafe;

namespace {

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

// Rolls a field forward under u(t) and logs it.
std::vector<TrajectoryPoint> rollout(const ControlAffineField& field, VectorXd x, double dt, int steps,
                                     const std::function<double(double)>& input) {
  std::vector<TrajectoryPoint> out;
  for (int i = 0; i <= steps; ++i) {
    const double t = i * dt;
    out.push_back({t, x, scalar(input(t))});
    x = rk4_step(field, x, scalar(input(t)), dt);
  }
  return out;
}

ControlAffineField offset_field(const NominalModel& nominal, double c) {
  ControlAffineField f;
  f.f = [nominal, c](const VectorXd& x) {
    VectorXd v = nominal.f(x);
    v(1) += c;
    return v;
  };
  f.g = nominal.g;
  return f;
}

} // namespace

TEST_CASE("two points give exactly one sample") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  const auto traj = rollout(b.nominal, b.x0, 0.05, 1, [](double) { return 100.0; });
  const auto s = measure_residuals(traj, b.nominal, b.certs, 0.05, b.partition);
  REQUIRE(s.size() == 1);
  CHECK(s[0].u(0) == 100.0);
  CHECK((s[0].x - 0.5 * (traj[0].x + traj[1].x)).norm() <= 1e-15);
  CHECK(s[0].region == 1);
  CHECK(s[0].t == 0.0);
}

TEST_CASE("bad trajectories are rejected") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  auto traj = rollout(b.nominal, b.x0, 0.05, 4, [](double) { return 0.0; });
  CHECK_THROWS_AS(measure_residuals({traj[0]}, b.nominal, b.certs, 0.05, b.partition), TrajectoryError);
  traj[2].t += 1e-6;
  CHECK_THROWS_AS(measure_residuals(traj, b.nominal, b.certs, 0.05, b.partition), TrajectoryError);
}

TEST_CASE("nominal trajectories with a varying input give first-order residuals") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  auto input = [](double t) { return 1500.0 * std::sin(1.3 * t) + 300.0; };
  auto run = [&](double dt) {
    const int n = static_cast<int>(std::llround(4.0 / dt));
    const auto traj = testutil::sampled_rollout(b.nominal, b.x0, dt, n, input);
    return testutil::max_abs_omega(measure_residuals(traj, b.nominal, b.certs, dt, b.partition));
  };
  const double coarse = run(0.05);
  const double fine = run(0.025);
  CHECK(coarse > 0.0);
  CHECK(coarse / fine >= 1.5);
  CHECK(coarse / fine <= 2.5);
}

TEST_CASE("held inputs give second-order residuals") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  auto input = [](double t) { return 1500.0 * std::sin(1.3 * t) + 300.0; };
  auto run = [&](double dt) {
    const int n = static_cast<int>(std::llround(4.0 / dt));
    return testutil::max_abs_omega(measure_residuals(rollout(b.nominal, b.x0, dt, n, input), b.nominal, b.certs, dt, b.partition));
  };
  const double ratio = run(0.05) / run(0.025);
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("constant acceleration offset shows up through the chain rule") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  const double c = 0.3, dt = 0.01;
  const auto traj = rollout(offset_field(b.nominal, c), b.x0, dt, 200, [](double) { return 800.0; });
  const auto s = measure_residuals(traj, b.nominal, b.certs, dt, b.partition);
  const double vd = AccConfig{}.v_d;
  for (const auto& r : s) {
    CHECK(std::abs(r.omega_V - 2.0 * (r.x(1) - vd) * c) <= 10.0 * dt);
    CHECK(std::abs(r.omega_h - (-1.6 * c)) <= 10.0 * dt);
  }
}

TEST_CASE("partition_dataset splits by region") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  std::vector<ResidualSample> samples;
  for (double x1 : {10.0, 14.999, 15.0, 20.0, 25.0, 30.0}) {
    ResidualSample r;
    r.x = VectorXd(3);
    r.x << x1, 12.0, 100.0;
    r.u = scalar(x1);
    r.omega_V = x1;
    r.omega_h = -x1;
    samples.push_back(r);
  }
  const auto ds = partition_dataset(samples, b.partition, {0, 1}, 1);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].size() == 3);
  CHECK(ds[1].size() == 3);
  CHECK(ds[0].X(0, 1) == 14.999);
  CHECK(ds[1].X(0, 0) == 15.0);
  CHECK(ds[0].size() + ds[1].size() == static_cast<Eigen::Index>(samples.size()));
  for (const auto& d : ds) {
    CHECK((d.Y.row(0).array() == 1.0).all());
    CHECK(d.X.rows() == 2);
  }
  CHECK(ds[1].omega_V(0) == 15.0);
  CHECK(ds[1].omega_h(0) == -15.0);

  std::vector<ResidualSample> one_region(samples.begin(), samples.begin() + 2);
  const auto only1 = partition_dataset(one_region, b.partition, {1}, 1);
  CHECK(only1[0].size() == 2);
  CHECK(only1[1].size() == 0);

  samples[0].x(0) = -5.0;
  CHECK_THROWS_AS(partition_dataset(samples, b.partition, {0, 1}, 1), DomainError);
}

namespace {

std::vector<ResidualSample> synthetic(const RegionPartition& p, int n, std::mt19937_64& rng, bool only_region1) {
  std::vector<ResidualSample> out;
  for (int i = 0; i < n; ++i) {
    ResidualSample r;
    r.x = VectorXd(3);
    const double x1 = only_region1 ? testutil::draw(rng, 30, 100) : testutil::draw(rng, 0, 60);
    r.x << x1, testutil::draw(rng, 5, 25), 100.0;
    r.u = scalar(testutil::draw(rng, -2, 2));
    const int reg = p.region_of(r.x);
    const double a0 = reg == 1 ? std::sin(0.2 * r.x(1)) : 2.0;
    const double a1 = reg == 1 ? 0.5 : -1.0;
    r.omega_V = a0 + a1 * r.u(0);
    r.omega_h = 0.1 * r.x(1) - a1 * r.u(0);
    r.region = reg;
    out.push_back(r);
  }
  return out;
}

} // namespace

TEST_CASE("empty region falls back to the prior and is flagged") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  std::mt19937_64 rng(3);
  const auto samples = synthetic(b.partition, 40, rng, true);
  MogpSettings s;
  s.optimize = false;
  const auto model = fit_batch_mogp(partition_dataset(samples, b.partition, {0, 1}, 1), b.partition, {0, 1}, 1, s);
  CHECK(model.region_count() == 2);
  VectorXd x(3);
  x << 20.0, 10.0, 100.0;
  const ResidualQuery q = query_residual(model, x, ResidualTarget::V);
  CHECK(q.region == 2);
  CHECK(q.untrained);
  CHECK(q.posterior.mu.isZero(0.0));
  x(0) = 50.0;
  const ResidualQuery q1 = query_residual(model, x, ResidualTarget::h);
  CHECK(q1.region == 1);
  CHECK_FALSE(q1.untrained);
  CHECK(q1.beta == 2.0);
}

TEST_CASE("trained model recovers the per-region residual") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  std::mt19937_64 rng(5);
  const auto samples = synthetic(b.partition, 240, rng, false);
  MogpSettings s;
  s.hyper.restarts = 3;
  const auto model = fit_batch_mogp(partition_dataset(samples, b.partition, {0, 1}, 1), b.partition, {0, 1}, 1, s);
  const auto held = synthetic(b.partition, 100, rng, false);
  int hits = 0;
  for (const auto& r : held) {
    const ResidualQuery q = query_residual(model, r.x, ResidualTarget::V);
    const VectorXd y = augment(r.u);
    const double sd = std::sqrt(q.posterior.variance(y));
    if (std::abs(q.posterior.mean(y) - r.omega_V) <= 2.0 * q.beta * sd + 1e-9) ++hits;
  }
  CHECK(hits >= 90);
}

TEST_CASE("one-region model equals a directly trained single model") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  const RegionPartition single = RegionPartition::single_region(b.partition.coords, b.partition.domain);
  std::mt19937_64 rng(9);
  const auto samples = synthetic(b.partition, 60, rng, false);
  MogpSettings s;
  s.hyper.restarts = 2;
  const auto ds = partition_dataset(samples, single, {0, 1}, 1);
  REQUIRE(ds.size() == 1);
  const auto model = fit_batch_mogp(ds, single, {0, 1}, 1, s);

  const FittedGP& gp = model.model(1, ResidualTarget::V);
  const FittedGP direct = FittedGP::fit(gp.kernel(), ds[0].X, ds[0].Y, ds[0].omega_V, gp.noise_variance());
  for (int t = 0; t < 20; ++t) {
    VectorXd x(3);
    x << testutil::draw(rng, 0, 60), testutil::draw(rng, 5, 25), 100.0;
    const auto a = query_residual(model, x, ResidualTarget::V).posterior;
    const auto d = affine_posterior(direct, x.head(2));
    CHECK((a.mu - d.mu).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.Sigma - d.Sigma).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("dataset CSV round trip") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  std::mt19937_64 rng(1);
  const auto samples = synthetic(b.partition, 10, rng, false);
  std::stringstream ss;
  write_dataset_csv(ss, samples, {"x1", "x2", "z"});
  const std::string text = ss.str();
  CHECK(text.rfind("t,x1,x2,z,u,omega_V,omega_h,region", 0) == 0);
  const auto back = read_dataset_csv(ss, 3, 1);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK((back[i].x - samples[i].x).norm() <= 1e-12 * samples[i].x.norm());
    CHECK(back[i].omega_V == doctest::Approx(samples[i].omega_V).epsilon(1e-12));
    CHECK(back[i].region == samples[i].region);
  }
}

TEST_CASE("model JSON round trip reproduces predictions") {
  const AccBenchmark b = acc_benchmark(AccConfig{});
  std::mt19937_64 rng(2);
  const auto samples = synthetic(b.partition, 50, rng, false);
  MogpSettings s;
  s.hyper.restarts = 2;
  const auto model = fit_batch_mogp(partition_dataset(samples, b.partition, {0, 1}, 1), b.partition, {0, 1}, 1, s);
  const auto back = model_from_json(model_to_json(model), b.partition);
  CHECK(back.features == model.features);
  for (int t = 0; t < 10; ++t) {
    VectorXd x(3);
    x << testutil::draw(rng, 0, 60), testutil::draw(rng, 5, 25), 100.0;
    for (auto target : {ResidualTarget::V, ResidualTarget::h}) {
      const auto a = query_residual(model, x, target).posterior;
      const auto c = query_residual(back, x, target).posterior;
      CHECK((a.mu - c.mu).cwiseAbs().maxCoeff() == 0.0);
      CHECK((a.Sigma - c.Sigma).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  CHECK_THROWS(model_from_json("{\"format\":\"nope\"}", b.partition));
}
