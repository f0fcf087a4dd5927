#include "switchsafe/errors.hpp"
#include "switchsafe/experiment.hpp"

#include <doctest.h>

#include <sstream>

using namespace switchsafe;

namespace {

const ComparisonReport& default_report() {
  static const ComparisonReport rep = compare_controllers(ExperimentConfig{});
  return rep;
}

} // namespace

TEST_CASE("configuration parsing") {
  const ExperimentConfig d;
  const ExperimentConfig back = config_from_json(config_to_json(d));
  CHECK(config_to_json(back) == config_to_json(d));
  CHECK(back.rho == d.rho);
  CHECK(back.gp_features == d.gp_features);

  const ExperimentConfig c = config_from_json(R"({"dt": 0.025, "controller": "nominal-qp", "seed": 7})");
  CHECK(c.dt == 0.025);
  CHECK(c.seed == 7);
  CHECK(c.horizon == d.horizon);

  CHECK_THROWS_AS(config_from_json(R"({"horizn": 3})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"horizon": -1})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"delta": 1.5})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"max_episodes": 0})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"dt": "fast"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"controller": "pid"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"benchmark": {"mass": 1}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("[1,2"), ConfigError);
}

TEST_CASE("controller names") {
  for (auto k : {ControllerKind::NominalQP, ControllerKind::SingleGP, ControllerKind::MOGP, ControllerKind::TrueOracle})
    CHECK(controller_from_string(to_string(k)) == k);
  CHECK(uses_gp(ControllerKind::MOGP));
  CHECK_FALSE(uses_gp(ControllerKind::TrueOracle));
}

TEST_CASE("short horizon logs two steps") {
  ExperimentConfig c;
  c.horizon = 0.1;
  for (auto k : {ControllerKind::NominalQP, ControllerKind::TrueOracle}) {
    const EpisodeLog log = run_episode(c, k);
    CHECK(log.steps.size() == 2);
    CHECK(log.termination == Termination::HorizonComplete);
    CHECK(log.final_t == doctest::Approx(0.1));
  }
  CHECK_THROWS_AS(run_episode(c, ControllerKind::MOGP), std::invalid_argument);
}

TEST_CASE("closed-loop baselines") {
  const ExperimentConfig c;
  const AccBenchmark b = c.make_benchmark();
  const EpisodeLog nominal = run_episode(c, ControllerKind::NominalQP);
  CHECK(nominal.termination == Termination::Unsafe);
  CHECK(nominal.min_h(b.certs) < 0.0);
  CHECK(nominal.steps.front().h > 0.0);

  const EpisodeLog oracle = run_episode(c, ControllerKind::TrueOracle);
  CHECK(oracle.termination == Termination::HorizonComplete);
  CHECK(oracle.min_h(b.certs) >= -1e-6);
  CHECK(oracle.steps.size() == static_cast<std::size_t>(c.steps()));
}

TEST_CASE("episodes are deterministic") {
  ExperimentConfig c;
  c.horizon = 5.0;
  std::ostringstream a, b;
  write_trajectory_csv(a, run_episode(c, ControllerKind::NominalQP));
  write_trajectory_csv(b, run_episode(c, ControllerKind::NominalQP));
  CHECK(a.str() == b.str());
}

TEST_CASE("trajectory CSV round trip") {
  ExperimentConfig c;
  c.horizon = 1.0;
  const EpisodeLog log = run_episode(c, ControllerKind::TrueOracle);
  std::stringstream ss;
  write_trajectory_csv(ss, log);
  const std::string header = ss.str().substr(0, ss.str().find('\n'));
  CHECK(header == "t,x1,x2,z,u,V,h,region,solver_status");
  const auto rows = read_trajectory_csv(ss);
  REQUIRE(rows.size() == log.steps.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].t == log.steps[i].t);
    CHECK(rows[i].x == log.steps[i].x);
    CHECK(rows[i].u == log.steps[i].u);
    CHECK(rows[i].region == log.steps[i].region);
    CHECK(rows[i].status == log.steps[i].status);
  }
}

TEST_CASE("episodic training on defaults") {
  const TrainingResult& res = default_report().mogp;
  REQUIRE(!res.episodes.empty());
  CHECK(res.converged);
  CHECK(res.episodes.back().safe());
  CHECK(res.episodes.size() <= 10);
  CHECK(res.episodes.front().controller == "nominal-qp");
  CHECK(res.initial_samples >= 100);
  CHECK(res.initial_samples <= 1000);
  std::size_t prev = 0;
  for (const auto& e : res.episodes) {
    CHECK(e.dataset_size_after >= prev);
    prev = e.dataset_size_after;
  }
  CHECK(prev == res.dataset.size());
  CHECK(res.model.V.size() == 2);
}

TEST_CASE("four-way comparison on defaults") {
  const ComparisonReport& rep = default_report();
  const ExperimentConfig c;
  CHECK(rep.summary("nominal-qp").min_h < 0.0);
  CHECK(rep.summary("nominal-qp").violation);
  CHECK(rep.summary("mogp-socp").min_h >= 0.0);
  CHECK(rep.summary("mogp-socp").termination == Termination::HorizonComplete);
  CHECK(rep.summary("true-oracle").min_h >= -1e-6);
  REQUIRE(rep.summary("mogp-socp").speed_convergence_time.has_value());
  CHECK(*rep.summary("mogp-socp").speed_convergence_time <= 0.25 * c.horizon);
  CHECK(rep.input_gap_ratio <= 0.2);
  CHECK(rep.summary("single-gp-socp").min_h < 0.0);
  // The baseline was trained on the same number of episodes as the final MOGP model.
  CHECK(rep.single.episodes.size() == std::max<std::size_t>(1, rep.mogp.episodes.size() - 1));
}

TEST_CASE("summary JSON names every controller") {
  const std::string js = summary_json(default_report(), ExperimentConfig{});
  for (const char* k : {"nominal_qp", "single_gp_socp", "mogp_socp", "true_oracle", "min_h", "violation",
                        "termination", "speed_convergence_time"})
    CHECK(js.find(k) != std::string::npos);
}

TEST_CASE("logged mogp trajectory passes the replay audit") {
  const ComparisonReport& rep = default_report();
  const ExperimentConfig c;
  std::stringstream ss;
  write_trajectory_csv(ss, rep.logs.at("mogp-socp"));
  const auto rows = read_trajectory_csv(ss);
  const AuditResult a = audit_log(rows, rep.mogp.model, c);
  CHECK(a.ok());
  CHECK(a.checked > 0);
  CHECK(a.checked == a.rows);

  // A tampered input is caught.
  auto bad = rows;
  bad[bad.size() / 2].u(0) += 1e3;
  CHECK_FALSE(audit_log(bad, rep.mogp.model, c).ok());
}
