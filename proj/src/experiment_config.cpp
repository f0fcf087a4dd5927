#include "switchsafe/errors.hpp"
#include "switchsafe/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <map>

namespace switchsafe {

using nlohmann::json;

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::NominalQP: return "nominal-qp";
    case ControllerKind::SingleGP: return "single-gp-socp";
    case ControllerKind::MOGP: return "mogp-socp";
    case ControllerKind::TrueOracle: return "true-oracle";
  }
  return "nominal-qp";
}

ControllerKind controller_from_string(const std::string& name) {
  for (auto k : {ControllerKind::NominalQP, ControllerKind::SingleGP, ControllerKind::MOGP,
                 ControllerKind::TrueOracle}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown controller '" + name +
                    "' (expected nominal-qp, single-gp-socp, mogp-socp or true-oracle)");
}

bool uses_gp(ControllerKind kind) { return kind == ControllerKind::SingleGP || kind == ControllerKind::MOGP; }

void ExperimentConfig::validate() const {
  benchmark.validate();
  controller_from_string(controller);
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(rho > 0.0)) throw ConfigError("rho must be positive");
  if (max_episodes < 1) throw ConfigError("max_episodes must be at least 1");
  if (!(speed_tolerance > 0.0)) throw ConfigError("speed_tolerance must be positive");
  if (gp_features.empty()) throw ConfigError("gp_features must name at least one state index");
  for (int f : gp_features) {
    if (f < 0 || f > 2) throw ConfigError("gp_features entries must be state indices 0..2");
  }
  if (solver.max_iterations < 1) throw ConfigError("solver.max_iterations must be at least 1");
  try {
    hyperopt.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("hyperopt: ") + e.what());
  }
}

AccBenchmark ExperimentConfig::make_benchmark() const {
  return acc_benchmark(benchmark, CertificateGains{lambda, gamma, rho});
}

MogpSettings ExperimentConfig::mogp_settings() const {
  MogpSettings s;
  s.hyper = hyperopt;
  s.hyper.seed = seed;
  s.beta = beta;
  s.delta = delta;
  return s;
}

int ExperimentConfig::steps() const { return static_cast<int>(std::llround(horizon / dt)); }

namespace {

using Handlers = std::map<std::string, std::function<void(const json&)>>;

void dispatch(const json& obj, const std::string& where, const Handlers& handlers) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    auto h = handlers.find(it.key());
    if (h == handlers.end()) throw ConfigError("unknown key '" + where + it.key() + "'");
    try {
      h->second(it.value());
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + where + it.key() + "': " + e.what());
    }
  }
}

double num(const json& v) {
  if (!v.is_number()) throw ConfigError("expected a number, got " + v.dump());
  return v.get<double>();
}

int integer(const json& v) {
  if (!v.is_number_integer()) throw ConfigError("expected an integer, got " + v.dump());
  return v.get<int>();
}

void vehicle(const json& v, const std::string& where, AccVehicleParams& p) {
  dispatch(v, where,
           {{"mass", [&](const json& j) { p.mass = num(j); }},
            {"f0", [&](const json& j) { p.f0 = num(j); }},
            {"f1", [&](const json& j) { p.f1 = num(j); }},
            {"f2", [&](const json& j) { p.f2 = num(j); }},
            {"c", [&](const json& j) { p.c = num(j); }}});
}

json vehicle_json(const AccVehicleParams& p) {
  return {{"mass", p.mass}, {"f0", p.f0}, {"f1", p.f1}, {"f2", p.f2}, {"c", p.c}};
}

} // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  AccConfig& b = c.benchmark;
  HyperOptConfig& h = c.hyperopt;
  SolverSettings& s = c.solver;
  Handlers bench{
      {"true_r1", [&](const json& j) { vehicle(j, "benchmark.true_r1.", b.true_r1); }},
      {"true_r2", [&](const json& j) { vehicle(j, "benchmark.true_r2.", b.true_r2); }},
      {"nominal", [&](const json& j) { vehicle(j, "benchmark.nominal.", b.nominal); }},
      {"v0", [&](const json& j) { b.v0 = num(j); }},
      {"T_h", [&](const json& j) { b.T_h = num(j); }},
      {"v_d", [&](const json& j) { b.v_d = num(j); }},
      {"z0", [&](const json& j) { b.z0 = num(j); }},
      {"x1_0", [&](const json& j) { b.x1_0 = num(j); }},
      {"x2_0", [&](const json& j) { b.x2_0 = num(j); }},
      {"r2_lo", [&](const json& j) { b.r2_lo = num(j); }},
      {"r2_hi", [&](const json& j) { b.r2_hi = num(j); }},
      {"x1_max", [&](const json& j) { b.x1_max = num(j); }},
      {"x2_max", [&](const json& j) { b.x2_max = num(j); }},
  };
  Handlers hyper{
      {"restarts", [&](const json& j) { h.restarts = integer(j); }},
      {"max_iterations", [&](const json& j) { h.max_iterations = integer(j); }},
      {"tolerance", [&](const json& j) { h.tolerance = num(j); }},
      {"noise_floor", [&](const json& j) { h.noise_floor = num(j); }},
      {"optimize_noise", [&](const json& j) { h.optimize_noise = j.get<bool>(); }},
      {"fixed_noise", [&](const json& j) { h.fixed_noise = num(j); }},
      {"max_points", [&](const json& j) { h.max_points = integer(j); }},
  };
  Handlers solver{
      {"max_iterations", [&](const json& j) { s.max_iterations = integer(j); }},
      {"gap_tol", [&](const json& j) { s.gap_tol = num(j); }},
      {"rel_gap_tol", [&](const json& j) { s.rel_gap_tol = num(j); }},
      {"feas_tol", [&](const json& j) { s.feas_tol = num(j); }},
  };
  dispatch(doc, "",
           {{"benchmark", [&](const json& j) { dispatch(j, "benchmark.", bench); }},
            {"controller", [&](const json& j) { c.controller = j.get<std::string>(); }},
            {"dt", [&](const json& j) { c.dt = num(j); }},
            {"horizon", [&](const json& j) { c.horizon = num(j); }},
            {"beta", [&](const json& j) { c.beta = num(j); }},
            {"delta", [&](const json& j) { c.delta = num(j); }},
            {"lambda", [&](const json& j) { c.lambda = num(j); }},
            {"gamma", [&](const json& j) { c.gamma = num(j); }},
            {"rho", [&](const json& j) { c.rho = num(j); }},
            {"hyperopt", [&](const json& j) { dispatch(j, "hyperopt.", hyper); }},
            {"gp_features", [&](const json& j) { c.gp_features = j.get<std::vector<int>>(); }},
            {"solver", [&](const json& j) { dispatch(j, "solver.", solver); }},
            {"seed", [&](const json& j) { c.seed = j.get<std::uint64_t>(); }},
            {"max_episodes", [&](const json& j) { c.max_episodes = integer(j); }},
            {"output_dir", [&](const json& j) { c.output_dir = j.get<std::string>(); }},
            {"speed_tolerance", [&](const json& j) { c.speed_tolerance = num(j); }}});
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  const AccConfig& b = c.benchmark;
  json doc;
  doc["benchmark"] = {{"true_r1", vehicle_json(b.true_r1)},
                      {"true_r2", vehicle_json(b.true_r2)},
                      {"nominal", vehicle_json(b.nominal)},
                      {"v0", b.v0},
                      {"T_h", b.T_h},
                      {"v_d", b.v_d},
                      {"z0", b.z0},
                      {"x1_0", b.x1_0},
                      {"x2_0", b.x2_0},
                      {"r2_lo", b.r2_lo},
                      {"r2_hi", b.r2_hi},
                      {"x1_max", b.x1_max},
                      {"x2_max", b.x2_max}};
  doc["controller"] = c.controller;
  doc["dt"] = c.dt;
  doc["horizon"] = c.horizon;
  doc["beta"] = c.beta;
  doc["delta"] = c.delta;
  doc["lambda"] = c.lambda;
  doc["gamma"] = c.gamma;
  doc["rho"] = c.rho;
  doc["hyperopt"] = {{"restarts", c.hyperopt.restarts},
                     {"max_iterations", c.hyperopt.max_iterations},
                     {"tolerance", c.hyperopt.tolerance},
                     {"noise_floor", c.hyperopt.noise_floor},
                     {"optimize_noise", c.hyperopt.optimize_noise},
                     {"fixed_noise", c.hyperopt.fixed_noise},
                     {"max_points", c.hyperopt.max_points}};
  doc["gp_features"] = c.gp_features;
  doc["solver"] = {{"max_iterations", c.solver.max_iterations},
                   {"gap_tol", c.solver.gap_tol},
                   {"rel_gap_tol", c.solver.rel_gap_tol},
                   {"feas_tol", c.solver.feas_tol}};
  doc["seed"] = c.seed;
  doc["max_episodes"] = c.max_episodes;
  doc["output_dir"] = c.output_dir;
  doc["speed_tolerance"] = c.speed_tolerance;
  return doc.dump(2);
}

} // namespace switchsafe
