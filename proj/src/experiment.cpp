#include "switchsafe/experiment.hpp"

#include "switchsafe/errors.hpp"
#include "switchsafe/svg_plot.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace switchsafe {

using nlohmann::json;

std::string to_string(Termination t) {
  switch (t) {
    case Termination::HorizonComplete: return "horizon-complete";
    case Termination::Unsafe: return "unsafe";
    case Termination::Infeasible: return "infeasible";
    case Termination::DomainExit: return "domain-exit";
    case Termination::NumericalFailure: return "numerical-failure";
  }
  return "numerical-failure";
}

double EpisodeLog::min_h(const CertificatePair& certs) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : steps) m = std::min(m, s.h);
  if (final_state.size() > 0) m = std::min(m, certs.h.value(final_state));
  return m;
}

std::vector<TrajectoryPoint> EpisodeLog::trajectory(const RegionPartition& partition) const {
  std::vector<TrajectoryPoint> pts;
  // The last row's input was not applied when the episode stopped on it.
  const bool last_applied = termination == Termination::HorizonComplete || termination == Termination::DomainExit;
  const std::size_t applied = last_applied ? steps.size() : (steps.empty() ? 0 : steps.size() - 1);
  for (std::size_t i = 0; i < applied; ++i) pts.push_back({steps[i].t, steps[i].x, steps[i].u});
  if (final_state.size() > 0 && partition.in_domain(final_state)) {
    pts.push_back({final_t, final_state, VectorXd::Zero(steps.empty() ? 1 : steps.front().u.size())});
  }
  return pts;
}

ControlDecision control_step(const AccBenchmark& bench, ControllerKind kind, const BatchMOGPModel* model,
                             const VectorXd& x, const SolverSettings& settings) {
  ControlDecision dec;
  dec.region = bench.partition.region_of(x);
  const int m = bench.plant.control_dim;
  if (kind == ControllerKind::NominalQP || kind == ControllerKind::TrueOracle) {
    const ControlAffineField& field = kind == ControllerKind::NominalQP ? bench.nominal : bench.plant.field(dec.region);
    const QPResult qp = solve_nominal_qp(x, bench.certs, nominal_lie_terms(field, bench.certs, x), settings);
    dec.u = qp.u;
    dec.status = qp.status;
    return dec;
  }
  if (model == nullptr) throw std::invalid_argument("GP controller requested without a trained model");
  const SafetyProgram sp = assemble_socp(x, *model, bench.certs, bench.nominal);
  const SOCPSolution sol = solve_socp(sp.problem, settings);
  dec.u = sol.z.head(m);
  dec.status = sol.status;
  dec.message = sol.message;
  return dec;
}

EpisodeLog run_episode(const ExperimentConfig& config, ControllerKind kind, const BatchMOGPModel* model) {
  if (uses_gp(kind) && model == nullptr) {
    throw std::invalid_argument("run_episode: " + to_string(kind) + " needs a trained model");
  }
  const AccBenchmark bench = config.make_benchmark();
  EpisodeLog log;
  log.controller = to_string(kind);
  VectorXd x = bench.x0;
  const int steps = config.steps();
  log.termination = Termination::HorizonComplete;
  double t = 0.0;
  int k = 0;
  for (; k < steps; ++k) {
    t = k * config.dt;
    if (!bench.partition.in_domain(x)) {
      log.termination = Termination::DomainExit;
      break;
    }
    ControlDecision dec;
    try {
      dec = control_step(bench, kind, model, x, config.solver);
    } catch (const NumericalError& e) {
      dec.u = VectorXd::Zero(bench.plant.control_dim);
      dec.status = SolverStatus::NumericalFailure;
      dec.region = bench.partition.region_of(x);
      dec.message = e.what();
    }
    StepRecord rec;
    rec.t = t;
    rec.x = x;
    rec.u = dec.u;
    rec.V = bench.certs.V.value(x);
    rec.h = bench.certs.h.value(x);
    rec.region = dec.region;
    rec.status = dec.status;
    log.steps.push_back(rec);
    if (rec.h < 0.0) {
      log.termination = Termination::Unsafe;
      break;
    }
    if (dec.status == SolverStatus::Infeasible) {
      log.termination = Termination::Infeasible;
      break;
    }
    if (dec.status != SolverStatus::Optimal) {
      log.termination = Termination::NumericalFailure;
      log.message = dec.message;
      break;
    }
    const StepResult next = bench.plant.step(x, dec.u, config.dt);
    x = next.x;
    if (next.domain_exit) {
      log.termination = Termination::DomainExit;
      ++k;
      break;
    }
  }
  if (log.termination == Termination::HorizonComplete || log.termination == Termination::DomainExit) {
    log.final_t = k * config.dt;
  } else {
    log.final_t = t;
  }
  log.final_state = x;
  if (log.termination == Termination::HorizonComplete && bench.certs.h.value(x) < 0.0) {
    log.termination = Termination::Unsafe;
  }
  return log;
}

RegionPartition single_partition(const AccBenchmark& bench) {
  return RegionPartition::single_region(bench.partition.coords, bench.partition.domain);
}

TrainingResult episodic_train(const ExperimentConfig& config, bool single_region) {
  config.validate();
  const AccBenchmark bench = config.make_benchmark();
  const RegionPartition partition = single_region ? single_partition(bench) : bench.partition;
  const ControllerKind gp_kind = single_region ? ControllerKind::SingleGP : ControllerKind::MOGP;
  const MogpSettings settings = config.mogp_settings();

  TrainingResult res;
  std::optional<BatchMOGPModel> model;
  for (int ep = 1; ep <= config.max_episodes; ++ep) {
    const bool first = ep == 1;
    EpisodeLog log = run_episode(config, first ? ControllerKind::NominalQP : gp_kind, first ? nullptr : &*model);
    const auto traj = log.trajectory(partition);
    // An episode stopped at its first step yields no interval to difference.
    const auto samples = traj.size() < 2 ? std::vector<ResidualSample>{}
                                         : measure_residuals(traj, bench.nominal, bench.certs, config.dt, partition);
    res.dataset.insert(res.dataset.end(), samples.begin(), samples.end());
    if (first) res.initial_samples = samples.size();
    log.dataset_size_after = res.dataset.size();
    const bool safe = log.safe();
    res.episodes.push_back(std::move(log));
    if (safe && !first) {
      res.converged = true;
      break;
    }
    model = fit_batch_mogp(partition_dataset(res.dataset, partition, config.gp_features, bench.plant.control_dim),
                           partition, config.gp_features, bench.plant.control_dim, settings);
    if (safe) {
      res.converged = true;
      break;
    }
  }
  res.model = std::move(*model);
  return res;
}

ControllerSummary summarize(const EpisodeLog& log, const ExperimentConfig& config) {
  const AccBenchmark bench = config.make_benchmark();
  ControllerSummary s;
  s.controller = log.controller;
  s.min_h = log.min_h(bench.certs);
  s.violation = s.min_h < 0.0;
  s.termination = log.termination;
  s.steps = log.steps.size();
  double sum = 0.0;
  for (const auto& r : log.steps) {
    if (!s.speed_convergence_time && std::abs(r.x(1) - config.benchmark.v_d) <= config.speed_tolerance) {
      s.speed_convergence_time = r.t;
    }
    sum += r.u.cwiseAbs().sum();
  }
  s.mean_abs_u = log.steps.empty() ? 0.0 : sum / static_cast<double>(log.steps.size());
  return s;
}

const ControllerSummary& ComparisonReport::summary(const std::string& controller) const {
  for (const auto& s : summaries) {
    if (s.controller == controller) return s;
  }
  throw std::out_of_range("no summary for controller '" + controller + "'");
}

ComparisonReport compare_controllers(const ExperimentConfig& config) {
  config.validate();
  ComparisonReport rep;
  rep.mogp = episodic_train(config, false);
  // The baseline collects as many episodes of data as the final MOGP model was fitted on.
  ExperimentConfig budget = config;
  budget.max_episodes = std::max<int>(1, static_cast<int>(rep.mogp.episodes.size()) - 1);
  rep.single = episodic_train(budget, true);
  for (auto kind : {ControllerKind::NominalQP, ControllerKind::SingleGP, ControllerKind::MOGP,
                    ControllerKind::TrueOracle}) {
    const BatchMOGPModel* model = nullptr;
    if (kind == ControllerKind::MOGP) model = &rep.mogp.model;
    if (kind == ControllerKind::SingleGP) model = &rep.single.model;
    EpisodeLog log = run_episode(config, kind, model);
    rep.summaries.push_back(summarize(log, config));
    rep.logs.emplace(to_string(kind), std::move(log));
  }
  const auto& um = rep.logs.at("mogp-socp").steps;
  const auto& ut = rep.logs.at("true-oracle").steps;
  const std::size_t n = std::min(um.size(), ut.size());
  double gap = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    gap += (um[i].u - ut[i].u).cwiseAbs().sum();
    ref += ut[i].u.cwiseAbs().sum();
  }
  rep.input_gap_ratio = ref > 0.0 ? gap / ref : 0.0;
  return rep;
}

namespace {

json summary_entry(const ControllerSummary& s) {
  json j;
  j["min_h"] = s.min_h;
  j["violation"] = s.violation;
  j["termination"] = to_string(s.termination);
  j["speed_convergence_time"] = s.speed_convergence_time ? json(*s.speed_convergence_time) : json(nullptr);
  j["steps"] = s.steps;
  j["mean_abs_u"] = s.mean_abs_u;
  return j;
}

std::string key_of(const std::string& controller) {
  std::string k = controller;
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << content;
}

} // namespace

std::string summary_json(const ComparisonReport& report, const ExperimentConfig& config) {
  json j;
  for (const auto& s : report.summaries) j[key_of(s.controller)] = summary_entry(s);
  j["input_gap_ratio"] = report.input_gap_ratio;
  j["horizon"] = config.horizon;
  j["dt"] = config.dt;
  j["seed"] = config.seed;
  auto training = [](const TrainingResult& t) {
    json e;
    e["episodes"] = t.episodes.size();
    e["fit_on_episodes"] = t.converged ? t.episodes.size() - 1 : t.episodes.size();
    e["converged"] = t.converged;
    e["initial_samples"] = t.initial_samples;
    e["total_samples"] = t.dataset.size();
    json terms = json::array();
    for (const auto& ep : t.episodes) terms.push_back(to_string(ep.termination));
    e["terminations"] = terms;
    return e;
  };
  j["training"] = {{"mogp_socp", training(report.mogp)}, {"single_gp_socp", training(report.single)}};
  return j.dump(2);
}

void write_trajectory_csv(std::ostream& os, const EpisodeLog& log) {
  os << "t,x1,x2,z,u,V,h,region,solver_status\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : log.steps) {
    os << num(r.t) << ',' << num(r.x(0)) << ',' << num(r.x(1)) << ',' << num(r.x(2)) << ',' << num(r.u(0)) << ','
       << num(r.V) << ',' << num(r.h) << ',' << r.region << ',' << to_string(r.status) << '\n';
  }
}

std::vector<StepRecord> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,x1,x2,z,u", 0) != 0) {
    throw std::invalid_argument("trajectory CSV: missing or unexpected header");
  }
  std::vector<StepRecord> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw std::invalid_argument("trajectory CSV: wrong column count on line " + std::to_string(lineno));
    StepRecord r;
    r.t = std::stod(cells[0]);
    r.x = VectorXd(3);
    r.x << std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]);
    r.u = VectorXd::Constant(1, std::stod(cells[4]));
    r.V = std::stod(cells[5]);
    r.h = std::stod(cells[6]);
    r.region = std::stoi(cells[7]);
    r.status = solver_status_from_string(cells[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_comparison(const ComparisonReport& report, const ExperimentConfig& config, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  for (const auto& [name, log] : report.logs) {
    std::ofstream os(root / ("trajectory_" + name + ".csv"));
    write_trajectory_csv(os, log);
  }
  write_file(root / "summary.json", summary_json(report, config));
  {
    std::ofstream os(root / "dataset.csv");
    write_dataset_csv(os, report.mogp.dataset, {"x1", "x2", "z"});
  }
  write_file(root / "model.json", model_to_json(report.mogp.model));
  write_file(root / "model_single.json", model_to_json(report.single.model));
  write_file(root / "config.json", config_to_json(config));

  const std::vector<std::pair<std::string, std::string>> style{{"mogp-socp", "#e6a700"},
                                                               {"single-gp-socp", "#17becf"},
                                                               {"nominal-qp", "#1f3fbf"},
                                                               {"true-oracle", "#d62728"}};
  auto chart = [&](const std::string& file, const std::string& label, auto value) {
    std::vector<PlotSeries> series;
    for (const auto& [name, color] : style) {
      const auto it = report.logs.find(name);
      if (it == report.logs.end()) continue;
      PlotSeries s;
      s.name = name;
      s.color = color;
      s.dashed = name == "true-oracle";
      for (const auto& r : it->second.steps) {
        s.x.push_back(r.t);
        s.y.push_back(value(r));
      }
      series.push_back(std::move(s));
    }
    write_file(root / file, svg_line_chart(label + " vs time", "t [s]", label, series));
  };
  chart("h.svg", "h", [](const StepRecord& r) { return r.h; });
  chart("V.svg", "V", [](const StepRecord& r) { return r.V; });
  chart("u.svg", "u [N]", [](const StepRecord& r) { return r.u(0); });
  chart("x2.svg", "x2 [m/s]", [](const StepRecord& r) { return r.x(1); });
  chart("z.svg", "z [m]", [](const StepRecord& r) { return r.x(2); });
}

AuditResult audit_log(const std::vector<StepRecord>& rows, const BatchMOGPModel& model,
                      const ExperimentConfig& config, double tol) {
  const AccBenchmark bench = config.make_benchmark();
  AuditResult res;
  res.rows = rows.size();
  for (const auto& r : rows) {
    if (r.status != SolverStatus::Optimal) continue;
    ++res.checked;
    const SafetyProgram sp = assemble_socp(r.x, model, bench.certs, bench.nominal);
    const double viol = -sp.cbf.margin(r.u);
    res.worst_violation = std::max(res.worst_violation, viol);
    std::ostringstream where;
    where << std::setprecision(17) << "t = " << r.t;
    if (viol > tol) {
      ++res.cone_failures;
      res.messages.push_back(where.str() + ": CBF cone violated by " + std::to_string(viol));
    }
    if (sp.region != r.region) {
      ++res.mismatches;
      res.messages.push_back(where.str() + ": logged region " + std::to_string(r.region) + " but state is in " +
                             std::to_string(sp.region));
    }
    const SOCPSolution sol = solve_socp(sp.problem, config.solver);
    const double du = (sol.z.head(r.u.size()) - r.u).cwiseAbs().maxCoeff();
    if (sol.status != SolverStatus::Optimal || du > tol * std::max(1.0, r.u.cwiseAbs().maxCoeff())) {
      ++res.mismatches;
      res.messages.push_back(where.str() + ": re-solve gives " + to_string(sol.status) + " with input change " +
                             std::to_string(du));
    }
  }
  return res;
}

} // namespace switchsafe
