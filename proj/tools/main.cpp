// switchsafe: run, train, compare and audit GP-based safety filters on the ACC benchmark.
#include "switchsafe/errors.hpp"
#include "switchsafe/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace switchsafe;

namespace {

enum Exit { kOk = 0, kAuditFailed = 1, kConfig = 2, kNotConverged = 3, kNumerical = 4 };

struct Options {
  std::string config_path;
  std::string controller;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int episodes = 0;
  double horizon = 0.0;
  double dt = 0.0;
  std::string model_path;
  std::string log_path;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : config_from_json(slurp(o.config_path));
  if (!o.controller.empty()) c.controller = o.controller;
  if (o.seed_set) c.seed = o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.episodes > 0) c.max_episodes = o.episodes;
  if (o.horizon > 0.0) c.horizon = o.horizon;
  if (o.dt > 0.0) c.dt = o.dt;
  c.validate();
  return c;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

void print_episode(const EpisodeLog& log, const ExperimentConfig& c) {
  const ControllerSummary s = summarize(log, c);
  std::cout << log.controller << ": " << to_string(log.termination) << " after " << log.steps.size()
            << " steps, min h = " << s.min_h;
  if (s.speed_convergence_time) std::cout << ", |x2 - v_d| <= " << c.speed_tolerance << " at t = " << *s.speed_convergence_time;
  if (!log.message.empty()) std::cout << " (" << log.message << ")";
  std::cout << "\n";
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig c = load(o);
  const ControllerKind kind = controller_from_string(c.controller);
  std::optional<BatchMOGPModel> model;
  if (uses_gp(kind)) {
    const AccBenchmark bench = c.make_benchmark();
    const RegionPartition partition = kind == ControllerKind::SingleGP ? single_partition(bench) : bench.partition;
    if (!o.model_path.empty()) {
      model = model_from_json(slurp(o.model_path), partition);
    } else {
      std::cout << "no --model given; training one first\n";
      model = episodic_train(c, kind == ControllerKind::SingleGP).model;
    }
  }
  const EpisodeLog log = run_episode(c, kind, model ? &*model : nullptr);
  std::filesystem::create_directories(c.output_dir);
  std::ofstream os(std::filesystem::path(c.output_dir) / ("trajectory_" + c.controller + ".csv"));
  write_trajectory_csv(os, log);
  if (model) write_text(std::filesystem::path(c.output_dir) / "model.json", model_to_json(*model));
  print_episode(log, c);
  return log.termination == Termination::NumericalFailure ? kNumerical : kOk;
}

int cmd_train(const Options& o) {
  const ExperimentConfig c = load(o);
  const bool single = c.controller == "single-gp-socp";
  const TrainingResult res = episodic_train(c, single);
  const std::filesystem::path dir(c.output_dir);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < res.episodes.size(); ++i) {
    std::ofstream os(dir / ("episode_" + std::to_string(i + 1) + ".csv"));
    write_trajectory_csv(os, res.episodes[i]);
    std::cout << "episode " << i + 1 << " ";
    print_episode(res.episodes[i], c);
  }
  {
    std::ofstream os(dir / "dataset.csv");
    write_dataset_csv(os, res.dataset, {"x1", "x2", "z"});
  }
  write_text(dir / "model.json", model_to_json(res.model));
  std::cout << "samples: " << res.initial_samples << " initial, " << res.dataset.size() << " total\n";
  if (!res.converged) {
    std::cout << "not converged within " << c.max_episodes << " episodes\n";
    return kNotConverged;
  }
  return kOk;
}

int cmd_compare(const Options& o) {
  const ExperimentConfig c = load(o);
  const ComparisonReport rep = compare_controllers(c);
  write_comparison(rep, c, c.output_dir);
  for (const auto& s : rep.summaries) print_episode(rep.logs.at(s.controller), c);
  std::cout << "mean |u_mogp - u_true| / mean |u_true| = " << rep.input_gap_ratio << "\n";
  std::cout << "outputs in " << c.output_dir << "\n";
  return rep.mogp.converged ? kOk : kNotConverged;
}

int cmd_audit(const Options& o) {
  const ExperimentConfig c = load(o);
  const std::filesystem::path dir(c.output_dir);
  const std::string log_path = o.log_path.empty() ? (dir / "trajectory_mogp-socp.csv").string() : o.log_path;
  const std::string model_path = o.model_path.empty() ? (dir / "model.json").string() : o.model_path;
  std::ifstream is(log_path);
  if (!is) throw ConfigError("cannot read " + log_path);
  const auto rows = read_trajectory_csv(is);
  const AccBenchmark bench = c.make_benchmark();
  const BatchMOGPModel model = model_from_json(slurp(model_path), bench.partition);
  const AuditResult res = audit_log(rows, model, c);
  for (const auto& m : res.messages) std::cout << m << "\n";
  std::cout << "audited " << res.checked << " of " << res.rows << " rows; cone failures " << res.cone_failures
            << ", re-solve mismatches " << res.mismatches << ", worst violation " << res.worst_violation << "\n";
  return res.ok() ? kOk : kAuditFailed;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP-based CLF/CBF safety filter experiments on a switching ACC benchmark"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--controller", o.controller, "nominal-qp, single-gp-socp, mogp-socp or true-oracle");
    sub->add_option("--seed", o.seed, "random seed")->each([&o](const std::string&) { o.seed_set = true; });
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--episodes", o.episodes, "maximum training episodes")->check(CLI::PositiveNumber);
    sub->add_option("--horizon", o.horizon, "episode length in seconds")->check(CLI::PositiveNumber);
    sub->add_option("--dt", o.dt, "control and sampling period in seconds")->check(CLI::PositiveNumber);
  };
  auto* sim = app.add_subcommand("simulate", "one episode with one controller");
  common(sim);
  sim->add_option("--model", o.model_path, "model.json for GP controllers");
  auto* train = app.add_subcommand("train", "episodic data collection and model fitting");
  common(train);
  auto* cmp = app.add_subcommand("compare", "train both GP variants and run all four controllers");
  common(cmp);
  auto* aud = app.add_subcommand("audit", "re-verify the cones of a logged GP trajectory");
  common(aud);
  aud->add_option("--log", o.log_path, "trajectory CSV (default <out>/trajectory_mogp-socp.csv)");
  aud->add_option("--model", o.model_path, "model.json (default <out>/model.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*train) return cmd_train(o);
    if (*cmp) return cmd_compare(o);
    if (*aud) return cmd_audit(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const OptimizationError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
