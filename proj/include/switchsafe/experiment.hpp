#pragma once

#include "switchsafe/conic_solver.hpp"
#include "switchsafe/residual_learning.hpp"
#include "switchsafe/safety_filter.hpp"
#include "switchsafe/switching_plant.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace switchsafe {

enum class ControllerKind { NominalQP, SingleGP, MOGP, TrueOracle };

std::string to_string(ControllerKind kind);
/// Throws ConfigError on an unknown name.
ControllerKind controller_from_string(const std::string& name);
bool uses_gp(ControllerKind kind);

struct ExperimentConfig {
  AccConfig benchmark;
  std::string controller = "mogp-socp";
  double dt = 0.05;
  double horizon = 20.0;
  double beta = 2.0;
  double delta = 0.05;
  double lambda = 3.0;
  double gamma = 1.0;
  double rho = 1e7;
  HyperOptConfig hyperopt;
  std::vector<int> gp_features{1};
  SolverSettings solver;
  std::uint64_t seed = 0;
  int max_episodes = 10;
  std::string output_dir = "out";
  double speed_tolerance = 0.5;

  /// Throws ConfigError.
  void validate() const;
  AccBenchmark make_benchmark() const;
  MogpSettings mogp_settings() const;
  int steps() const;
};

/// Parses a JSON document whose keys mirror ExperimentConfig; unknown keys,
/// wrong types and invalid values raise ConfigError.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

enum class Termination { HorizonComplete, Unsafe, Infeasible, DomainExit, NumericalFailure };

std::string to_string(Termination t);

struct StepRecord {
  double t = 0.0;
  VectorXd x;
  VectorXd u;
  double V = 0.0;
  double h = 0.0;
  int region = 0;
  SolverStatus status = SolverStatus::Optimal;
};

struct EpisodeLog {
  std::string controller;
  std::vector<StepRecord> steps;
  double final_t = 0.0;
  VectorXd final_state;
  Termination termination = Termination::HorizonComplete;
  std::size_t dataset_size_after = 0;
  std::string message;

  /// Smallest h over logged states and the final state.
  double min_h(const CertificatePair& certs) const;
  bool safe() const { return termination == Termination::HorizonComplete; }
  /// Points whose input was applied, followed by the final state (if in the domain).
  std::vector<TrajectoryPoint> trajectory(const RegionPartition& partition) const;
};

struct ControlDecision {
  VectorXd u;
  SolverStatus status = SolverStatus::NumericalFailure;
  int region = 0;
  std::string message;
};

/// One controller evaluation at x. GP controllers need `model`.
ControlDecision control_step(const AccBenchmark& bench, ControllerKind kind, const BatchMOGPModel* model,
                             const VectorXd& x, const SolverSettings& settings);

/// Closed loop from the benchmark's initial state. Throws std::invalid_argument
/// when a GP controller is requested without a model.
EpisodeLog run_episode(const ExperimentConfig& config, ControllerKind kind, const BatchMOGPModel* model = nullptr);

struct TrainingResult {
  BatchMOGPModel model;  // ran the final episode if converged, else fitted on all data
  std::vector<EpisodeLog> episodes;
  std::vector<ResidualSample> dataset;
  std::size_t initial_samples = 0;
  bool converged = false;
};

/// Episodic loop: nominal QP first, then the GP controller refit after every
/// episode. A one-region partition gives the single-GP baseline.
TrainingResult episodic_train(const ExperimentConfig& config, bool single_region = false);

/// Partition used by the single-GP baseline: the whole domain.
RegionPartition single_partition(const AccBenchmark& bench);

struct ControllerSummary {
  std::string controller;
  double min_h = 0.0;
  bool violation = false;
  Termination termination = Termination::HorizonComplete;
  std::optional<double> speed_convergence_time;
  std::size_t steps = 0;
  double mean_abs_u = 0.0;
};

struct ComparisonReport {
  std::vector<ControllerSummary> summaries;
  std::map<std::string, EpisodeLog> logs;
  TrainingResult mogp;
  TrainingResult single;
  double input_gap_ratio = 0.0;  // mean |u_mogp - u_true| / mean |u_true|

  const ControllerSummary& summary(const std::string& controller) const;
};

ControllerSummary summarize(const EpisodeLog& log, const ExperimentConfig& config);
/// The single-GP baseline gets the episode budget the final MOGP model was fitted on.
ComparisonReport compare_controllers(const ExperimentConfig& config);
std::string summary_json(const ComparisonReport& report, const ExperimentConfig& config);

/// Writes trajectories, summary.json, dataset.csv, model.json and SVG plots into `dir`.
void write_comparison(const ComparisonReport& report, const ExperimentConfig& config, const std::string& dir);

/// Columns t,x1,x2,z,u,V,h,region,solver_status at round-trip precision.
void write_trajectory_csv(std::ostream& os, const EpisodeLog& log);
std::vector<StepRecord> read_trajectory_csv(std::istream& is);

struct AuditResult {
  std::size_t rows = 0;
  std::size_t checked = 0;
  std::size_t cone_failures = 0;
  std::size_t mismatches = 0;  // re-solve differs from the logged input
  double worst_violation = 0.0;
  std::vector<std::string> messages;

  bool ok() const { return cone_failures == 0 && mismatches == 0; }
};

/// Rebuilds the program of every optimal row from its state and the model and
/// checks the logged input against it at `tol`.
AuditResult audit_log(const std::vector<StepRecord>& rows, const BatchMOGPModel& model,
                      const ExperimentConfig& config, double tol = 1e-6);

} // namespace switchsafe
