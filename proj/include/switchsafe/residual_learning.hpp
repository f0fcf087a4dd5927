#pragma once

#include "switchsafe/certificates.hpp"
#include "switchsafe/gp_regression.hpp"
#include "switchsafe/switching_plant.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace switchsafe {

/// One logged point of a closed-loop run; u is the input held over [t, t + dt).
struct TrajectoryPoint {
  double t = 0.0;
  VectorXd x;
  VectorXd u;
};

struct ResidualSample {
  VectorXd x;  // midpoint of the interval endpoints
  VectorXd u;
  double omega_V = 0.0;
  double omega_h = 0.0;
  int region = 0;
  double t = 0.0;  // start of the interval
};

/// Finite-difference mismatch between the observed and the nominal rates of V and h.
///
/// For consecutive points (t_j, x_j, u_j), (t_j + dt, x_{j+1}, .) the sample is
///   omega = (W(x_{j+1}) - W(x_j)) / dt - grad W(xm) . (f(xm) + g(xm) u_j)
/// with xm the endpoint mean, for W in {V, h}. Throws TrajectoryError when the
/// time stamps are not uniform at `dt` within 1e-9 s or fewer than 2 points are given.
std::vector<ResidualSample> measure_residuals(const std::vector<TrajectoryPoint>& trajectory,
                                              const NominalModel& nominal, const CertificatePair& certs,
                                              double dt, const RegionPartition& partition);

enum class ResidualTarget { V, h };

/// Samples of one region, with GP features as columns of X and y = [1, u] as columns of Y.
struct RegionDataset {
  int region = 1;
  MatrixXd X;
  MatrixXd Y;
  VectorXd omega_V;
  VectorXd omega_h;

  Eigen::Index size() const { return X.cols(); }
  const VectorXd& omega(ResidualTarget target) const { return target == ResidualTarget::V ? omega_V : omega_h; }
};

/// Splits samples by region (recomputed from each sample's state). `features`
/// are the state indices fed to the kernels. A sample no region claims raises DomainError.
std::vector<RegionDataset> partition_dataset(const std::vector<ResidualSample>& samples,
                                             const RegionPartition& partition, const std::vector<int>& features,
                                             int control_dim);

struct MogpSettings {
  HyperOptConfig hyper;
  bool optimize = true;     // false: fit with the default kernel and noise below
  double beta = 2.0;        // confidence scale, shared by all regions unless overridden
  std::vector<double> region_beta;
  double delta = 0.05;
  double default_lengthscale = 1.0;
  double default_signal = 1.0;
  double default_noise = 1e-2;

  void validate() const;
};

/// Independent GPs for the V- and h-residuals of every region.
struct BatchMOGPModel {
  RegionPartition partition;
  std::vector<int> features;
  int control_dim = 1;
  std::vector<FittedGP> V;  // index r - 1
  std::vector<FittedGP> h;
  std::vector<double> beta;
  double delta = 0.05;

  int region_count() const { return static_cast<int>(V.size()); }
  const FittedGP& model(int region, ResidualTarget target) const;
  VectorXd feature(const VectorXd& x) const;
};

struct ResidualQuery {
  AffinePosterior posterior;
  int region = 0;
  double beta = 0.0;
  bool untrained = false;  // the region had no data; posterior is the prior
};

/// Fits 2R models. Regions without data get prior-only models.
/// Errors from individual fits are rethrown with the (region, target) pair in the message.
BatchMOGPModel fit_batch_mogp(const std::vector<RegionDataset>& datasets, const RegionPartition& partition,
                              const std::vector<int>& features, int control_dim, const MogpSettings& settings);

/// Posterior of the model of the region containing x.
ResidualQuery query_residual(const BatchMOGPModel& model, const VectorXd& x, ResidualTarget target);

/// Dataset CSV: t, state columns, u columns, omega_V, omega_h, region.
void write_dataset_csv(std::ostream& os, const std::vector<ResidualSample>& samples,
                       const std::vector<std::string>& state_names);
std::vector<ResidualSample> read_dataset_csv(std::istream& is, int state_dim, int control_dim);

/// Text (JSON) dump of every region's kernel, data and noise. Loading refits
/// from the stored values, so the factorization is reproduced exactly.
std::string model_to_json(const BatchMOGPModel& model);
BatchMOGPModel model_from_json(const std::string& text, const RegionPartition& partition);

} // namespace switchsafe
