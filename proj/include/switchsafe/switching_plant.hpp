#pragma once

#include "switchsafe/certificates.hpp"

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace switchsafe {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = false;

  bool contains(double v) const {
    const bool above = lo_closed ? v >= lo : v > lo;
    const bool below = hi_closed ? v <= hi : v < hi;
    return above && below;
  }
};

/// Product of intervals over the partition coordinates.
struct Box {
  std::vector<Interval> bounds;
  bool contains(const VectorXd& coords) const;
};

/// One switching region; a union of boxes (R1 of the ACC road is two pieces).
struct Region {
  std::vector<Box> boxes;
  bool contains(const VectorXd& coords) const;
};

/// Non-overlapping cover of the operating box by regions. Region ids are 1-based.
struct RegionPartition {
  std::vector<int> coords;  // state indices the boxes refer to
  Box domain;
  std::vector<Region> regions;

  int region_count() const { return static_cast<int>(regions.size()); }
  VectorXd project(const VectorXd& x) const;
  bool in_domain(const VectorXd& x) const;

  /// Unique region id containing x. Throws DomainError outside the domain or
  /// when the regions fail to claim x exactly once.
  int region_of(const VectorXd& x) const;

  /// Region of the nearest domain point; used for integrator stages that
  /// momentarily leave the box.
  int region_of_clamped(const VectorXd& x) const;

  /// The whole domain as one closed region.
  static RegionPartition single_region(std::vector<int> coords, Box domain);

  /// Splits `coord` at the given cut points into half-open pieces [lo, hi);
  /// the last piece is closed at the domain's upper edge.
  static RegionPartition split_along(std::vector<int> coords, Box domain, int coord,
                                     const std::vector<double>& cuts);
};

/// x_dot = f(x) + g(x) u.
struct ControlAffineField {
  std::function<VectorXd(const VectorXd&)> f;
  std::function<MatrixXd(const VectorXd&)> g;

  VectorXd operator()(const VectorXd& x, const VectorXd& u) const { return f(x) + g(x) * u; }
};

using NominalModel = ControlAffineField;

/// Classical RK4 with zero-order-hold input.
VectorXd rk4_step(const std::function<VectorXd(const VectorXd&, const VectorXd&)>& field,
                  const VectorXd& x, const VectorXd& u, double dt);

struct StepResult {
  VectorXd x;
  bool domain_exit = false;
};

/// The true switching system: one control-affine field per region.
struct SwitchingPlant {
  std::vector<ControlAffineField> fields;  // index r - 1
  RegionPartition partition;
  int control_dim = 1;
  std::vector<std::string> state_names;

  int state_dim() const { return static_cast<int>(state_names.size()); }
  const ControlAffineField& field(int region) const { return fields.at(static_cast<std::size_t>(region - 1)); }

  /// f_r(x) + g_r(x) u for the region containing x.
  VectorXd true_dynamics(const VectorXd& x, const VectorXd& u) const;

  /// One RK4 step; the region is looked up again at every stage.
  StepResult step(const VectorXd& x, const VectorXd& u, double dt) const;
};

// --- adaptive cruise control benchmark ---------------------------------------------

struct AccVehicleParams {
  double mass = 1.0;
  double f0 = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double c = 1.0;

  double rolling_resistance(double v) const { return f0 + f1 * v + f2 * v * v; }
};

struct AccConfig {
  AccVehicleParams true_r1{3300.0, 0.2, 10.0, 0.5, 1.0};
  AccVehicleParams true_r2{3300.0, 1.0, 50.0, 4.5, 0.5};
  AccVehicleParams nominal{1050.0, 0.1, 15.0, 2.25, 1.0};
  double v0 = 10.0;   // front car speed
  double T_h = 1.6;   // headway time
  double v_d = 24.0;  // desired speed
  double z0 = 140.0;
  double x1_0 = 0.0;
  double x2_0 = 14.0;
  // Road segment with the second surface, closed on both ends.
  double r2_lo = 15.0;
  double r2_hi = 25.0;
  double x1_max = 700.0;
  double x2_max = 30.0;

  void validate() const;
};

struct CertificateGains {
  double lambda = 1.0;
  double gamma = 1.0;
  double rho = 100.0;
};

struct AccBenchmark {
  SwitchingPlant plant;
  NominalModel nominal;
  CertificatePair certs;
  RegionPartition partition;
  VectorXd x0;  // [x1, x2, z]
};

/// State is [x1, x2, z]; the partition is over (x1, x2).
AccBenchmark acc_benchmark(const AccConfig& config, const CertificateGains& gains = {});

} // namespace switchsafe
