#include "switchsafe/switching_plant.hpp"

#include "switchsafe/errors.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace switchsafe {

bool Box::contains(const VectorXd& coords) const {
  if (static_cast<Eigen::Index>(bounds.size()) != coords.size()) return false;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (!bounds[i].contains(coords(static_cast<Eigen::Index>(i)))) return false;
  }
  return true;
}

bool Region::contains(const VectorXd& coords) const {
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(coords); });
}

VectorXd RegionPartition::project(const VectorXd& x) const {
  VectorXd out(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (coords[i] < 0 || coords[i] >= x.size()) {
      throw std::invalid_argument("partition coordinate index out of range");
    }
    out(static_cast<Eigen::Index>(i)) = x(coords[i]);
  }
  return out;
}

bool RegionPartition::in_domain(const VectorXd& x) const { return domain.contains(project(x)); }

int RegionPartition::region_of(const VectorXd& x) const {
  const VectorXd p = project(x);
  if (!domain.contains(p)) {
    std::ostringstream msg;
    msg << "state (" << p.transpose() << ") lies outside the operating domain";
    throw DomainError(msg.str());
  }
  int found = 0;
  for (int r = 0; r < region_count(); ++r) {
    if (regions[static_cast<std::size_t>(r)].contains(p)) {
      if (found != 0) {
        std::ostringstream msg;
        msg << "regions " << found << " and " << r + 1 << " overlap at (" << p.transpose() << ")";
        throw DomainError(msg.str());
      }
      found = r + 1;
    }
  }
  if (found == 0) {
    std::ostringstream msg;
    msg << "no region covers (" << p.transpose() << ")";
    throw DomainError(msg.str());
  }
  return found;
}

int RegionPartition::region_of_clamped(const VectorXd& x) const {
  VectorXd xc = x;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const Interval& iv = domain.bounds[i];
    xc(coords[i]) = std::clamp(xc(coords[i]), iv.lo, iv.hi);
  }
  return region_of(xc);
}

RegionPartition RegionPartition::single_region(std::vector<int> coords, Box domain) {
  RegionPartition p;
  p.coords = std::move(coords);
  for (auto& iv : domain.bounds) {
    iv.lo_closed = true;
    iv.hi_closed = true;
  }
  p.domain = domain;
  p.regions.push_back(Region{{domain}});
  return p;
}

RegionPartition RegionPartition::split_along(std::vector<int> coords, Box domain, int coord,
                                             const std::vector<double>& cuts) {
  if (coord < 0 || coord >= static_cast<int>(domain.bounds.size())) {
    throw std::invalid_argument("split_along: coordinate out of range");
  }
  for (auto& iv : domain.bounds) {
    iv.lo_closed = true;
    iv.hi_closed = true;
  }
  std::vector<double> edges{domain.bounds[static_cast<std::size_t>(coord)].lo};
  for (double c : cuts) {
    if (!(c > edges.back())) throw std::invalid_argument("split_along: cuts must increase");
    edges.push_back(c);
  }
  if (!(domain.bounds[static_cast<std::size_t>(coord)].hi > edges.back())) {
    throw std::invalid_argument("split_along: cut beyond the domain");
  }
  edges.push_back(domain.bounds[static_cast<std::size_t>(coord)].hi);

  RegionPartition p;
  p.coords = std::move(coords);
  p.domain = domain;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    Box b = domain;
    Interval& iv = b.bounds[static_cast<std::size_t>(coord)];
    iv.lo = edges[k];
    iv.hi = edges[k + 1];
    iv.lo_closed = true;
    iv.hi_closed = (k + 2 == edges.size());
    p.regions.push_back(Region{{b}});
  }
  return p;
}

VectorXd rk4_step(const std::function<VectorXd(const VectorXd&, const VectorXd&)>& field,
                  const VectorXd& x, const VectorXd& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const VectorXd k1 = field(x, u);
  const VectorXd k2 = field(x + 0.5 * dt * k1, u);
  const VectorXd k3 = field(x + 0.5 * dt * k2, u);
  const VectorXd k4 = field(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

VectorXd SwitchingPlant::true_dynamics(const VectorXd& x, const VectorXd& u) const {
  return field(partition.region_of(x))(x, u);
}

StepResult SwitchingPlant::step(const VectorXd& x, const VectorXd& u, double dt) const {
  auto stage = [this](const VectorXd& xs, const VectorXd& us) {
    return field(partition.region_of_clamped(xs))(xs, us);
  };
  StepResult out;
  out.x = rk4_step(stage, x, u, dt);
  out.domain_exit = !partition.in_domain(out.x);
  return out;
}

void AccConfig::validate() const {
  for (const auto* p : {&true_r1, &true_r2, &nominal}) {
    if (!(p->mass > 0.0)) throw ConfigError("vehicle mass must be positive");
  }
  if (!(T_h > 0.0)) throw ConfigError("headway time T_h must be positive");
  if (!(r2_lo < r2_hi) || !(r2_lo > 0.0) || !(r2_hi < x1_max)) {
    throw ConfigError("second road segment must lie strictly inside [0, x1_max]");
  }
  if (!(x2_max > 0.0)) throw ConfigError("x2_max must be positive");
}

namespace {

ControlAffineField acc_field(const AccVehicleParams& p, double v0) {
  ControlAffineField field;
  field.f = [p, v0](const VectorXd& x) {
    VectorXd dx(3);
    dx << x(1), -p.rolling_resistance(x(1)) / p.mass, v0 - x(1);
    return dx;
  };
  field.g = [p](const VectorXd&) {
    MatrixXd g = MatrixXd::Zero(3, 1);
    g(1, 0) = p.c / p.mass;
    return g;
  };
  return field;
}

} // namespace

AccBenchmark acc_benchmark(const AccConfig& config, const CertificateGains& gains) {
  config.validate();
  AccBenchmark bench;

  Box domain{{Interval{0.0, config.x1_max, true, true}, Interval{0.0, config.x2_max, true, true}}};
  RegionPartition partition;
  partition.coords = {0, 1};
  partition.domain = domain;
  const Interval speed{0.0, config.x2_max, true, true};
  // R1 = ([0, lo) U (hi, max]) x [0, x2_max], R2 = [lo, hi] x [0, x2_max]
  partition.regions.push_back(Region{{Box{{Interval{0.0, config.r2_lo, true, false}, speed}},
                                      Box{{Interval{config.r2_hi, config.x1_max, false, true}, speed}}}});
  partition.regions.push_back(Region{{Box{{Interval{config.r2_lo, config.r2_hi, true, true}, speed}}}});

  bench.partition = partition;
  bench.plant.partition = partition;
  bench.plant.fields = {acc_field(config.true_r1, config.v0), acc_field(config.true_r2, config.v0)};
  bench.plant.control_dim = 1;
  bench.plant.state_names = {"x1", "x2", "z"};
  bench.nominal = acc_field(config.nominal, config.v0);

  const double v_d = config.v_d;
  const double T_h = config.T_h;
  bench.certs.V.value = [v_d](const VectorXd& x) { return (x(1) - v_d) * (x(1) - v_d); };
  bench.certs.V.gradient = [v_d](const VectorXd& x) {
    VectorXd g = VectorXd::Zero(3);
    g(1) = 2.0 * (x(1) - v_d);
    return g;
  };
  bench.certs.h.value = [T_h](const VectorXd& x) { return x(2) - T_h * x(1); };
  bench.certs.h.gradient = [T_h](const VectorXd&) {
    VectorXd g(3);
    g << 0.0, -T_h, 1.0;
    return g;
  };
  bench.certs.lambda = gains.lambda;
  bench.certs.gamma = gains.gamma;
  bench.certs.rho = gains.rho;

  bench.x0 = VectorXd(3);
  bench.x0 << config.x1_0, config.x2_0, config.z0;
  return bench;
}

} // namespace switchsafe
