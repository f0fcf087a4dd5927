#include "switchsafe/residual_learning.hpp"

#include "switchsafe/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace switchsafe {

using nlohmann::json;

std::vector<ResidualSample> measure_residuals(const std::vector<TrajectoryPoint>& trajectory,
                                              const NominalModel& nominal, const CertificatePair& certs,
                                              double dt, const RegionPartition& partition) {
  if (trajectory.size() < 2) throw TrajectoryError("residual measurement needs at least 2 samples");
  if (!(dt > 0.0)) throw TrajectoryError("residual measurement needs dt > 0");
  std::vector<ResidualSample> out;
  out.reserve(trajectory.size() - 1);
  for (std::size_t j = 0; j + 1 < trajectory.size(); ++j) {
    const auto& a = trajectory[j];
    const auto& b = trajectory[j + 1];
    if (std::abs((b.t - a.t) - dt) > 1e-9) {
      std::ostringstream msg;
      msg << "non-uniform time stamps at t = " << a.t << " (step " << b.t - a.t << ", expected " << dt << ")";
      throw TrajectoryError(msg.str());
    }
    ResidualSample s;
    s.x = 0.5 * (a.x + b.x);
    s.u = a.u;
    s.t = a.t;
    const VectorXd xdot = nominal(s.x, s.u);
    s.omega_V = (certs.V.value(b.x) - certs.V.value(a.x)) / dt - certs.V.gradient(s.x).dot(xdot);
    s.omega_h = (certs.h.value(b.x) - certs.h.value(a.x)) / dt - certs.h.gradient(s.x).dot(xdot);
    s.region = partition.region_of(s.x);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RegionDataset> partition_dataset(const std::vector<ResidualSample>& samples,
                                             const RegionPartition& partition, const std::vector<int>& features,
                                             int control_dim) {
  const int R = partition.region_count();
  std::vector<std::vector<const ResidualSample*>> buckets(static_cast<std::size_t>(R));
  for (const auto& s : samples) {
    const int r = partition.region_of(s.x);
    buckets[static_cast<std::size_t>(r - 1)].push_back(&s);
  }
  const auto nf = static_cast<Eigen::Index>(features.size());
  std::vector<RegionDataset> out;
  for (int r = 1; r <= R; ++r) {
    const auto& bucket = buckets[static_cast<std::size_t>(r - 1)];
    const auto n = static_cast<Eigen::Index>(bucket.size());
    RegionDataset d;
    d.region = r;
    d.X.resize(nf, n);
    d.Y.resize(control_dim + 1, n);
    d.omega_V.resize(n);
    d.omega_h.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const ResidualSample& s = *bucket[static_cast<std::size_t>(j)];
      if (s.u.size() != control_dim) throw std::invalid_argument("partition_dataset: control dimension mismatch");
      for (Eigen::Index k = 0; k < nf; ++k) d.X(k, j) = s.x(features[static_cast<std::size_t>(k)]);
      d.Y.col(j) = augment(s.u);
      d.omega_V(j) = s.omega_V;
      d.omega_h(j) = s.omega_h;
    }
    out.push_back(std::move(d));
  }
  return out;
}

void MogpSettings::validate() const {
  hyper.validate();
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  for (double b : region_beta) {
    if (!(b >= 0.0)) throw std::invalid_argument("region beta must be non-negative");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(default_lengthscale > 0.0 && default_signal > 0.0 && default_noise > 0.0)) {
    throw std::invalid_argument("default kernel parameters must be positive");
  }
}

const FittedGP& BatchMOGPModel::model(int region, ResidualTarget target) const {
  const auto& list = target == ResidualTarget::V ? V : h;
  return list.at(static_cast<std::size_t>(region - 1));
}

VectorXd BatchMOGPModel::feature(const VectorXd& x) const {
  VectorXd f(static_cast<Eigen::Index>(features.size()));
  for (std::size_t k = 0; k < features.size(); ++k) f(static_cast<Eigen::Index>(k)) = x(features[k]);
  return f;
}

namespace {

const char* target_name(ResidualTarget t) { return t == ResidualTarget::V ? "V" : "h"; }

FittedGP fit_target(const RegionDataset& d, ResidualTarget target, int nfeatures, int control_dim,
                    const MogpSettings& settings) {
  const std::string context = "region " + std::to_string(d.region) + ", target " + target_name(target);
  CompositeKernel kernel;
  kernel.region_id = d.region;
  for (int i = 0; i <= control_dim; ++i) {
    kernel.base.push_back(make_se(VectorXd::Constant(nfeatures, settings.default_lengthscale), settings.default_signal));
  }
  double noise = settings.default_noise;
  try {
    if (settings.optimize && d.size() >= 2) {
      HyperOptConfig hc = settings.hyper;
      hc.seed = settings.hyper.seed + 1000003ULL * static_cast<std::uint64_t>(d.region) +
                (target == ResidualTarget::h ? 17ULL : 0ULL);
      HyperOptResult res = optimize_hyperparams(kernel, d.X, d.Y, d.omega(target), hc);
      kernel = res.kernel;
      noise = res.noise_variance;
    }
    return FittedGP::fit(kernel, d.X, d.Y, d.omega(target), noise, context);
  } catch (const NumericalError& e) {
    throw NumericalError(context + ": " + e.what());
  } catch (const OptimizationError& e) {
    throw OptimizationError(context + ": " + e.what());
  }
}

} // namespace

BatchMOGPModel fit_batch_mogp(const std::vector<RegionDataset>& datasets, const RegionPartition& partition,
                              const std::vector<int>& features, int control_dim, const MogpSettings& settings) {
  settings.validate();
  const int R = partition.region_count();
  if (static_cast<int>(datasets.size()) != R) {
    throw std::invalid_argument("fit_batch_mogp: one dataset per region is required");
  }
  bool any = false;
  for (const auto& d : datasets) any = any || d.size() > 0;
  if (!any) throw std::invalid_argument("fit_batch_mogp: every region dataset is empty");
  if (!settings.region_beta.empty() && static_cast<int>(settings.region_beta.size()) != R) {
    throw std::invalid_argument("fit_batch_mogp: region_beta needs one entry per region");
  }

  BatchMOGPModel model;
  model.partition = partition;
  model.features = features;
  model.control_dim = control_dim;
  model.delta = settings.delta;
  const int nf = static_cast<int>(features.size());
  for (int r = 1; r <= R; ++r) {
    const RegionDataset& d = datasets[static_cast<std::size_t>(r - 1)];
    if (d.region != r) throw std::invalid_argument("fit_batch_mogp: datasets must be ordered by region");
    model.V.push_back(fit_target(d, ResidualTarget::V, nf, control_dim, settings));
    model.h.push_back(fit_target(d, ResidualTarget::h, nf, control_dim, settings));
    model.beta.push_back(settings.region_beta.empty() ? settings.beta
                                                      : settings.region_beta[static_cast<std::size_t>(r - 1)]);
  }
  return model;
}

ResidualQuery query_residual(const BatchMOGPModel& model, const VectorXd& x, ResidualTarget target) {
  ResidualQuery q;
  q.region = model.partition.region_of(x);
  const FittedGP& gp = model.model(q.region, target);
  q.posterior = affine_posterior(gp, model.feature(x));
  q.beta = model.beta.at(static_cast<std::size_t>(q.region - 1));
  q.untrained = !gp.trained();
  return q;
}

void write_dataset_csv(std::ostream& os, const std::vector<ResidualSample>& samples,
                       const std::vector<std::string>& state_names) {
  const int m = samples.empty() ? 1 : static_cast<int>(samples.front().u.size());
  os << "t";
  for (const auto& n : state_names) os << ',' << n;
  for (int i = 1; i <= m; ++i) os << ",u" << (m == 1 ? std::string() : std::to_string(i));
  os << ",omega_V,omega_h,region\n";
  os << std::setprecision(17);
  for (const auto& s : samples) {
    os << s.t;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) os << ',' << s.x(i);
    for (Eigen::Index i = 0; i < s.u.size(); ++i) os << ',' << s.u(i);
    os << ',' << s.omega_V << ',' << s.omega_h << ',' << s.region << '\n';
  }
}

std::vector<ResidualSample> read_dataset_csv(std::istream& is, int state_dim, int control_dim) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("dataset CSV: missing header");
  std::vector<ResidualSample> out;
  const int expected = 1 + state_dim + control_dim + 3;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != expected) {
      throw std::invalid_argument("dataset CSV: wrong column count on line " + std::to_string(lineno));
    }
    ResidualSample s;
    s.t = vals[0];
    s.x = Eigen::Map<VectorXd>(vals.data() + 1, state_dim);
    s.u = Eigen::Map<VectorXd>(vals.data() + 1 + state_dim, control_dim);
    s.omega_V = vals[static_cast<std::size_t>(1 + state_dim + control_dim)];
    s.omega_h = vals[static_cast<std::size_t>(2 + state_dim + control_dim)];
    s.region = static_cast<int>(vals[static_cast<std::size_t>(3 + state_dim + control_dim)]);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

json matrix_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd M(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows) throw std::invalid_argument("model JSON: bad matrix shape");
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::invalid_argument("model JSON: bad matrix shape");
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return M;
}

json gp_json(const FittedGP& gp) {
  json j;
  json base = json::array();
  for (const auto& b : gp.kernel().base) {
    base.push_back({{"lengthscales", std::vector<double>(b.lengthscales.data(), b.lengthscales.data() + b.lengthscales.size())},
                    {"signal_variance", b.signal_variance}});
  }
  j["base"] = base;
  j["noise_variance"] = gp.noise_variance();
  j["X"] = matrix_json(gp.X());
  j["Y"] = matrix_json(gp.Y());
  j["omega"] = std::vector<double>(gp.omega().data(), gp.omega().data() + gp.omega().size());
  return j;
}

FittedGP gp_from_json(const json& j, int region, int nfeatures, const std::string& context) {
  CompositeKernel k;
  k.region_id = region;
  for (const auto& b : j.at("base")) {
    const auto ls = b.at("lengthscales").get<std::vector<double>>();
    k.base.push_back(make_se(Eigen::Map<const VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size())),
                             b.at("signal_variance").get<double>()));
  }
  const auto omega = j.at("omega").get<std::vector<double>>();
  const auto n = static_cast<Eigen::Index>(omega.size());
  MatrixXd X = matrix_from_json(j.at("X"), nfeatures, n);
  MatrixXd Y = matrix_from_json(j.at("Y"), k.augmented_dim(), n);
  return FittedGP::fit(k, X, Y, Eigen::Map<const VectorXd>(omega.data(), n), j.at("noise_variance").get<double>(),
                       context);
}

} // namespace

std::string model_to_json(const BatchMOGPModel& model) {
  json j;
  j["format"] = "switchsafe-mogp";
  j["version"] = 1;
  j["features"] = model.features;
  j["control_dim"] = model.control_dim;
  j["delta"] = model.delta;
  j["beta"] = model.beta;
  json regions = json::array();
  for (int r = 1; r <= model.region_count(); ++r) {
    regions.push_back({{"region", r},
                       {"V", gp_json(model.model(r, ResidualTarget::V))},
                       {"h", gp_json(model.model(r, ResidualTarget::h))}});
  }
  j["regions"] = regions;
  return j.dump(1);
}

BatchMOGPModel model_from_json(const std::string& text, const RegionPartition& partition) {
  const json j = json::parse(text);
  if (j.at("format") != "switchsafe-mogp" || j.at("version") != 1) {
    throw std::invalid_argument("model JSON: unsupported format");
  }
  BatchMOGPModel model;
  model.partition = partition;
  model.features = j.at("features").get<std::vector<int>>();
  model.control_dim = j.at("control_dim").get<int>();
  model.delta = j.at("delta").get<double>();
  model.beta = j.at("beta").get<std::vector<double>>();
  const int nf = static_cast<int>(model.features.size());
  for (const auto& reg : j.at("regions")) {
    const int r = reg.at("region").get<int>();
    model.V.push_back(gp_from_json(reg.at("V"), r, nf, "region " + std::to_string(r) + ", target V"));
    model.h.push_back(gp_from_json(reg.at("h"), r, nf, "region " + std::to_string(r) + ", target h"));
  }
  if (model.region_count() != partition.region_count() ||
      static_cast<int>(model.beta.size()) != partition.region_count()) {
    throw std::invalid_argument("model JSON: region count does not match the partition");
  }
  return model;
}

} // namespace switchsafe
