#include "sbrl/rtd.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "sbrl/errors.hpp"

namespace sbrl {

RBFBasis RBFBasis::make(int n_basis, bool periodic, double ridge) {
  if (n_basis < 2) throw IllConditioned("n_basis must be >= 2");
  RBFBasis b;
  b.n_basis = n_basis;
  b.periodic = periodic;
  b.ridge = ridge;
  const double spacing =
      periodic ? 1.0 / n_basis : 1.0 / (n_basis - 1);
  b.bandwidth = 1.5 * spacing;
  return b;
}

double RBFBasis::center(int j) const {
  if (!custom_centers.empty()) return custom_centers[j];
  return periodic ? static_cast<double>(j) / n_basis
                  : static_cast<double>(j) / (n_basis - 1);
}

double RBFBasis::value(int j, double phase) const {
  double d = phase - center(j);
  if (periodic) {
    d = std::fmod(d, 1.0);
    if (d < -0.5) d += 1.0;
    if (d > 0.5) d -= 1.0;
  }
  const double z = d / bandwidth;
  return std::exp(-0.5 * z * z);
}

Eigen::RowVectorXd RBFBasis::row(double phase) const {
  Eigen::RowVectorXd r(n_basis);
  for (int j = 0; j < n_basis; ++j) r(j) = value(j, phase);
  return r;
}

namespace {

Eigen::VectorXd solve_ridge(const Eigen::MatrixXd& phi,
                            const Eigen::VectorXd& y, double ridge) {
  const int n = static_cast<int>(phi.cols());
  const int m = static_cast<int>(phi.rows());
  Eigen::MatrixXd a(m + n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m + n);
  a.topRows(m) = phi;
  a.bottomRows(n) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(n, n);
  b.head(m) = y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < n)
    throw IllConditioned("normal equations singular even with ridge");
  return qr.solve(b);
}

}  // namespace

WeightFit fit_weights(const ReferenceTrajectory& demo, const Track& track,
                      const RBFBasis& basis) {
  const ArcLengthCurve& cl = track.centerline;
  const double lap = cl.total_length();
  const auto& pts = demo.curve.points();
  const int m = static_cast<int>(pts.size());
  if (m < basis.n_basis)
    throw InsufficientData("fewer demo samples than basis functions");

  Eigen::MatrixXd phi(m, basis.n_basis);
  Eigen::VectorXd y_lat(m), y_speed(m);
  for (int i = 0; i < m; ++i) {
    const Projection p = cl.project(pts[i]);
    phi.row(i) = basis.row(p.s / lap);
    y_lat(i) = p.lateral;
    y_speed(i) = demo.speed[i];
  }

  WeightFit fit;
  fit.weights.w_lateral = solve_ridge(phi, y_lat, basis.ridge);
  fit.weights.w_speed = solve_ridge(phi, y_speed, basis.ridge);
  fit.rms_lateral =
      std::sqrt((phi * fit.weights.w_lateral - y_lat).squaredNorm() / m);
  fit.rms_speed =
      std::sqrt((phi * fit.weights.w_speed - y_speed).squaredNorm() / m);
  return fit;
}

TrajectoryDistributionModel fit_rtd(const std::vector<TrajectoryWeights>& ws,
                                    const RBFBasis& basis,
                                    const std::string& track_binding,
                                    double jitter_scale) {
  const int k = static_cast<int>(ws.size());
  if (k < 2) throw InsufficientData("need >= 2 demonstrations");
  const int n_lat = static_cast<int>(ws[0].w_lateral.size());
  const int n_spd = static_cast<int>(ws[0].w_speed.size());
  const int dim = n_lat + n_spd;

  Eigen::MatrixXd x(k, dim);
  for (int i = 0; i < k; ++i) {
    x.row(i).head(n_lat) = ws[i].w_lateral.transpose();
    x.row(i).tail(n_spd) = ws[i].w_speed.transpose();
  }
  TrajectoryDistributionModel model;
  model.basis = basis;
  model.track_binding = track_binding;
  model.mu_w = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mu_w.transpose();
  model.sigma_w = centered.transpose() * centered / (k - 1);
  double jitter = jitter_scale * model.sigma_w.trace() / dim;
  if (jitter <= 0.0) jitter = jitter_scale;
  model.sigma_w += jitter * Eigen::MatrixXd::Identity(dim, dim);
  return model;
}

double reconstruct_lateral(const RBFBasis& basis, const Eigen::VectorXd& w_lat,
                           double phase) {
  return basis.row(phase).dot(w_lat);
}

double reconstruct_speed(const RBFBasis& basis, const Eigen::VectorXd& w_speed,
                         double phase) {
  return basis.row(phase).dot(w_speed);
}

ReferenceTrajectory reconstruct_reference(
    const TrajectoryDistributionModel& model, const Track& track,
    const Eigen::VectorXd& w) {
  const ArcLengthCurve& cl = track.centerline;
  const double lap = cl.total_length();
  const int n = model.basis.n_basis;
  const Eigen::VectorXd w_lat = w.head(n);
  const Eigen::VectorXd w_spd = w.tail(n);

  std::vector<Vec2> pts;
  std::vector<double> speeds;
  const auto& cpts = cl.points();
  const auto& cum = cl.cum_s();
  pts.reserve(cpts.size());
  for (size_t i = 0; i < cpts.size(); ++i) {
    const double s = cum[i];
    const double phase = s / lap;
    double lat = reconstruct_lateral(model.basis, w_lat, phase);
    const double bound_left = model.lateral_margin * track.width_left_at(s);
    const double bound_right = model.lateral_margin * track.width_right_at(s);
    lat = std::clamp(lat, -bound_right, bound_left);
    double v = reconstruct_speed(model.basis, w_spd, phase);
    v = std::clamp(v, model.v_floor, model.v_cap);
    pts.push_back(cpts[i] + lat * cl.normal_at(s));
    speeds.push_back(v);
  }
  ReferenceTrajectory ref;
  ref.curve = build_curve(pts, cl.closed());
  ref.speed = std::move(speeds);
  return ref;
}

ReferenceTrajectory sample_reference(const TrajectoryDistributionModel& model,
                                     const Track& track, uint64_t seed) {
  const int dim = static_cast<int>(model.mu_w.size());
  Eigen::LLT<Eigen::MatrixXd> llt(model.sigma_w);
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("sigma_w is not positive definite");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim);
  for (int i = 0; i < dim; ++i) z(i) = normal(rng);
  const Eigen::VectorXd w = model.mu_w + llt.matrixL() * z;
  return reconstruct_reference(model, track, w);
}

void save_rtd(const TrajectoryDistributionModel& model,
              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "track: " << model.track_binding << "\n";
  out << "n_basis: " << model.basis.n_basis << "\n";
  out << "bandwidth: " << model.basis.bandwidth << "\n";
  out << "ridge: " << model.basis.ridge << "\n";
  out << "periodic: " << (model.basis.periodic ? "true" : "false") << "\n";
  out << "v_floor: " << model.v_floor << "\n";
  out << "v_cap: " << model.v_cap << "\n";
  out << "lateral_margin: " << model.lateral_margin << "\n";
  const int dim = static_cast<int>(model.mu_w.size());
  out << "dim: " << dim << "\n";
  out << "mu_w:";
  for (int i = 0; i < dim; ++i) out << " " << model.mu_w(i);
  out << "\nsigma_w:\n";
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) out << model.sigma_w(i, j) << " ";
    out << "\n";
  }
}

TrajectoryDistributionModel load_rtd(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  TrajectoryDistributionModel model;
  std::string key, flag;
  int dim = 0;
  in >> key >> model.track_binding;
  in >> key >> model.basis.n_basis;
  in >> key >> model.basis.bandwidth;
  in >> key >> model.basis.ridge;
  in >> key >> flag;
  model.basis.periodic = (flag == "true");
  in >> key >> model.v_floor;
  in >> key >> model.v_cap;
  in >> key >> model.lateral_margin;
  in >> key >> dim;
  if (!in || dim <= 0) throw IoError("malformed RTD file: " + path);
  model.mu_w.resize(dim);
  in >> key;
  for (int i = 0; i < dim; ++i) in >> model.mu_w(i);
  in >> key;
  model.sigma_w.resize(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) in >> model.sigma_w(i, j);
  if (!in) throw IoError("malformed RTD file: " + path);
  return model;
}

}  // namespace sbrl
