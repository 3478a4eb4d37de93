#include "cdoa/baselines.hpp"
#include "cdoa/localizers.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace cdoa {

// ---------------------------------------------------------------- trilateration

double range_residual(const Eigen::Matrix2Xd& anchors, const Eigen::VectorXd& distances,
                      const Position& p) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < anchors.cols(); ++i) {
    const double r = (p - anchors.col(i)).norm() - distances(i);
    sum += r * r;
  }
  return sum;
}

TrilaterationResult trilaterate_distances(const Eigen::Matrix2Xd& anchors,
                                          const Eigen::VectorXd& distances,
                                          const Position& initial) {
  if (anchors.cols() < 2 || anchors.cols() != distances.size())
    throw InvalidArgument("trilateration needs matching anchors and distances");
  require_finite(initial, "trilateration start");

  constexpr int kMaxIterations = 100;
  constexpr double kStepTol = 1e-9;
  const Eigen::Index n = anchors.cols();

  TrilaterationResult out;
  Position p = initial;
  double cost = range_residual(anchors, distances, p);
  double lambda = 1e-3;
  Eigen::VectorXd r(n);
  Eigen::MatrixXd jac(n, 2);

  for (int it = 0; it < kMaxIterations; ++it) {
    out.iterations = it + 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector2d diff = p - anchors.col(i);
      const double norm = diff.norm();
      r(i) = norm - distances(i);
      if (norm > 1e-12) jac.row(i) = (diff / norm).transpose();
      else jac.row(i).setZero();
    }
    const Eigen::Matrix2d jtj = jac.transpose() * jac;
    const Eigen::Vector2d jtr = jac.transpose() * r;
    if (jtr.norm() < 1e-15) {
      out.converged = true;
      break;
    }
    const Eigen::Matrix2d damped = jtj + lambda * (jtj.diagonal().asDiagonal().toDenseMatrix() +
                                                   Eigen::Matrix2d::Identity());
    const Eigen::Vector2d step = damped.ldlt().solve(-jtr);
    const Position trial = p + step;
    const double trial_cost = range_residual(anchors, distances, trial);
    if (std::isfinite(trial_cost) && trial_cost <= cost) {
      p = trial;
      cost = trial_cost;
      lambda = std::max(lambda / 10.0, 1e-12);
      if (step.norm() < kStepTol) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        out.converged = true;  // no descent direction left
        break;
      }
    }
  }
  out.position = p;
  out.residual = cost;
  return out;
}

TrilaterationResult trilaterate(const NodeLayout& layout, const RssiSnapshot& snap,
                                const ChannelModel& model, const std::optional<Workspace>& ws) {
  if (layout.size() < 3) throw InvalidLayout("trilateration needs at least 3 anchors");
  if (snap.readings.size() != static_cast<Eigen::Index>(layout.size()))
    throw InvalidArgument("snapshot does not match layout");
  const Eigen::Matrix2Xd anchors = layout.positions();
  Eigen::VectorXd d(snap.readings.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = distance_from_rssi(model, snap.readings(i));
  const Position start = weighted_centroid(layout, snap, WeightMode::PowerMw).position;

  if (!layout.is_collinear()) return trilaterate_distances(anchors, d, start);

  // On the anchor line the normal component of the gradient vanishes, so
  // start on both sides and keep the mirror image that lies in the workspace.
  const Eigen::Matrix2Xd centered = anchors.colwise() - anchors.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered * centered.transpose(),
                                               Eigen::ComputeFullU);
  const Eigen::Vector2d normal = svd.matrixU().col(1);
  const double offset = std::max(1.0, d.mean());
  TrilaterationResult best;
  bool have = false;
  for (double sign : {1.0, -1.0}) {
    TrilaterationResult cand = trilaterate_distances(anchors, d, start + sign * offset * normal);
    const bool inside = !ws || ws->contains(cand.position, 1e-9);
    const bool best_inside = have && (!ws || ws->contains(best.position, 1e-9));
    if (!have || (inside && !best_inside) ||
        (inside == best_inside && cand.residual < best.residual - 1e-12)) {
      best = cand;
      have = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------- WCL

WeightMode parse_weight_mode(std::string_view name) {
  if (name == "power_mw") return WeightMode::PowerMw;
  if (name == "raw_rssi") return WeightMode::RawRssi;
  if (name == "inverse_distance") return WeightMode::InverseDistance;
  throw InvalidArgument("unknown WCL weight mode '" + std::string(name) + "'");
}

std::string_view to_string(WeightMode m) {
  switch (m) {
    case WeightMode::PowerMw: return "power_mw";
    case WeightMode::RawRssi: return "raw_rssi";
    case WeightMode::InverseDistance: return "inverse_distance";
  }
  return "?";
}

CentroidResult weighted_centroid(const NodeLayout& layout, const RssiSnapshot& snap,
                                 WeightMode mode, const ChannelModel& model) {
  if (layout.size() == 0) throw InvalidArgument("weighted centroid needs nodes");
  if (snap.readings.size() != static_cast<Eigen::Index>(layout.size()))
    throw InvalidArgument("snapshot does not match layout");
  const auto& s = snap.readings;
  Eigen::VectorXd w(s.size());
  switch (mode) {
    case WeightMode::PowerMw: {
      // Common scale factor 10^(-max/10) cancels in the ratio.
      const double top = s.maxCoeff();
      for (Eigen::Index i = 0; i < s.size(); ++i) w(i) = std::pow(10.0, (s(i) - top) / 10.0);
      break;
    }
    case WeightMode::RawRssi:
      w = s;
      break;
    case WeightMode::InverseDistance:
      for (Eigen::Index i = 0; i < s.size(); ++i)
        w(i) = 1.0 / std::max(distance_from_rssi(model, s(i)), model.min_distance);
      break;
  }
  const double total = w.sum();
  if (total == 0.0 || !std::isfinite(total)) return {layout.centroid(), true};
  const Eigen::Matrix2Xd pts = layout.positions();
  return {(pts * w) / total, false};
}

// ---------------------------------------------------------------- D-RSSI

DrssiLocator::DrssiLocator(const NodeLayout& layout, const ChannelModel& model,
                           const Workspace& ws, double resolution)
    : grid_(lattice(ws, resolution)) {
  theory_.resize(grid_.cols(), static_cast<Eigen::Index>(layout.size()));
  for (Eigen::Index c = 0; c < grid_.cols(); ++c)
    for (std::size_t i = 0; i < layout.size(); ++i)
      theory_(c, static_cast<Eigen::Index>(i)) =
          model.mean_rssi((grid_.col(c) - layout.node(i).pos).norm());
}

Position DrssiLocator::locate(const RssiSnapshot& snap) const {
  if (snap.readings.size() != theory_.cols()) throw InvalidArgument("snapshot does not match layout");
  Eigen::Index ref = 0;
  snap.readings.maxCoeff(&ref);
  const Eigen::VectorXd measured = snap.readings.array() - snap.readings(ref);
  Eigen::Index best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < theory_.rows(); ++c) {
    double cost = 0.0;
    const double base = theory_(c, ref);
    for (Eigen::Index i = 0; i < theory_.cols(); ++i) {
      const double e = (theory_(c, i) - base) - measured(i);
      cost += e * e;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = c;
    }
  }
  return grid_.col(best);
}

Position drssi_locate(const NodeLayout& layout, const RssiSnapshot& snap,
                      const ChannelModel& model, const Workspace& ws, double resolution) {
  return DrssiLocator(layout, model, ws, resolution).locate(snap);
}

// ---------------------------------------------------------------- I-RSSI

double top_k_mean(std::span<const double> values, int k, bool* short_bag) {
  if (values.empty()) throw InvalidArgument("top-k mean of an empty bag");
  if (k < 1) throw InvalidArgument("k must be >= 1");
  std::vector<double> sorted(values.begin(), values.end());
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), sorted.size());
  if (short_bag) *short_bag = take < static_cast<std::size_t>(k);
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take),
                    sorted.end(), std::greater<>());
  return std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take), 0.0) /
         static_cast<double>(take);
}

double differential_distance(const ChannelModel& model, double r_t, double r_prev) {
  return distance_from_rssi(model, r_t) - distance_from_rssi(model, r_prev);
}

IRssiResult irssi_locate(IRssiState& state, const NodeLayout& layout,
                         const Eigen::MatrixXd& bags, const ChannelModel& model, int k) {
  if (bags.rows() != static_cast<Eigen::Index>(layout.size()))
    throw InvalidArgument("one bag per node required");
  IRssiResult out;
  std::vector<double> processed(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Eigen::VectorXd row = bags.row(static_cast<Eigen::Index>(i)).transpose();
    bool short_bag = false;
    processed[i] = top_k_mean(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                              k, &short_bag);
    out.short_bag = out.short_bag || short_bag;
  }
  if (!state.initialized) {
    state.distances.resize(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i)
      state.distances[i] = std::max((state.position - layout.node(i).pos).norm(), model.min_distance);
    state.prev_rssi = processed;
    state.initialized = true;
  }
  Eigen::VectorXd d(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    state.distances[i] = std::max(
        state.distances[i] + differential_distance(model, processed[i], state.prev_rssi[i]),
        model.min_distance);
    d(static_cast<Eigen::Index>(i)) = state.distances[i];
  }
  state.prev_rssi = processed;
  const TrilaterationResult tri = trilaterate_distances(layout.positions(), d, state.position);
  state.position = tri.position;
  out.position = tri.position;
  out.converged = tri.converged;
  return out;
}

// ---------------------------------------------------------------- PF-EKF

bool ekf_step(EkfState& s, const EkfMatrices& m, const Position& x) {
  const Eigen::Vector2d y_bar = m.f * s.y;
  const Eigen::Matrix2d p_bar = m.f * s.p * m.f.transpose() + m.q;
  Eigen::Matrix2d innovation = m.h * p_bar * m.h.transpose() + m.r;
  bool regularized = false;
  if (std::abs(innovation.determinant()) < 1e-300 || !innovation.allFinite()) {
    innovation += 1e-9 * Eigen::Matrix2d::Identity();
    regularized = true;
  }
  const Eigen::Matrix2d gain = p_bar * m.h.transpose() * innovation.inverse();
  s.y = y_bar + gain * (x - m.h * y_bar);
  const Eigen::Matrix2d p = (Eigen::Matrix2d::Identity() - gain * m.h) * p_bar;
  s.p = 0.5 * (p + p.transpose());
  return regularized;
}

void PfEkfConfig::validate() const {
  if (particles < 1) throw InvalidArgument("pfekf particles must be >= 1");
  auto spd = [](const Eigen::Matrix2d& a, const char* name) {
    if (!a.isApprox(a.transpose(), 1e-12) || a.llt().info() != Eigen::Success)
      throw InvalidArgument(std::string("pfekf ") + name + " must be symmetric positive definite");
  };
  spd(ekf.q, "Q");
  spd(ekf.r, "R");
  spd(initial_covariance, "initial covariance");
  if (!(particle_jitter >= 0.0)) throw InvalidArgument("pfekf jitter must be >= 0");
  if (!(rssi_sigma >= 0.0)) throw InvalidArgument("pfekf rssi sigma must be >= 0");
}

PfEkf::PfEkf(const PfEkfConfig& cfg, const NodeLayout& layout, const Workspace& ws,
             std::uint64_t seed)
    : cfg_(cfg), layout_(layout), ws_(ws), rng_(seed) {
  cfg_.validate();
  std::uniform_real_distribution<double> ux(ws.x_min, ws.x_max);
  std::uniform_real_distribution<double> uy(ws.y_min, ws.y_max);
  particles_.resize(2, cfg_.particles);
  for (Eigen::Index i = 0; i < particles_.cols(); ++i) particles_.col(i) = Position(ux(rng_), uy(rng_));
  ekf_.y = ws.center();
  ekf_.p = cfg_.initial_covariance;
}

PfEkfResult PfEkf::step(const RssiSnapshot& snap, const ChannelModel& model) {
  if (snap.readings.size() != static_cast<Eigen::Index>(layout_.size()))
    throw InvalidArgument("snapshot does not match layout");
  const double sigma =
      cfg_.rssi_sigma > 0.0 ? cfg_.rssi_sigma : std::max(model.noise_std, 1.0);
  std::normal_distribution<double> jitter(0.0, cfg_.particle_jitter);
  const Eigen::Index n = particles_.cols();
  Eigen::ArrayXd logw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Position p = particles_.col(i);
    if (cfg_.particle_jitter > 0.0) p += Position(jitter(rng_), jitter(rng_));
    p = ws_.clamp(p);
    particles_.col(i) = p;
    double ll = 0.0;
    for (std::size_t k = 0; k < layout_.size(); ++k) {
      const double e = snap.readings(static_cast<Eigen::Index>(k)) -
                       model.mean_rssi((p - layout_.node(k).pos).norm());
      ll -= e * e / (2.0 * sigma * sigma);
    }
    logw(i) = ll;
  }
  const Eigen::ArrayXd w = (logw - logw.maxCoeff()).exp();
  const std::vector<double> norm = normalize_weights(std::span<const double>(w.data(), static_cast<std::size_t>(n)));

  PfEkfResult out;
  out.observation = Position::Zero();
  for (Eigen::Index i = 0; i < n; ++i) out.observation += norm[static_cast<std::size_t>(i)] * particles_.col(i);

  const auto picks = multinomial_resample(norm, static_cast<std::size_t>(n), rng_);
  Eigen::Matrix2Xd next(2, n);
  for (Eigen::Index i = 0; i < n; ++i) next.col(i) = particles_.col(static_cast<Eigen::Index>(picks[static_cast<std::size_t>(i)]));
  particles_ = std::move(next);

  out.regularized = ekf_step(ekf_, cfg_.ekf, out.observation);
  out.position = ekf_.y;
  return out;
}

void BaselineConfig::validate() const {
  if (!(grid_resolution > 0.0)) throw InvalidArgument("grid_resolution must be > 0");
  if (irssi_k < 1 || irssi_bag < 1) throw InvalidArgument("irssi k and bag must be >= 1");
  if (irssi_k > irssi_bag) throw InvalidArgument("irssi k must not exceed the bag size");
  pfekf.validate();
}

}  // namespace cdoa
