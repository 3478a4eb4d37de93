#include "cdoa/localizers.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace cdoa {

namespace {

constexpr double kPi = std::numbers::pi;

inline double wrap_diff(double d) {
  // d in (-2pi, 2pi] for inputs already in (-pi, pi].
  if (d > kPi) d -= 2.0 * kPi;
  else if (d <= -kPi) d += 2.0 * kPi;
  return d;
}

inline double log_density(double err, double sigma) {
  static const double kLogSqrt2Pi = 0.5 * std::log(2.0 * kPi);
  return -std::log(sigma) - kLogSqrt2Pi - err * err / (2.0 * sigma * sigma);
}

inline double peak_log_density(double sigma) { return log_density(0.0, sigma); }

// Fixed-size blocks keep the temporaries in L1 and every lane on the same
// packet code path.
constexpr std::size_t kBlock = 64;
using Block = Eigen::Array<double, kBlock, 1>;

// atan on [0, 1]: Cephes rational approximation after reduction by pi/4.
Block atan_unit(const Block& a) {
  constexpr double p0 = -8.750608600031904122785e-1, p1 = -1.615753718733365076637e1,
                   p2 = -7.500855792314704667340e1, p3 = -1.228866684490136173410e2,
                   p4 = -6.485021904942025371773e1;
  constexpr double q0 = 2.485846490142306297962e1, q1 = 1.650270098316988542046e2,
                   q2 = 4.328810604912902668951e2, q3 = 4.853903996359136964868e2,
                   q4 = 1.945506571482613964425e2;
  constexpr double kMoreBits = 6.123233995736765886130e-17;
  const auto reduce = a > 0.66;
  const Block x = reduce.select((a - 1.0) / (a + 1.0), a);
  const Block z = x * x;
  const Block p = (((p0 * z + p1) * z + p2) * z + p3) * z + p4;
  const Block q = ((((z + q0) * z + q1) * z + q2) * z + q3) * z + q4;
  const Block r = x + x * z * p / q;
  return reduce.select(r + (0.25 * kPi + 0.5 * kMoreBits), r);
}

// atan2 in [-pi, pi].
Block atan2_block(const Block& y, const Block& x) {
  const Block ax = x.abs(), ay = y.abs();
  const Block hi = ax.max(ay), lo = ax.min(ay);
  Block r = atan_unit((hi > 0.0).select(lo / hi, 0.0));
  r = (ay > ax).select(0.5 * kPi - r, r);
  r = (x < 0.0).select(kPi - r, r);
  return (y < 0.0).select(-r, r);
}

}  // namespace

// ---------------------------------------------------------------- window

MeasurementWindow::MeasurementWindow(std::size_t capacity, double sigma)
    : capacity_(capacity), sigma_(sigma) {
  if (capacity_ < 1) throw InvalidArgument("window capacity must be >= 1");
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw InvalidArgument("sigma must be > 0");
}

void MeasurementWindow::push(const CdoaMeasurement& m, const Displacement& cumulative) {
  entries_.push_back({m, cumulative});
  while (entries_.size() > capacity_) entries_.pop_front();
}

// ---------------------------------------------------------------- bearings

BearingModel parse_bearing_model(std::string_view name) {
  if (name == "centroid") return BearingModel::Centroid;
  if (name == "predicted") return BearingModel::Predicted;
  throw InvalidArgument("unknown bearing model '" + std::string(name) + "'");
}

std::string_view to_string(BearingModel m) {
  return m == BearingModel::Centroid ? "centroid" : "predicted";
}

ExpectedBearing ExpectedBearing::centroid(const Position& c) {
  require_finite(c, "centroid");
  ExpectedBearing e;
  e.model_ = BearingModel::Centroid;
  e.centroid_ = c;
  return e;
}

ExpectedBearing ExpectedBearing::predicted(const NodeLayout& layout, GradientMethod method,
                                           double min_distance) {
  ExpectedBearing e;
  e.model_ = BearingModel::Predicted;
  e.layout_ = std::make_shared<const NodeLayout>(layout);
  e.centroid_ = layout.centroid();
  e.method_ = method;
  e.min_distance_ = min_distance;
  if (method == GradientMethod::Rect4) {
    if (!layout.is_rectangular4()) throw InvalidLayout("rect4 gradient needs a 4-node rectangle");
    e.corner_ = {0, 1, 2, 3};
    e.closed_form_ = true;
  } else if (method == GradientMethod::General) {
    // Resolve the corner nodes once; model_gradient validates the layout.
    (void)model_gradient(layout, layout.centroid() + Position(1.0, 0.5), method, min_distance);
    const double tol = std::min(layout.delta_x(), layout.delta_y()) / 10.0;
    const Position c = layout.centroid();
    const double lx = 0.5 * layout.delta_x();
    const double ly = 0.5 * layout.delta_y();
    const std::array<Position, 4> targets{Position{c.x() - lx, c.y() - ly},
                                          Position{c.x() - lx, c.y() + ly},
                                          Position{c.x() + lx, c.y() + ly},
                                          Position{c.x() + lx, c.y() - ly}};
    for (int k = 0; k < 4; ++k) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < layout.size(); ++i) {
        const double d = (layout.node(i).pos - targets[k]).norm();
        if (d < best) {
          best = d;
          e.corner_[k] = i;
        }
      }
      if (best > tol) throw InvalidLayout("offset corner unmatched");
    }
    e.closed_form_ = true;
  }
  return e;
}

ExpectedBearing ExpectedBearing::from_model(BearingModel model, const NodeLayout& layout,
                                            GradientMethod method) {
  return model == BearingModel::Centroid ? centroid(layout.centroid())
                                         : predicted(layout, method);
}

Eigen::Vector2d ExpectedBearing::direction(const Position& p) const {
  if (model_ == BearingModel::Centroid) return p - centroid_;
  if (!closed_form_) return model_gradient(*layout_, p, method_, min_distance_);
  // Readings -10 log10(d) plugged into the four-corner differences, with
  // positive constant factors dropped.
  const double m2 = min_distance_ * min_distance_;
  auto sq = [&](std::size_t k) {
    return std::max((p - layout_->node(corner_[k]).pos).squaredNorm(), m2);
  };
  const double sw = sq(0), nw = sq(1), ne = sq(2), se = sq(3);
  return {std::log((sw * nw) / (ne * se)) / layout_->delta_x(),
          std::log((sw * se) / (nw * ne)) / layout_->delta_y()};
}

void ExpectedBearing::errors(const Eigen::Matrix2Xd& candidates, Angle measured,
                             Eigen::ArrayXd& out) const {
  const Eigen::Index n = candidates.cols();
  out.resize(n);
  const double theta = measured.radians();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d d = direction(candidates.col(i));
    if (d.x() == 0.0 && d.y() == 0.0) {
      out(i) = nan;
      continue;
    }
    out(i) = wrap_diff(theta - std::atan2(d.y(), d.x()));
  }
}

void ExpectedBearing::add_log_terms(const double* xs, const double* ys, std::size_t n,
                                    const Displacement& shift, Angle measured, double sigma,
                                    double* acc) const {
  const double ux = measured.cos(), uy = measured.sin();
  const double c0 = peak_log_density(sigma);
  const double k = 1.0 / (2.0 * sigma * sigma);

  if (model_ == BearingModel::Predicted && !closed_form_) {
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d d = direction(Position(xs[i] - shift.x(), ys[i] - shift.y()));
      if (d.x() == 0.0 && d.y() == 0.0) continue;
      const double err = std::atan2(d.x() * uy - d.y() * ux, d.x() * ux + d.y() * uy);
      acc[i] += c0 - k * err * err;
    }
    return;
  }

  const double m2 = min_distance_ * min_distance_;
  std::array<double, 4> nx{}, ny{};
  if (model_ == BearingModel::Predicted) {
    for (int c = 0; c < 4; ++c) {
      nx[c] = layout_->node(corner_[c]).pos.x();
      ny[c] = layout_->node(corner_[c]).pos.y();
    }
  }

  Block px, py;
  for (std::size_t base = 0; base < n; base += kBlock) {
    const std::size_t len = std::min(kBlock, n - base);
    for (std::size_t i = 0; i < kBlock; ++i) {
      // Pad the tail with the first point; padded lanes are discarded.
      const std::size_t src = base + (i < len ? i : 0);
      px(i) = xs[src] - shift.x();
      py(i) = ys[src] - shift.y();
    }
    Block dx, dy;
    if (model_ == BearingModel::Centroid) {
      dx = px - centroid_.x();
      dy = py - centroid_.y();
    } else {
      auto sq = [&](int c) -> Block {
        return ((px - nx[c]).square() + (py - ny[c]).square()).max(m2);
      };
      const Block sw = sq(0), nw = sq(1), ne = sq(2), se = sq(3);
      dx = ((sw * nw) / (ne * se)).log() / layout_->delta_x();
      dy = ((sw * se) / (nw * ne)).log() / layout_->delta_y();
    }
    const Block err = atan2_block(dx * uy - dy * ux, dx * ux + dy * uy);
    const Block term = (dx == 0.0 && dy == 0.0).select(0.0, c0 - k * err.square());
    for (std::size_t i = 0; i < len; ++i) acc[base + i] += term(i);
  }
}

// ---------------------------------------------------------------- likelihood

double gaussian_density(double err, double sigma) {
  return std::exp(-err * err / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
}

LikelihoodResult cdoa_likelihood(const Position& candidate, const MeasurementWindow& window,
                                 const ExpectedBearing& expected) {
  if (window.empty()) throw InvalidArgument("likelihood needs a non-empty window");
  require_finite(candidate, "candidate");
  LikelihoodResult r;
  const Displacement latest = window.entries().back().cumulative;
  for (const auto& e : window.entries()) {
    const Position past = candidate - (latest - e.cumulative);
    const Eigen::Vector2d d = expected.direction(past);
    if (d.x() == 0.0 && d.y() == 0.0) {
      ++r.skipped;
      continue;
    }
    const double err = angular_error(e.measurement.angle, wrap_angle(std::atan2(d.y(), d.x())));
    r.value *= gaussian_density(err, window.sigma());
    r.log_value += log_density(err, window.sigma());
  }
  return r;
}

double cdoa_likelihood(const Position& candidate, const MeasurementWindow& window,
                       const Position& centroid) {
  return cdoa_likelihood(candidate, window, ExpectedBearing::centroid(centroid)).value;
}

void cdoa_log_likelihoods(const Eigen::Matrix2Xd& candidates, const MeasurementWindow& window,
                          const ExpectedBearing& expected, Eigen::ArrayXd& out) {
  if (window.empty()) throw InvalidArgument("likelihood needs a non-empty window");
  const auto n = static_cast<std::size_t>(candidates.cols());
  out.setZero(candidates.cols());
  const Eigen::ArrayXd xs = candidates.row(0).transpose();
  const Eigen::ArrayXd ys = candidates.row(1).transpose();
  const Displacement latest = window.entries().back().cumulative;
  for (const auto& e : window.entries())
    expected.add_log_terms(xs.data(), ys.data(), n, latest - e.cumulative, e.measurement.angle,
                           window.sigma(), out.data());
}

std::vector<double> normalize_weights(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw DegenerateWeights("all weights are zero");
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= sum;
  return out;
}

std::vector<std::size_t> multinomial_resample(std::span<const double> weights, std::size_t count,
                                              Rng& rng) {
  if (weights.empty()) throw InvalidArgument("resampling needs weights");
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  const double total = cdf.back();
  std::uniform_real_distribution<double> u(0.0, total);
  std::vector<std::size_t> out(count);
  for (auto& idx : out) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), weights.size() - 1);
  }
  return out;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             Rng& rng) {
  if (weights.empty()) throw InvalidArgument("resampling needs weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double step = total / static_cast<double>(count);
  std::uniform_real_distribution<double> u(0.0, step);
  double target = u(rng);
  double acc = weights[0];
  std::size_t j = 0;
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    while (target > acc && j + 1 < weights.size()) acc += weights[++j];
    out[i] = j;
    target += step;
  }
  return out;
}

Eigen::Matrix2Xd lattice(const Workspace& ws, double resolution, int* rows, int* cols) {
  if (!(resolution > 0.0)) throw InvalidArgument("resolution must be > 0");
  const int nc = std::max(1, static_cast<int>(std::lround(ws.width() / resolution)));
  const int nr = std::max(1, static_cast<int>(std::lround(ws.height() / resolution)));
  const double px = ws.width() / nc;
  const double py = ws.height() / nr;
  Eigen::Matrix2Xd out(2, static_cast<Eigen::Index>(nr) * nc);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c)
      out.col(static_cast<Eigen::Index>(r) * nc + c) =
          Position(ws.x_min + (c + 0.5) * px, ws.y_min + (r + 0.5) * py);
  if (rows) *rows = nr;
  if (cols) *cols = nc;
  return out;
}

// ---------------------------------------------------------------- CDOA-PF

void ParticleFilterConfig::validate() const {
  if (particles < 1) throw InvalidArgument("particle count must be >= 1");
  if (!(resolution > 0.0)) throw InvalidArgument("particle resolution must be > 0");
  if (!(motion_std >= 0.0)) throw InvalidArgument("motion_std must be >= 0");
  if (window < 1) throw InvalidArgument("window must be >= 1");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
}

CdoaParticleFilter::CdoaParticleFilter(const ParticleFilterConfig& cfg, const Workspace& ws,
                                       ExpectedBearing expected, std::uint64_t seed)
    : cfg_(cfg), ws_(ws), expected_(std::move(expected)), rng_(seed),
      window_(cfg.window, cfg.sigma) {
  cfg_.validate();
  lattice_ = lattice(ws_, cfg_.resolution);
  seed_uniform();
}

void CdoaParticleFilter::seed_uniform() {
  std::uniform_int_distribution<Eigen::Index> pick(0, lattice_.cols() - 1);
  particles_.assign(static_cast<std::size_t>(cfg_.particles), Particle{});
  const double w = 1.0 / cfg_.particles;
  for (auto& p : particles_) p = {lattice_.col(pick(rng_)), w};
}

void CdoaParticleFilter::predict(const std::optional<Displacement>& odometry) {
  const Displacement shift = odometry.value_or(Displacement::Zero());
  cumulative_ += shift;
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (auto& p : particles_) {
    Position next = p.pos + shift;
    if (cfg_.motion_std > 0.0)
      next += cfg_.motion_std * Position(jitter(rng_), jitter(rng_));
    p.pos = ws_.clamp(next);
  }
}

PfStepResult CdoaParticleFilter::step(const CdoaMeasurement& m,
                                      const std::optional<Displacement>& odometry) {
  predict(odometry);
  window_.push(m, cumulative_);

  const auto n = static_cast<Eigen::Index>(particles_.size());
  scratch_pos_.resize(2, n);
  for (Eigen::Index i = 0; i < n; ++i) scratch_pos_.col(i) = particles_[static_cast<std::size_t>(i)].pos;
  cdoa_log_likelihoods(scratch_pos_, window_, expected_, scratch_ll_);

  PfStepResult result;
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = std::exp(scratch_ll_(i));
  double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    result.log_domain = true;
    const double top = scratch_ll_.maxCoeff();
    if (!std::isfinite(top)) {
      seed_uniform();
      result.reseeded = true;
      return result;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      w[static_cast<std::size_t>(i)] = std::exp(scratch_ll_(i) - top);
  }
  const std::vector<double> norm = normalize_weights(w);
  std::size_t best = 0;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    particles_[i].weight = norm[i];
    if (norm[i] > norm[best]) best = i;
  }
  result.estimate = particles_[best].pos;

  const auto picks = cfg_.resampling == Resampling::Multinomial
                         ? multinomial_resample(norm, particles_.size(), rng_)
                         : systematic_resample(norm, particles_.size(), rng_);
  std::vector<Particle> next(particles_.size());
  const double uniform = 1.0 / static_cast<double>(particles_.size());
  for (std::size_t i = 0; i < picks.size(); ++i) next[i] = {particles_[picks[i]].pos, uniform};
  particles_ = std::move(next);
  return result;
}

// ---------------------------------------------------------------- CDOA-EM

GridState GridState::over(const Workspace& ws, double resolution) {
  GridState g;
  g.centers = lattice(ws, resolution, &g.rows, &g.cols);
  g.resolution = resolution;
  g.log_weights.setZero(g.centers.cols());
  g.weights.setOnes(g.centers.cols());
  return g;
}

GridState GridState::from_cells(Eigen::Matrix2Xd centers) {
  if (centers.cols() == 0) throw InvalidArgument("grid needs at least one cell");
  GridState g;
  g.rows = 1;
  g.cols = static_cast<int>(centers.cols());
  g.centers = std::move(centers);
  g.log_weights.setZero(g.centers.cols());
  g.weights.setOnes(g.centers.cols());
  return g;
}

Position em_scan(GridState& grid, const MeasurementWindow& window,
                 const ExpectedBearing& expected) {
  cdoa_log_likelihoods(grid.centers, window, expected, grid.log_weights);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < grid.log_weights.size(); ++i)
    if (grid.log_weights(i) > grid.log_weights(best)) best = i;
  grid.weights = (grid.log_weights - grid.log_weights(best)).exp();
  return grid.centers.col(best);
}

Position em_scan_pruned(GridState& grid, const MeasurementWindow& window,
                        const ExpectedBearing& expected, const std::optional<Position>& hint) {
  if (window.empty()) throw InvalidArgument("likelihood needs a non-empty window");
  const auto& entries = window.entries();
  const Displacement latest = entries.back().cumulative;
  const double sigma = window.sigma();
  // Skipped terms add 0, so the per-term bound must cover that too.
  const double ub = std::max(peak_log_density(sigma), 0.0);
  const std::size_t n = grid.size();

  // Exact total of the seed cell, summed in the same order as for every cell.
  double best = -std::numeric_limits<double>::infinity();
  if (hint && is_finite(*hint)) {
    Eigen::Index seed = 0;
    (grid.centers.colwise() - *hint).colwise().squaredNorm().minCoeff(&seed);
    const double sx = grid.centers(0, seed), sy = grid.centers(1, seed);
    double total = 0.0;
    for (const auto& e : entries)
      expected.add_log_terms(&sx, &sy, 1, latest - e.cumulative, e.measurement.angle, sigma, &total);
    best = total;
  }

  std::vector<double> xs(n), ys(n), part(n, 0.0);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = grid.centers(0, static_cast<Eigen::Index>(i));
    ys[i] = grid.centers(1, static_cast<Eigen::Index>(i));
    idx[i] = i;
  }
  const double slack = 1e-9 * (1.0 + std::abs(best));
  std::size_t active = n;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    expected.add_log_terms(xs.data(), ys.data(), active, latest - e.cumulative,
                           e.measurement.angle, sigma, part.data());
    const double remaining = static_cast<double>(entries.size() - 1 - k) * ub;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < active; ++i) {
      if (part[i] + remaining < best - slack) continue;
      xs[kept] = xs[i];
      ys[kept] = ys[i];
      part[kept] = part[i];
      idx[kept] = idx[i];
      ++kept;
    }
    active = kept;
  }
  if (active == 0) throw std::logic_error("pruned scan lost every cell");

  std::size_t best_i = 0;
  for (std::size_t i = 1; i < active; ++i)
    if (part[i] > part[best_i]) best_i = i;
  grid.log_weights.setConstant(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < active; ++i) grid.log_weights(static_cast<Eigen::Index>(idx[i])) = part[i];
  grid.weights = (grid.log_weights - part[best_i]).exp();
  return grid.centers.col(static_cast<Eigen::Index>(idx[best_i]));
}

Position em_step(GridState& grid, const CdoaMeasurement& m, MeasurementWindow& window,
                 const ExpectedBearing& expected, const Displacement& cumulative) {
  window.push(m, cumulative);
  return em_scan(grid, window, expected);
}

void GridConfig::validate() const {
  if (!(resolution > 0.0)) throw InvalidArgument("grid resolution must be > 0");
  if (window < 1) throw InvalidArgument("window must be >= 1");
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be > 0");
}

CdoaEm::CdoaEm(const GridConfig& cfg, const Workspace& ws, ExpectedBearing expected)
    : cfg_(cfg), grid_(GridState::over(ws, cfg.resolution)), expected_(std::move(expected)),
      window_(cfg.window, cfg.sigma) {
  cfg_.validate();
}

void CdoaEm::advance(const std::optional<Displacement>& odometry) {
  if (!odometry) return;
  cumulative_ += *odometry;
  since_last_ += *odometry;
}

Position CdoaEm::step(const CdoaMeasurement& m, const std::optional<Displacement>& odometry) {
  advance(odometry);
  if (!cfg_.prune) return em_step(grid_, m, window_, expected_, cumulative_);
  window_.push(m, cumulative_);
  std::optional<Position> hint;
  if (last_) hint = *last_ + since_last_;
  const Position est = em_scan_pruned(grid_, window_, expected_, hint);
  last_ = est;
  since_last_.setZero();
  return est;
}

}  // namespace cdoa
