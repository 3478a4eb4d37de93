#pragma once

#include "cdoa/channel.hpp"
#include "cdoa/direction.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string_view>

namespace cdoa {

struct WindowEntry {
  CdoaMeasurement measurement;
  Displacement cumulative = Displacement::Zero();  // odometry sum when taken
};

/// FIFO of the last M bearings together with where the robot was when
/// each was taken, relative to its start.
class MeasurementWindow {
 public:
  MeasurementWindow(std::size_t capacity, double sigma);

  void push(const CdoaMeasurement& m, const Displacement& cumulative);
  void clear() { entries_.clear(); }

  const std::deque<WindowEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  double sigma() const { return sigma_; }

 private:
  std::deque<WindowEntry> entries_;
  std::size_t capacity_;
  double sigma_;
};

enum class BearingModel {
  Centroid,   // bearing from the layout centroid to the candidate
  Predicted,  // bearing the layout's gradient would report for a source there
};

BearingModel parse_bearing_model(std::string_view name);
std::string_view to_string(BearingModel m);

/// Maps a candidate transmitter position to the CDOA expected there.
class ExpectedBearing {
 public:
  static ExpectedBearing centroid(const Position& c);
  static ExpectedBearing predicted(const NodeLayout& layout, GradientMethod method,
                                   double min_distance = 0.1);
  static ExpectedBearing from_model(BearingModel model, const NodeLayout& layout,
                                    GradientMethod method);

  BearingModel model() const { return model_; }

  /// Direction vector (not normalized); zero when the bearing is undefined.
  Eigen::Vector2d direction(const Position& candidate) const;

  /// Signed error wrap(measured - expected) for each column of `candidates`.
  /// Undefined bearings produce NaN.
  void errors(const Eigen::Matrix2Xd& candidates, Angle measured, Eigen::ArrayXd& out) const;

  /// acc[i] += log N(err_i; 0, sigma^2) for the points (xs[i] - shift.x,
  /// ys[i] - shift.y); undefined bearings add nothing. Each point goes
  /// through the same packet path, so its term does not depend on n or i.
  void add_log_terms(const double* xs, const double* ys, std::size_t n, const Displacement& shift,
                     Angle measured, double sigma, double* acc) const;

 private:
  BearingModel model_ = BearingModel::Centroid;
  Position centroid_ = Position::Zero();
  std::shared_ptr<const NodeLayout> layout_;
  GradientMethod method_ = GradientMethod::Rect4;
  double min_distance_ = 0.1;
  // Node indices at SW, NW, NE, SE when the closed-form path applies.
  std::array<std::size_t, 4> corner_{};
  bool closed_form_ = false;
};

/// Gaussian density N(err; 0, sigma^2).
double gaussian_density(double err, double sigma);

struct LikelihoodResult {
  double value = 1.0;      // product of Gaussian densities
  double log_value = 0.0;  // sum of log densities
  int skipped = 0;         // terms with an undefined expected bearing
};

/// Product over the window of Gaussian densities of the bearing error at the
/// candidate's back-propagated position.
LikelihoodResult cdoa_likelihood(const Position& candidate, const MeasurementWindow& window,
                                 const ExpectedBearing& expected);

/// Centroid-referenced form.
double cdoa_likelihood(const Position& candidate, const MeasurementWindow& window,
                       const Position& centroid);

/// Log-likelihood for every column of `candidates`, the batched form used by
/// the filters. Terms with undefined expected bearing contribute nothing.
void cdoa_log_likelihoods(const Eigen::Matrix2Xd& candidates, const MeasurementWindow& window,
                          const ExpectedBearing& expected, Eigen::ArrayXd& out);

/// w / sum(w). Throws DegenerateWeights when every weight is zero.
std::vector<double> normalize_weights(std::span<const double> weights);

/// Indices drawn with replacement proportional to `weights` (already normalized).
std::vector<std::size_t> multinomial_resample(std::span<const double> weights, std::size_t count,
                                              Rng& rng);
std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             Rng& rng);

/// Cell centers tiling a workspace at (about) the given pitch, row-major with
/// rows along y. The pitch is adjusted so cells tile the workspace exactly.
Eigen::Matrix2Xd lattice(const Workspace& ws, double resolution, int* rows = nullptr,
                         int* cols = nullptr);

// ---------------------------------------------------------------- CDOA-PF

enum class Resampling { Multinomial, Systematic };

struct ParticleFilterConfig {
  int particles = 200;
  double resolution = 0.08;  // pitch of the lattice initial particles are drawn from
  double motion_std = 0.05;  // random-walk jitter per step, m
  std::size_t window = 5;
  double sigma = 0.3;  // rad
  Resampling resampling = Resampling::Multinomial;

  void validate() const;
};

struct Particle {
  Position pos = Position::Zero();
  double weight = 0.0;
};

struct PfStepResult {
  std::optional<Position> estimate;  // nullopt when weights degenerated
  bool log_domain = false;           // direct product underflowed
  bool reseeded = false;
};

class CdoaParticleFilter {
 public:
  CdoaParticleFilter(const ParticleFilterConfig& cfg, const Workspace& ws,
                     ExpectedBearing expected, std::uint64_t seed);

  /// Transition, window update, weighting, argmax, resampling.
  PfStepResult step(const CdoaMeasurement& m, const std::optional<Displacement>& odometry);

  /// Transition only, for ticks without a usable bearing.
  void predict(const std::optional<Displacement>& odometry);

  const std::vector<Particle>& particles() const { return particles_; }
  const MeasurementWindow& window() const { return window_; }
  const ParticleFilterConfig& config() const { return cfg_; }

 private:
  void seed_uniform();

  ParticleFilterConfig cfg_;
  Workspace ws_;
  ExpectedBearing expected_;
  Rng rng_;
  Eigen::Matrix2Xd lattice_;
  std::vector<Particle> particles_;
  MeasurementWindow window_;
  Displacement cumulative_ = Displacement::Zero();
  Eigen::Matrix2Xd scratch_pos_;
  Eigen::ArrayXd scratch_ll_;
};

// ---------------------------------------------------------------- CDOA-EM

/// Dense grid of candidate positions and their latest likelihood weights.
struct GridState {
  Eigen::Matrix2Xd centers;  // row-major, rows along y
  Eigen::ArrayXd log_weights;
  Eigen::ArrayXd weights;  // exp(log_weights - max), so the best cell has weight 1
  int rows = 0;
  int cols = 0;
  double resolution = 0.0;

  static GridState over(const Workspace& ws, double resolution);
  /// A single-row grid over arbitrary cell centers.
  static GridState from_cells(Eigen::Matrix2Xd centers);

  std::size_t size() const { return static_cast<std::size_t>(centers.cols()); }
};

/// Evaluates the window likelihood at every cell and returns the best cell
/// center; ties go to the lowest (row, col).
Position em_scan(GridState& grid, const MeasurementWindow& window,
                 const ExpectedBearing& expected);

/// Same argmax as em_scan, found by bounding. Every log term is at most the
/// peak log density, so a cell is dropped once its partial sum plus that
/// bound for the remaining entries falls below the exact total of the seed
/// cell nearest `hint`. Survivors carry exact log weights; dropped cells get
/// -inf (weight 0).
Position em_scan_pruned(GridState& grid, const MeasurementWindow& window,
                        const ExpectedBearing& expected, const std::optional<Position>& hint);

/// Pushes `m` into the window, then scans.
Position em_step(GridState& grid, const CdoaMeasurement& m, MeasurementWindow& window,
                 const ExpectedBearing& expected, const Displacement& cumulative);

struct GridConfig {
  double resolution = 0.05;
  std::size_t window = 5;
  double sigma = 0.3;
  bool prune = true;  // em_scan_pruned seeded with the last estimate moved by odometry

  void validate() const;
};

class CdoaEm {
 public:
  CdoaEm(const GridConfig& cfg, const Workspace& ws, ExpectedBearing expected);

  Position step(const CdoaMeasurement& m, const std::optional<Displacement>& odometry);
  /// Accumulates odometry for ticks without a usable bearing.
  void advance(const std::optional<Displacement>& odometry);

  const GridState& grid() const { return grid_; }
  const MeasurementWindow& window() const { return window_; }

 private:
  GridConfig cfg_;
  GridState grid_;
  ExpectedBearing expected_;
  MeasurementWindow window_;
  Displacement cumulative_ = Displacement::Zero();
  std::optional<Position> last_;
  Displacement since_last_ = Displacement::Zero();
};

}  // namespace cdoa
