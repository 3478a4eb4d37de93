#pragma once

#include "cdoa/channel.hpp"
#include "cdoa/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace cdoa {

// ---------------------------------------------------------------- trilateration

struct TrilaterationResult {
  Position position = Position::Zero();
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // sum of squared range residuals
};

/// Sum over anchors of (|p - a_i| - d_i)^2.
double range_residual(const Eigen::Matrix2Xd& anchors, const Eigen::VectorXd& distances,
                      const Position& p);

/// Damped Gauss-Newton (Levenberg-Marquardt) on the range residuals. Stops on
/// a step shorter than 1e-9 m or after 100 iterations.
TrilaterationResult trilaterate_distances(const Eigen::Matrix2Xd& anchors,
                                          const Eigen::VectorXd& distances,
                                          const Position& initial);

/// Ranges from the channel model, WCL initial guess. With collinear anchors
/// both mirror images are tried and the one inside `ws` is preferred.
TrilaterationResult trilaterate(const NodeLayout& layout, const RssiSnapshot& snap,
                                const ChannelModel& model,
                                const std::optional<Workspace>& ws = std::nullopt);

// ---------------------------------------------------------------- WCL

enum class WeightMode {
  PowerMw,          // 10^(RSSI/10)
  RawRssi,          // RSSI_i / sum(RSSI), the literal textbook formula
  InverseDistance,  // 1 / d_i from the channel model
};

WeightMode parse_weight_mode(std::string_view name);
std::string_view to_string(WeightMode m);

struct CentroidResult {
  Position position = Position::Zero();
  bool degenerate = false;  // zero total weight, plain centroid returned
};

CentroidResult weighted_centroid(const NodeLayout& layout, const RssiSnapshot& snap,
                                 WeightMode mode = WeightMode::PowerMw,
                                 const ChannelModel& model = {});

// ---------------------------------------------------------------- D-RSSI

/// Grid search on differential RSS against the noise-free channel model.
class DrssiLocator {
 public:
  DrssiLocator(const NodeLayout& layout, const ChannelModel& model, const Workspace& ws,
               double resolution);

  /// Best grid point; ties go to the lowest (row, col).
  Position locate(const RssiSnapshot& snap) const;

  const Eigen::Matrix2Xd& grid() const { return grid_; }

 private:
  Eigen::Matrix2Xd grid_;
  Eigen::MatrixXd theory_;  // cells x nodes, noise-free RSSI
};

Position drssi_locate(const NodeLayout& layout, const RssiSnapshot& snap,
                      const ChannelModel& model, const Workspace& ws, double resolution);

// ---------------------------------------------------------------- I-RSSI

/// Mean of the k largest values. Sets `short_bag` and uses every value when
/// fewer than k are available.
double top_k_mean(std::span<const double> values, int k, bool* short_bag = nullptr);

/// d0 10^((A - R_t) / 10 eta) - d0 10^((A - R_prev) / 10 eta), d0 = 1 m.
double differential_distance(const ChannelModel& model, double r_t, double r_prev);

struct IRssiState {
  Position position = Position::Zero();
  std::vector<double> prev_rssi;
  std::vector<double> distances;
  bool initialized = false;
};

struct IRssiResult {
  Position position = Position::Zero();
  bool short_bag = false;
  bool converged = true;
};

/// `bags` has one row per node, one column per raw reading in the interval.
IRssiResult irssi_locate(IRssiState& state, const NodeLayout& layout,
                         const Eigen::MatrixXd& bags, const ChannelModel& model, int k = 13);

// ---------------------------------------------------------------- PF-EKF

struct EkfState {
  Position y = Position::Zero();
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
};

struct EkfMatrices {
  Eigen::Matrix2d f = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d h = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d q = 0.01 * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d r = 0.1 * Eigen::Matrix2d::Identity();
};

/// Predict then update with observation `x`. Returns true when the innovation
/// covariance had to be regularized.
bool ekf_step(EkfState& state, const EkfMatrices& m, const Position& x);

struct PfEkfConfig {
  int particles = 200;
  EkfMatrices ekf;
  Eigen::Matrix2d initial_covariance = Eigen::Matrix2d::Identity();
  double particle_jitter = 0.2;  // m per step
  double rssi_sigma = 0.0;       // dBm; 0 uses the channel noise (floored at 1)

  void validate() const;
};

struct PfEkfResult {
  Position position = Position::Zero();
  Position observation = Position::Zero();  // particle mean fed to the EKF
  bool regularized = false;
};

class PfEkf {
 public:
  PfEkf(const PfEkfConfig& cfg, const NodeLayout& layout, const Workspace& ws,
        std::uint64_t seed);

  PfEkfResult step(const RssiSnapshot& snap, const ChannelModel& model);

  const EkfState& ekf() const { return ekf_; }
  const Eigen::Matrix2Xd& particles() const { return particles_; }

 private:
  PfEkfConfig cfg_;
  NodeLayout layout_;
  Workspace ws_;
  Rng rng_;
  Eigen::Matrix2Xd particles_;
  EkfState ekf_;
};

inline PfEkfResult pf_ekf_locate(PfEkf& state, const RssiSnapshot& snap,
                                 const ChannelModel& model) {
  return state.step(snap, model);
}

struct BaselineConfig {
  double grid_resolution = 0.05;
  int irssi_k = 13;
  int irssi_bag = 30;
  WeightMode wcl_mode = WeightMode::PowerMw;
  PfEkfConfig pfekf;

  void validate() const;
};

}  // namespace cdoa
