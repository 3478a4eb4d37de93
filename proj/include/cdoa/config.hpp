#pragma once

#include "cdoa/baselines.hpp"
#include "cdoa/channel.hpp"
#include "cdoa/localizers.hpp"
#include "cdoa/trajectory.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cdoa {

/// Which readings the RSSI-only baselines consume at each waypoint.
enum class BaselineInput {
  Raw,     // first raw reading of the interval
  Window,  // the same windowed average the CDOA methods use
};

/// Every estimator knob an experiment can set.
struct Hyperparams {
  int window_len = 10;  // raw readings averaged per snapshot
  double ewma_alpha = 0.7;
  std::size_t window = 5;  // M
  double sigma = 0.3;      // rad
  std::string gradient = "auto";
  BearingModel bearing = BearingModel::Predicted;
  ParticleFilterConfig pf;
  double em_resolution = 0.05;
  bool em_prune = true;
  bool use_odometry = true;
  double odometry_noise_std = 0.0;  // m per step
  BaselineInput baseline_input = BaselineInput::Raw;
  BaselineConfig baselines;

  void validate() const;
};

struct ExperimentConfig {
  Workspace workspace = Workspace::create(0.0, 6.0, 0.0, 6.0);
  std::vector<Node> nodes;  // empty: one node on each workspace corner
  double sensing_range = 40.0;
  ChannelModel channel;
  std::vector<double> noise_levels;  // empty: channel.noise_std only
  std::vector<std::string> methods{"all"};
  Hyperparams hyper;
  std::vector<TrajectoryKind> trajectories{TrajectoryKind::Boundary, TrajectoryKind::Cross,
                                           TrajectoryKind::Diagonal};
  double trajectory_step = 0.25;
  double lane_spacing = 1.0;
  std::vector<Position> custom_waypoints;
  int trials = 20;
  std::uint64_t seed = 1;

  NodeLayout layout() const;
  std::vector<double> effective_noise_levels() const;
  std::vector<Trajectory> build_trajectories() const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Merges `j` onto `base` instead of the default preset.
ExperimentConfig config_from_json(const nlohmann::json& j, const ExperimentConfig& base);

ExperimentConfig load_config(const std::string& path);

/// Applies "a.b.c=value" overrides. Keys must exist in the schema; values
/// are parsed as JSON when possible, otherwise taken as strings.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides);

/// The built-in 6 x 6 m simulation preset.
ExperimentConfig default_config();

/// The simulation preset scaled to the 2.34 x 1.75 m hardware testbed.
ExperimentConfig hardware_config();

/// "default" or "hardware".
ExperimentConfig preset_config(std::string_view name);

}  // namespace cdoa
