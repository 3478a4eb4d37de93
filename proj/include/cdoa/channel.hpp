#pragma once

#include "cdoa/core.hpp"

#include <random>

namespace cdoa {

/// Seeded stream used everywhere randomness is needed.
using Rng = std::mt19937_64;

/// Log-distance path loss with additive Gaussian noise:
/// RSSI = A - 10 * eta * log10(max(d, min_distance)) + N(0, noise_std^2).
struct ChannelModel {
  double ref_rssi_a = -40.0;  // dBm at 1 m
  double path_loss_eta = 3.0;
  double noise_std = 0.0;  // dBm
  double min_distance = 0.1;  // m

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;

  /// Noise-free RSSI at distance d.
  double mean_rssi(double distance) const;
};

/// One synchronized window of averaged readings, in layout node order.
struct RssiSnapshot {
  double timestamp = 0.0;
  Eigen::VectorXd readings;
  int window_len = 1;
};

double rssi_at(const ChannelModel& model, const Position& tx, const Position& rx, Rng& rng);

/// Inverse of the noise-free model with d0 = 1 m.
double distance_from_rssi(const ChannelModel& model, double rssi);

/// Noise-free readings of a transmitter at `robot`, one per node.
RssiSnapshot noiseless_snapshot(const ChannelModel& model, const NodeLayout& layout,
                                const Position& robot, double timestamp = 0.0);

/// For each node draws `window_len` readings and stores their mean.
RssiSnapshot sample_window(const ChannelModel& model, const NodeLayout& layout,
                           const Position& robot, int window_len, Rng& rng,
                           double timestamp = 0.0);

/// Raw readings, one row per node and `count` columns, drawn node-major.
Eigen::MatrixXd sample_bag(const ChannelModel& model, const NodeLayout& layout,
                           const Position& robot, int count, Rng& rng);

/// Averages the first `window_len` columns of a bag.
RssiSnapshot snapshot_from_bag(const Eigen::MatrixXd& bag, int window_len, double timestamp);

}  // namespace cdoa
