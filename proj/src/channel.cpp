#include "cdoa/channel.hpp"

namespace cdoa {

void ChannelModel::validate() const {
  if (!std::isfinite(ref_rssi_a)) throw InvalidArgument("channel: reference RSSI must be finite");
  if (!(path_loss_eta >= 2.0 && path_loss_eta <= 6.0))
    throw InvalidArgument("channel: path loss exponent must be in [2, 6]");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw InvalidArgument("channel: noise std must be >= 0");
  if (!(min_distance > 0.0)) throw InvalidArgument("channel: min distance must be > 0");
}

double ChannelModel::mean_rssi(double distance) const {
  return ref_rssi_a - 10.0 * path_loss_eta * std::log10(std::max(distance, min_distance));
}

double rssi_at(const ChannelModel& model, const Position& tx, const Position& rx, Rng& rng) {
  const double mean = model.mean_rssi((tx - rx).norm());
  if (model.noise_std == 0.0) return mean;
  std::normal_distribution<double> noise(0.0, model.noise_std);
  return mean + noise(rng);
}

double distance_from_rssi(const ChannelModel& model, double rssi) {
  return std::pow(10.0, (model.ref_rssi_a - rssi) / (10.0 * model.path_loss_eta));
}

RssiSnapshot noiseless_snapshot(const ChannelModel& model, const NodeLayout& layout,
                                const Position& robot, double timestamp) {
  RssiSnapshot snap;
  snap.timestamp = timestamp;
  snap.readings.resize(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i)
    snap.readings(static_cast<Eigen::Index>(i)) = model.mean_rssi((robot - layout.node(i).pos).norm());
  return snap;
}

RssiSnapshot sample_window(const ChannelModel& model, const NodeLayout& layout,
                           const Position& robot, int window_len, Rng& rng, double timestamp) {
  if (window_len < 1) throw InvalidArgument("window_len must be >= 1");
  if (layout.size() == 0) throw InvalidArgument("empty layout");
  RssiSnapshot snap;
  snap.timestamp = timestamp;
  snap.window_len = window_len;
  snap.readings.resize(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    double sum = 0.0;
    for (int s = 0; s < window_len; ++s) sum += rssi_at(model, robot, layout.node(i).pos, rng);
    snap.readings(static_cast<Eigen::Index>(i)) = sum / window_len;
  }
  return snap;
}

Eigen::MatrixXd sample_bag(const ChannelModel& model, const NodeLayout& layout,
                           const Position& robot, int count, Rng& rng) {
  if (count < 1) throw InvalidArgument("bag size must be >= 1");
  Eigen::MatrixXd bag(static_cast<Eigen::Index>(layout.size()), count);
  for (Eigen::Index i = 0; i < bag.rows(); ++i)
    for (int s = 0; s < count; ++s)
      bag(i, s) = rssi_at(model, robot, layout.node(static_cast<std::size_t>(i)).pos, rng);
  return bag;
}

RssiSnapshot snapshot_from_bag(const Eigen::MatrixXd& bag, int window_len, double timestamp) {
  if (window_len < 1 || window_len > bag.cols())
    throw InvalidArgument("window_len must be within the bag size");
  RssiSnapshot snap;
  snap.timestamp = timestamp;
  snap.window_len = window_len;
  snap.readings = bag.leftCols(window_len).rowwise().mean();
  return snap;
}

}  // namespace cdoa
