#pragma once

#include "cdoa/config.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cdoa {

/// Everything the robot and the WSN produce for one waypoint.
struct Observation {
  double timestamp = 0.0;
  Eigen::MatrixXd bag;    // raw readings, one row per node
  RssiSnapshot snapshot;  // windowed average of the first window_len columns
  std::optional<Displacement> odometry;  // movement since the previous waypoint
};

/// One localizer instance, fed waypoint by waypoint.
class Localizer {
 public:
  virtual ~Localizer() = default;
  /// nullopt when the method has no estimate for this waypoint.
  virtual std::optional<Position> update(const Observation& obs) = 0;
};

struct MethodContext {
  NodeLayout layout;
  ChannelModel model;
  Workspace workspace;
  Hyperparams hyper;
  std::uint64_t seed = 0;
};

using MethodFactory = std::function<std::unique_ptr<Localizer>(const MethodContext&)>;

/// String-keyed method table. The built-in seven are registered on first use.
class MethodRegistry {
 public:
  static MethodRegistry& instance();

  void add(const std::string& name, MethodFactory factory);
  bool contains(const std::string& name) const;
  std::unique_ptr<Localizer> create(const std::string& name, const MethodContext& ctx) const;
  /// Registered names, in registration order.
  const std::vector<std::string>& names() const { return order_; }

  /// Expands "all" and checks every name. Keeps first occurrences only.
  std::vector<std::string> resolve(const std::vector<std::string>& requested) const;

 private:
  MethodRegistry();
  std::map<std::string, MethodFactory> factories_;
  std::vector<std::string> order_;
};

/// Gradient method named by `hyper.gradient`, "auto" picking by layout.
GradientMethod resolve_gradient(const Hyperparams& hyper, const NodeLayout& layout);

}  // namespace cdoa
