#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdoa {

// Error taxonomy shared by every module.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvalidLayout : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NoSignalDirection : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateWeights : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RankDeficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 2-D point in meters.
using Position = Eigen::Vector2d;
/// 2-D displacement in meters.
using Displacement = Eigen::Vector2d;

inline bool is_finite(const Position& p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

/// Throws InvalidArgument when `p` has a NaN or infinite component.
void require_finite(const Position& p, const char* what);

/// Bearing stored wrapped into (-pi, pi].
class Angle {
 public:
  constexpr Angle() = default;

  /// Wraps any finite value; throws InvalidArgument otherwise.
  static Angle from_radians(double theta);

  constexpr double radians() const { return rad_; }
  double cos() const { return std::cos(rad_); }
  double sin() const { return std::sin(rad_); }

  friend bool operator==(Angle a, Angle b) = default;

 private:
  constexpr explicit Angle(double r) : rad_(r) {}
  double rad_ = 0.0;
};

Angle wrap_angle(double theta);

/// Signed shortest difference a - b, in (-pi, pi].
double angular_error(Angle a, Angle b);

struct EwmaResult {
  Angle angle;
  bool degenerate = false;  // prev and new cancelled; `angle` is `new`
};

/// Exponential smoothing on the unit circle. alpha weights the new sample.
EwmaResult ewma_angle(Angle prev, Angle next, double alpha);

/// Bearing of the vector from `from` to `to`.
Angle bearing(const Position& from, const Position& to);

struct Workspace {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  /// Throws InvalidArgument unless the bounds are finite and ordered.
  static Workspace create(double x_min, double x_max, double y_min, double y_max);

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  Position center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  bool contains(const Position& p, double tol = 0.0) const;
  Position clamp(const Position& p) const;
};

struct Node {
  std::string id;
  Position pos;
};

/// Static anchors. Four-node axis-aligned rectangles are stored in the
/// SW, NW, NE, SE order that the finite-difference gradient expects.
class NodeLayout {
 public:
  /// Validates (>= 3 nodes, finite, pairwise distinct, not all collinear
  /// unless `allow_collinear`) and canonicalizes rectangle order.
  static NodeLayout create(std::vector<Node> nodes, double sensing_range = 40.0,
                           bool allow_collinear = false);

  /// Four nodes on the corners of `ws`, ids N1..N4.
  static NodeLayout corners(const Workspace& ws, double sensing_range = 40.0);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  const Position& centroid() const { return centroid_; }
  double delta_x() const { return delta_x_; }
  double delta_y() const { return delta_y_; }
  double sensing_range() const { return sensing_range_; }
  bool is_rectangular4() const { return rect4_; }
  bool is_collinear() const { return collinear_; }

  /// permutation()[k] is the index in the caller's input of stored node k.
  const std::vector<std::size_t>& permutation() const { return permutation_; }

  /// Index of the node with this id, or nullopt.
  std::optional<std::size_t> index_of(const std::string& id) const;

  /// Node positions as a 2 x n matrix.
  Eigen::Matrix2Xd positions() const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::size_t> permutation_;
  Position centroid_ = Position::Zero();
  double delta_x_ = 0.0;
  double delta_y_ = 0.0;
  double sensing_range_ = 40.0;
  bool rect4_ = false;
  bool collinear_ = false;
};

}  // namespace cdoa
