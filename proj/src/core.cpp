#include "cdoa/core.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace cdoa {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

void require_finite(const Position& p, const char* what) {
  if (!is_finite(p)) throw InvalidArgument(std::string(what) + ": non-finite position");
}

Angle Angle::from_radians(double theta) {
  if (!std::isfinite(theta)) throw InvalidArgument("angle must be finite");
  double r = std::remainder(theta, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) r += kTwoPi;
  if (r > kPi) r = kPi;
  return Angle(r);
}

Angle wrap_angle(double theta) { return Angle::from_radians(theta); }

double angular_error(Angle a, Angle b) {
  return wrap_angle(a.radians() - b.radians()).radians();
}

EwmaResult ewma_angle(Angle prev, Angle next, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("ewma alpha must be in [0, 1]");
  if (alpha == 1.0) return {next, false};
  if (alpha == 0.0) return {prev, false};
  const double s = alpha * next.sin() + (1.0 - alpha) * prev.sin();
  const double c = alpha * next.cos() + (1.0 - alpha) * prev.cos();
  if (std::hypot(s, c) < 1e-12) return {next, true};
  return {wrap_angle(std::atan2(s, c)), false};
}

Angle bearing(const Position& from, const Position& to) {
  const Position d = to - from;
  return wrap_angle(std::atan2(d.y(), d.x()));
}

Workspace Workspace::create(double x_min, double x_max, double y_min, double y_max) {
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
        std::isfinite(y_max)))
    throw InvalidArgument("workspace bounds must be finite");
  if (!(x_max > x_min) || !(y_max > y_min))
    throw InvalidArgument("workspace requires x_max > x_min and y_max > y_min");
  return Workspace{x_min, x_max, y_min, y_max};
}

bool Workspace::contains(const Position& p, double tol) const {
  return p.x() >= x_min - tol && p.x() <= x_max + tol && p.y() >= y_min - tol &&
         p.y() <= y_max + tol;
}

Position Workspace::clamp(const Position& p) const {
  return {std::clamp(p.x(), x_min, x_max), std::clamp(p.y(), y_min, y_max)};
}

NodeLayout NodeLayout::create(std::vector<Node> nodes, double sensing_range,
                              bool allow_collinear) {
  if (nodes.size() < 3) throw InvalidLayout("layout needs at least 3 nodes");
  if (!(sensing_range > 0.0)) throw InvalidLayout("sensing range must be positive");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!is_finite(nodes[i].pos)) throw InvalidLayout("node " + nodes[i].id + " is not finite");
    for (std::size_t j = 0; j < i; ++j) {
      if (nodes[i].id == nodes[j].id) throw InvalidLayout("duplicate node id " + nodes[i].id);
      if ((nodes[i].pos - nodes[j].pos).norm() < 1e-9)
        throw InvalidLayout("nodes " + nodes[j].id + " and " + nodes[i].id + " coincide");
    }
  }

  NodeLayout out;
  out.sensing_range_ = sensing_range;
  out.permutation_.resize(nodes.size());
  std::iota(out.permutation_.begin(), out.permutation_.end(), std::size_t{0});

  Eigen::Matrix2Xd pts(2, nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) pts.col(i) = nodes[i].pos;
  const Position lo = pts.rowwise().minCoeff();
  const Position hi = pts.rowwise().maxCoeff();

  // Collinearity: smallest singular value of the centered cloud.
  const Eigen::Matrix2Xd centered = pts.colwise() - pts.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered.transpose());
  const double scale = (hi - lo).norm();
  out.collinear_ = svd.singularValues()(1) <= 1e-9 * std::max(1.0, scale);
  if (out.collinear_ && !allow_collinear) throw InvalidLayout("layout nodes are collinear");

  if (nodes.size() == 4) {
    // Rectangle test: every node sits on a bounding-box corner, one per corner.
    const double tol = 1e-9 * std::max(1.0, scale);
    std::array<int, 4> corner_of{-1, -1, -1, -1};  // SW, NW, NE, SE -> input index
    bool ok = (hi.x() - lo.x()) > tol && (hi.y() - lo.y()) > tol;
    for (std::size_t i = 0; ok && i < 4; ++i) {
      const Position& p = nodes[i].pos;
      const bool west = std::abs(p.x() - lo.x()) <= tol;
      const bool east = std::abs(p.x() - hi.x()) <= tol;
      const bool south = std::abs(p.y() - lo.y()) <= tol;
      const bool north = std::abs(p.y() - hi.y()) <= tol;
      int c = -1;
      if (west && south) c = 0;
      else if (west && north) c = 1;
      else if (east && north) c = 2;
      else if (east && south) c = 3;
      if (c < 0 || corner_of[c] >= 0) ok = false;
      else corner_of[c] = static_cast<int>(i);
    }
    if (ok) {
      std::vector<Node> ordered;
      for (int c = 0; c < 4; ++c) {
        ordered.push_back(nodes[corner_of[c]]);
        out.permutation_[c] = static_cast<std::size_t>(corner_of[c]);
      }
      nodes = std::move(ordered);
      out.rect4_ = true;
    }
  }

  out.nodes_ = std::move(nodes);
  Position sum = Position::Zero();
  for (const auto& n : out.nodes_) sum += n.pos;
  out.centroid_ = sum / static_cast<double>(out.nodes_.size());
  out.delta_x_ = hi.x() - lo.x();
  out.delta_y_ = hi.y() - lo.y();
  if (!(out.delta_x_ > 0.0) || !(out.delta_y_ > 0.0)) {
    if (!allow_collinear) throw InvalidLayout("layout has zero extent along an axis");
  }
  return out;
}

NodeLayout NodeLayout::corners(const Workspace& ws, double sensing_range) {
  return create({{"N1", {ws.x_min, ws.y_min}},
                 {"N2", {ws.x_min, ws.y_max}},
                 {"N3", {ws.x_max, ws.y_max}},
                 {"N4", {ws.x_max, ws.y_min}}},
                sensing_range);
}

std::optional<std::size_t> NodeLayout::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return i;
  return std::nullopt;
}

Eigen::Matrix2Xd NodeLayout::positions() const {
  Eigen::Matrix2Xd out(2, nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) out.col(i) = nodes_[i].pos;
  return out;
}

}  // namespace cdoa
