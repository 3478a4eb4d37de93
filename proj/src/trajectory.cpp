#include "cdoa/trajectory.hpp"

namespace cdoa {

namespace {

void append_segment(std::vector<Position>& out, const Position& a, const Position& b,
                    double step) {
  const double len = (b - a).norm();
  const int pieces = std::max(1, static_cast<int>(std::ceil(len / step - 1e-12)));
  for (int i = out.empty() ? 0 : 1; i < pieces; ++i)
    out.push_back(a + (b - a) * (static_cast<double>(i) / pieces));
  out.push_back(b);
}

std::vector<Position> densify(const std::vector<Position>& corners, double step) {
  std::vector<Position> out;
  for (std::size_t i = 0; i + 1 < corners.size(); ++i) {
    if ((corners[i + 1] - corners[i]).norm() == 0.0) continue;
    append_segment(out, corners[i], corners[i + 1], step);
  }
  return out;
}

}  // namespace

TrajectoryKind parse_trajectory_kind(std::string_view name) {
  if (name == "boundary") return TrajectoryKind::Boundary;
  if (name == "cross") return TrajectoryKind::Cross;
  if (name == "diagonal") return TrajectoryKind::Diagonal;
  if (name == "custom") return TrajectoryKind::Custom;
  throw InvalidArgument("unknown trajectory kind '" + std::string(name) + "'");
}

std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Boundary: return "boundary";
    case TrajectoryKind::Cross: return "cross";
    case TrajectoryKind::Diagonal: return "diagonal";
    case TrajectoryKind::Custom: return "custom";
  }
  return "?";
}

Trajectory generate_trajectory(const Workspace& ws, TrajectoryKind kind, double step,
                               double lane_spacing) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("trajectory step must be > 0");
  if (2.0 * step >= std::min(ws.width(), ws.height()))
    throw InvalidArgument("trajectory step too large for the workspace");
  if (!(lane_spacing > 0.0)) throw InvalidArgument("lane spacing must be > 0");

  const double x0 = ws.x_min + step, x1 = ws.x_max - step;
  const double y0 = ws.y_min + step, y1 = ws.y_max - step;
  const Position center = ws.center();
  std::vector<Position> corners;
  switch (kind) {
    case TrajectoryKind::Boundary:
      corners = {{x0, y0}, {x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}};
      break;
    case TrajectoryKind::Diagonal:
      corners = {{x0, y0}, {x1, y0}, center, {x0, y1}, {x1, y1}, center, {x0, y0}};
      break;
    case TrajectoryKind::Cross: {
      const int lanes = static_cast<int>(std::ceil((y1 - y0) / lane_spacing - 1e-12)) + 1;
      for (int j = 0; j < lanes; ++j) {
        const double y = lanes == 1 ? y0 : y0 + (y1 - y0) * j / (lanes - 1);
        if (j % 2 == 0) {
          corners.push_back({x0, y});
          corners.push_back({x1, y});
        } else {
          corners.push_back({x1, y});
          corners.push_back({x0, y});
        }
      }
      break;
    }
    case TrajectoryKind::Custom:
      throw InvalidArgument("custom trajectories come from custom_trajectory()");
  }
  return {densify(corners, step), kind, step};
}

Trajectory custom_trajectory(const std::vector<Position>& corners, const Workspace& ws,
                             double step) {
  if (!(step > 0.0)) throw InvalidArgument("trajectory step must be > 0");
  if (corners.size() < 2) throw InvalidArgument("trajectory needs at least 2 waypoints");
  for (const auto& p : corners) {
    require_finite(p, "waypoint");
    if (!ws.contains(p, 1e-12)) throw InvalidArgument("waypoint outside the workspace");
  }
  auto pts = densify(corners, step);
  if (pts.size() < 2) throw InvalidArgument("trajectory needs at least 2 distinct waypoints");
  return {std::move(pts), TrajectoryKind::Custom, step};
}

}  // namespace cdoa
