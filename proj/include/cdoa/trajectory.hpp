#pragma once

#include "cdoa/core.hpp"

#include <string_view>
#include <vector>

namespace cdoa {

enum class TrajectoryKind { Boundary, Cross, Diagonal, Custom };

TrajectoryKind parse_trajectory_kind(std::string_view name);
std::string_view to_string(TrajectoryKind k);

struct Trajectory {
  std::vector<Position> waypoints;
  TrajectoryKind kind = TrajectoryKind::Custom;
  double step = 0.25;
};

/// Boundary: closed loop around the perimeter inset by `step`.
/// Diagonal: hourglass loop from the SW corner: bottom edge, SE-NW diagonal,
/// top edge, NE-SW diagonal. Both diagonals cross at the center.
/// Cross: serpentine lanes at most `lane_spacing` apart.
/// Consecutive waypoints are at most `step` apart.
Trajectory generate_trajectory(const Workspace& ws, TrajectoryKind kind, double step,
                               double lane_spacing = 1.0);

/// Densifies a polyline so consecutive points are at most `step` apart.
Trajectory custom_trajectory(const std::vector<Position>& corners, const Workspace& ws,
                             double step);

}  // namespace cdoa
