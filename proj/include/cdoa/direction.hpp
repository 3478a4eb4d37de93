#pragma once

#include "cdoa/channel.hpp"
#include "cdoa/core.hpp"

#include <optional>
#include <string_view>

namespace cdoa {

/// Spatial RSSI gradient (dBm per meter).
using RssiGradient = Eigen::Vector2d;

enum class GradientMethod { Rect4, General, Lsq };

GradientMethod parse_gradient_method(std::string_view name);
std::string_view to_string(GradientMethod m);

/// Rect4 for rectangular 4-node layouts, Lsq otherwise.
GradientMethod default_gradient_method(const NodeLayout& layout);

/// Central finite differences over the SW, NW, NE, SE rectangle.
RssiGradient gradient_rect4(const NodeLayout& layout, const RssiSnapshot& snap);

/// Finite differences over the nodes sitting at (xc +- dx/2, yc +- dy/2).
/// Nodes are matched to those offsets within min(dx, dy) / 10.
RssiGradient gradient_general(const NodeLayout& layout, const RssiSnapshot& snap);

/// Plane fit S ~ a x + b y + c; returns (a, b).
RssiGradient gradient_lsq(const NodeLayout& layout, const RssiSnapshot& snap);

RssiGradient compute_gradient(const NodeLayout& layout, const RssiSnapshot& snap,
                              GradientMethod method);

/// atan2(g_y, g_x). Throws NoSignalDirection for a zero gradient.
Angle cdoa_from_gradient(const RssiGradient& g);

/// Gradient the layout would measure from a noise-free log-distance source
/// at `source`. Its direction does not depend on the reference RSSI or the
/// path loss exponent, so only geometry enters.
RssiGradient model_gradient(const NodeLayout& layout, const Position& source,
                            GradientMethod method, double min_distance = 0.1);

struct CdoaMeasurement {
  std::optional<Position> robot_hint;
  Angle angle;      // smoothed
  Angle raw_angle;  // before smoothing
  double timestamp = 0.0;
};

/// EWMA state carried between snapshots by one estimator.
struct CdoaSmoother {
  double alpha = 0.7;
  std::optional<Angle> last;
};

/// Gradient, bearing and smoothing for one snapshot. Returns nullopt (and
/// leaves `smoother` untouched) when the gradient is exactly zero.
std::optional<CdoaMeasurement> estimate_cdoa(const NodeLayout& layout, const RssiSnapshot& snap,
                                             CdoaSmoother& smoother, GradientMethod method);

}  // namespace cdoa
