#include "cdoa/direction.hpp"

#include <array>

namespace cdoa {

namespace {

void require_readings(const NodeLayout& layout, const RssiSnapshot& snap) {
  if (snap.readings.size() != static_cast<Eigen::Index>(layout.size()))
    throw InvalidArgument("snapshot has " + std::to_string(snap.readings.size()) +
                          " readings for a layout of " + std::to_string(layout.size()) + " nodes");
  if (!snap.readings.allFinite()) throw InvalidArgument("snapshot readings must be finite");
}

// Indices of the nodes at SW, NW, NE, SE offsets from the centroid.
std::array<std::size_t, 4> match_offset_corners(const NodeLayout& layout) {
  const double lambda = 0.5 * layout.delta_x();
  const double delta = 0.5 * layout.delta_y();
  const double tol = std::min(layout.delta_x(), layout.delta_y()) / 10.0;
  const Position c = layout.centroid();
  const std::array<Position, 4> targets{Position{c.x() - lambda, c.y() - delta},
                                        Position{c.x() - lambda, c.y() + delta},
                                        Position{c.x() + lambda, c.y() + delta},
                                        Position{c.x() + lambda, c.y() - delta}};
  std::array<std::size_t, 4> idx{};
  for (int k = 0; k < 4; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const double d = (layout.node(i).pos - targets[k]).norm();
      if (d < best) {
        best = d;
        idx[k] = i;
      }
    }
    if (best > tol)
      throw InvalidLayout("no node within " + std::to_string(tol) + " m of offset corner " +
                          std::to_string(k));
  }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < a; ++b)
      if (idx[a] == idx[b]) throw InvalidLayout("one node matched two offset corners");
  return idx;
}

}  // namespace

GradientMethod parse_gradient_method(std::string_view name) {
  if (name == "rect4") return GradientMethod::Rect4;
  if (name == "general") return GradientMethod::General;
  if (name == "lsq") return GradientMethod::Lsq;
  throw InvalidArgument("unknown gradient method '" + std::string(name) + "'");
}

std::string_view to_string(GradientMethod m) {
  switch (m) {
    case GradientMethod::Rect4: return "rect4";
    case GradientMethod::General: return "general";
    case GradientMethod::Lsq: return "lsq";
  }
  return "?";
}

GradientMethod default_gradient_method(const NodeLayout& layout) {
  return layout.is_rectangular4() ? GradientMethod::Rect4 : GradientMethod::Lsq;
}

RssiGradient gradient_rect4(const NodeLayout& layout, const RssiSnapshot& snap) {
  if (!layout.is_rectangular4()) throw InvalidLayout("rect4 gradient needs a 4-node rectangle");
  require_readings(layout, snap);
  const auto& s = snap.readings;
  const double dx = layout.delta_x();
  const double dy = layout.delta_y();
  return {(s(2) - s(1)) / (2.0 * dx) + (s(3) - s(0)) / (2.0 * dx),
          (s(1) - s(0)) / (2.0 * dy) + (s(2) - s(3)) / (2.0 * dy)};
}

RssiGradient gradient_general(const NodeLayout& layout, const RssiSnapshot& snap) {
  require_readings(layout, snap);
  const auto idx = match_offset_corners(layout);
  const auto& s = snap.readings;
  const double sw = s(static_cast<Eigen::Index>(idx[0]));
  const double nw = s(static_cast<Eigen::Index>(idx[1]));
  const double ne = s(static_cast<Eigen::Index>(idx[2]));
  const double se = s(static_cast<Eigen::Index>(idx[3]));
  const double dx = layout.delta_x();
  const double dy = layout.delta_y();
  // y differences are taken north minus south so the result agrees with
  // gradient_rect4 on rectangles.
  return {(se - sw) / (2.0 * dx) + (ne - nw) / (2.0 * dx),
          (ne - se) / (2.0 * dy) + (nw - sw) / (2.0 * dy)};
}

RssiGradient gradient_lsq(const NodeLayout& layout, const RssiSnapshot& snap) {
  require_readings(layout, snap);
  if (layout.size() < 3) throw InvalidLayout("plane fit needs at least 3 nodes");
  const auto n = static_cast<Eigen::Index>(layout.size());
  Eigen::MatrixXd a(n, 3);
  const Position c = layout.centroid();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Position p = layout.node(static_cast<std::size_t>(i)).pos - c;
    a.row(i) << p.x(), p.y(), 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw RankDeficient("plane fit is rank deficient (collinear nodes)");
  const Eigen::Vector3d coef = qr.solve(snap.readings);
  return coef.head<2>();
}

RssiGradient compute_gradient(const NodeLayout& layout, const RssiSnapshot& snap,
                              GradientMethod method) {
  switch (method) {
    case GradientMethod::Rect4: return gradient_rect4(layout, snap);
    case GradientMethod::General: return gradient_general(layout, snap);
    case GradientMethod::Lsq: return gradient_lsq(layout, snap);
  }
  throw InvalidArgument("bad gradient method");
}

Angle cdoa_from_gradient(const RssiGradient& g) {
  if (!g.allFinite()) throw InvalidArgument("gradient must be finite");
  if (g.x() == 0.0 && g.y() == 0.0) throw NoSignalDirection("zero RSSI gradient");
  return wrap_angle(std::atan2(g.y(), g.x()));
}

RssiGradient model_gradient(const NodeLayout& layout, const Position& source,
                            GradientMethod method, double min_distance) {
  RssiSnapshot snap;
  snap.readings.resize(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const double d = std::max((source - layout.node(i).pos).norm(), min_distance);
    snap.readings(static_cast<Eigen::Index>(i)) = -10.0 * std::log10(d);
  }
  return compute_gradient(layout, snap, method);
}

std::optional<CdoaMeasurement> estimate_cdoa(const NodeLayout& layout, const RssiSnapshot& snap,
                                             CdoaSmoother& smoother, GradientMethod method) {
  const RssiGradient g = compute_gradient(layout, snap, method);
  if (g.x() == 0.0 && g.y() == 0.0) return std::nullopt;
  const Angle raw = cdoa_from_gradient(g);
  CdoaMeasurement m;
  m.raw_angle = raw;
  m.timestamp = snap.timestamp;
  m.angle = smoother.last ? ewma_angle(*smoother.last, raw, smoother.alpha).angle : raw;
  smoother.last = m.angle;
  return m;
}

}  // namespace cdoa
