#include "cdoa/direction.hpp"
#include "support.hpp"

#include <doctest.h>

#include <array>
#include <numbers>

using namespace cdoa;
using test::near;

namespace {
constexpr double kPi = std::numbers::pi;

RssiSnapshot snap_of(std::initializer_list<double> v) {
  RssiSnapshot s;
  s.readings.resize(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) s.readings(i++) = x;
  return s;
}

RssiSnapshot random_snap(std::mt19937_64& g, std::size_t n) {
  RssiSnapshot s;
  s.readings.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < s.readings.size(); ++i) s.readings(i) = test::uniform(g, -90, -30);
  return s;
}

ChannelModel noiseless() {
  ChannelModel m;
  m.ref_rssi_a = -40;
  m.path_loss_eta = 3;
  return m;
}

// Finite differences written out from the corner readings, nothing shared
// with the library beyond the node order.
Eigen::Vector2d hand_rect4(double s1, double s2, double s3, double s4, double dx, double dy) {
  const double gx = (s3 - s2) / (2 * dx) + (s4 - s1) / (2 * dx);
  const double gy = (s2 - s1) / (2 * dy) + (s3 - s4) / (2 * dy);
  return {gx, gy};
}

// Least-squares plane through (x, y, s) by 3x3 normal equations and
// Gaussian elimination with partial pivoting.
Eigen::Vector2d hand_plane(const std::vector<std::array<double, 3>>& pts) {
  double m[3][4] = {};
  for (const auto& p : pts) {
    const double row[3] = {p[0], p[1], 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
      m[i][3] += row[i] * p[2];
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    for (int k = 0; k < 4; ++k) std::swap(m[c][k], m[piv][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = 0; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return {m[0][3] / m[0][0], m[1][3] / m[1][1]};
}
}  // namespace

TEST_CASE("gradient_rect4 examples") {
  const auto layout = test::square6();
  CHECK(gradient_rect4(layout, snap_of({-50, -50, -50, -50})) == RssiGradient(0, 0));
  // S = x + 2y at SW(0,0), NW(0,6), NE(6,6), SE(6,0).
  const auto g = gradient_rect4(layout, snap_of({0, 12, 18, 6}));
  CHECK(near(g.x(), 1, 1e-15));
  CHECK(near(g.y(), 2, 1e-15));
}

TEST_CASE("gradient_rect4 matches hand-evaluated differences for a noiseless source") {
  const auto layout = test::square6();
  const Position robot(4.5, 3.0);
  const auto m = noiseless();
  auto rssi = [&](double x, double y) {
    return -40 - 30 * std::log10(std::hypot(robot.x() - x, robot.y() - y));
  };
  const auto oracle = hand_rect4(rssi(0, 0), rssi(0, 6), rssi(6, 6), rssi(6, 0), 6, 6);
  const auto g = gradient_rect4(layout, noiseless_snapshot(m, layout, robot));
  CHECK(near(g.x(), oracle.x(), 1e-12));
  CHECK(near(g.y(), oracle.y(), 1e-12));
  CHECK(g.x() > 0);
  CHECK(near(g.y(), 0, 1e-12));
}

TEST_CASE("gradient_rect4 matches hand evaluation on 1000 random snapshots") {
  std::mt19937_64 g(21);
  const auto layout = NodeLayout::create({{"a", {0, 0}}, {"b", {0, 4}}, {"c", {7, 4}}, {"d", {7, 0}}});
  for (int t = 0; t < 1000; ++t) {
    const auto s = random_snap(g, 4);
    const auto r = s.readings;
    const auto oracle = hand_rect4(r(0), r(1), r(2), r(3), 7, 4);
    const auto got = gradient_rect4(layout, s);
    CHECK(near(got.x(), oracle.x(), 1e-12));
    CHECK(near(got.y(), oracle.y(), 1e-12));
  }
}

TEST_CASE("gradient_rect4 rejects non-rectangular layouts") {
  const auto tri = NodeLayout::create({{"a", {0, 0}}, {"b", {4, 0}}, {"c", {0, 4}}});
  CHECK_THROWS_AS(gradient_rect4(tri, snap_of({1, 2, 3})), InvalidLayout);
}

TEST_CASE("gradient_general equals gradient_rect4 on rectangles") {
  std::mt19937_64 g(22);
  for (int t = 0; t < 2000; ++t) {
    const double w = test::uniform(g, 1, 20), h = test::uniform(g, 1, 20);
    const double x0 = test::uniform(g, -10, 10), y0 = test::uniform(g, -10, 10);
    const auto layout = NodeLayout::create(
        {{"a", {x0, y0}}, {"b", {x0, y0 + h}}, {"c", {x0 + w, y0 + h}}, {"d", {x0 + w, y0}}});
    const auto s = random_snap(g, 4);
    const auto a = gradient_general(layout, s), b = gradient_rect4(layout, s);
    CHECK(near(a.x(), b.x(), 1e-12));
    CHECK(near(a.y(), b.y(), 1e-12));
  }
  const auto layout = test::square6();
  CHECK(gradient_general(layout, snap_of({-60, -60, -60, -60})) == RssiGradient(0, 0));
  const auto lin = gradient_general(layout, snap_of({0, 12, 18, 6}));
  CHECK(near(lin.x(), 1, 1e-15));
  CHECK(near(lin.y(), 2, 1e-15));
}

TEST_CASE("gradient_general picks the offset nodes out of a larger layout") {
  // A fifth node at the centroid does not sit on any offset corner.
  const auto layout = NodeLayout::create(
      {{"c", {3, 3}}, {"sw", {0, 0}}, {"nw", {0, 6}}, {"ne", {6, 6}}, {"se", {6, 0}}});
  auto s = snap_of({-99, 0, 12, 18, 6});
  const auto g = gradient_general(layout, s);
  CHECK(near(g.x(), 1, 1e-15));
  CHECK(near(g.y(), 2, 1e-15));
  const auto tri = NodeLayout::create({{"a", {0, 0}}, {"b", {4, 0}}, {"c", {0, 4}}});
  CHECK_THROWS_AS(gradient_general(tri, snap_of({1, 2, 3})), InvalidLayout);
}

TEST_CASE("gradient_lsq examples") {
  const auto tri = NodeLayout::create({{"a", {0, 0}}, {"b", {4, 1}}, {"c", {1, 5}}});
  auto plane = [](const Position& p) { return 2 * p.x() - p.y() + 5; };
  RssiSnapshot s;
  s.readings.resize(3);
  for (int i = 0; i < 3; ++i) s.readings(i) = plane(tri.node(i).pos);
  const auto g = gradient_lsq(tri, s);
  CHECK(near(g.x(), 2, 1e-12));
  CHECK(near(g.y(), -1, 1e-12));
  const auto z = gradient_lsq(tri, snap_of({-7, -7, -7}));
  CHECK(near(z.x(), 0, 1e-12));
  CHECK(near(z.y(), 0, 1e-12));
  const auto line = NodeLayout::create({{"a", {0, 0}}, {"b", {1, 1}}, {"c", {2, 2}}}, 40, true);
  CHECK_THROWS_AS(gradient_lsq(line, snap_of({1, 2, 3})), RankDeficient);
}

TEST_CASE("gradient_lsq matches hand-solved normal equations") {
  std::mt19937_64 g(23);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 4 + g() % 4;
    std::vector<Node> nodes;
    for (std::size_t i = 0; i < n; ++i)
      nodes.push_back({"n" + std::to_string(i), {test::uniform(g, 0, 10), test::uniform(g, 0, 10)}});
    const auto layout = NodeLayout::create(nodes);
    const auto s = random_snap(g, n);
    std::vector<std::array<double, 3>> pts;
    for (std::size_t i = 0; i < n; ++i)
      pts.push_back({layout.node(i).pos.x(), layout.node(i).pos.y(), s.readings(static_cast<Eigen::Index>(i))});
    const auto oracle = hand_plane(pts);
    const auto got = gradient_lsq(layout, s);
    CHECK(near(got.x(), oracle.x(), 1e-9));
    CHECK(near(got.y(), oracle.y(), 1e-9));
  }
}

TEST_CASE("gradient_lsq reproduces gradient_rect4 on linear fields") {
  std::mt19937_64 g(24);
  const auto layout = test::square6();
  for (int t = 0; t < 500; ++t) {
    const double a = test::uniform(g, -5, 5), b = test::uniform(g, -5, 5), c = test::uniform(g, -50, 0);
    RssiSnapshot s;
    s.readings.resize(4);
    for (int i = 0; i < 4; ++i) s.readings(i) = a * layout.node(i).pos.x() + b * layout.node(i).pos.y() + c;
    const auto l = gradient_lsq(layout, s), r = gradient_rect4(layout, s);
    CHECK(near(l.x(), r.x(), 1e-12));
    CHECK(near(l.y(), r.y(), 1e-12));
    CHECK(near(l.x(), a, 1e-12));
  }
}

TEST_CASE("gradient_lsq and gradient_rect4 agree in angle near the centroid") {
  const auto layout = test::square6();
  const auto m = noiseless();
  std::mt19937_64 g(25);
  for (int t = 0; t < 1000; ++t) {
    const double r = test::uniform(g, 0.05, 1.5), th = test::uniform(g, -kPi, kPi);
    const Position p = layout.centroid() + r * Position(std::cos(th), std::sin(th));
    const auto s = noiseless_snapshot(m, layout, p);
    const double e = angular_error(cdoa_from_gradient(gradient_lsq(layout, s)),
                                   cdoa_from_gradient(gradient_rect4(layout, s)));
    CHECK(std::abs(e) < 0.1);
  }
}

TEST_CASE("cdoa_from_gradient examples") {
  CHECK(cdoa_from_gradient({1, 0}).radians() == 0.0);
  CHECK(near(cdoa_from_gradient({0, 1}).radians(), kPi / 2, 1e-15));
  CHECK(near(cdoa_from_gradient({-1, -1}).radians(), -3 * kPi / 4, 1e-15));
  CHECK_THROWS_AS(cdoa_from_gradient({0, 0}), NoSignalDirection);
}

TEST_CASE("estimate_cdoa seeds, smooths and skips zero gradients") {
  const auto layout = test::square6();
  const auto m = noiseless();
  CdoaSmoother sm;
  const auto s1 = noiseless_snapshot(m, layout, {4, 3}, 1.0);
  const auto first = estimate_cdoa(layout, s1, sm, GradientMethod::Rect4);
  REQUIRE(first);
  CHECK(first->angle == first->raw_angle);
  CHECK(first->timestamp == 1.0);
  const auto again = estimate_cdoa(layout, s1, sm, GradientMethod::Rect4);
  REQUIRE(again);
  CHECK(near(angular_error(again->angle, again->raw_angle), 0, 1e-15));

  const auto s2 = noiseless_snapshot(m, layout, {3, 4});
  const auto next = estimate_cdoa(layout, s2, sm, GradientMethod::Rect4);
  REQUIRE(next);
  const auto oracle = ewma_angle(again->angle, next->raw_angle, 0.7).angle;
  CHECK(near(angular_error(next->angle, oracle), 0, 1e-15));

  const auto before = sm.last;
  CHECK_FALSE(estimate_cdoa(layout, noiseless_snapshot(m, layout, layout.centroid()), sm,
                            GradientMethod::Rect4));
  CHECK(sm.last == before);
}

TEST_CASE("estimate_cdoa due east of the centroid") {
  const auto layout = test::square6();
  const Position robot = layout.centroid() + Position(1, 0);
  auto rssi = [&](double x, double y) { return -40 - 30 * std::log10(std::hypot(robot.x() - x, robot.y() - y)); };
  const auto g = hand_rect4(rssi(0, 0), rssi(0, 6), rssi(6, 6), rssi(6, 0), 6, 6);
  CHECK(std::abs(std::atan2(g.y(), g.x())) < 0.05);
  CdoaSmoother sm;
  const auto m = estimate_cdoa(layout, noiseless_snapshot(noiseless(), layout, robot), sm, GradientMethod::Rect4);
  REQUIRE(m);
  CHECK(std::abs(m->raw_angle.radians()) < 0.05);
}

TEST_CASE("noiseless bearing fidelity on a 1 m ring") {
  const auto layout = test::square6();
  const auto m = noiseless();
  for (int deg = 0; deg < 360; ++deg) {
    const double th = deg * kPi / 180;
    const Position p = layout.centroid() + Position(std::cos(th), std::sin(th));
    const auto g = gradient_rect4(layout, noiseless_snapshot(m, layout, p));
    CHECK(std::abs(angular_error(cdoa_from_gradient(g), wrap_angle(th))) < 0.1);
  }
}

TEST_CASE("rotating the robot a quarter turn rotates the bearing") {
  const auto layout = test::square6();
  const auto m = noiseless();
  std::mt19937_64 g(26);
  for (int t = 0; t < 500; ++t) {
    const Position rel(test::uniform(g, -2.9, 2.9), test::uniform(g, -2.9, 2.9));
    if (rel.norm() < 1e-3) continue;
    const Position p = layout.centroid() + rel;
    const Position q = layout.centroid() + Position(-rel.y(), rel.x());
    const double a = cdoa_from_gradient(gradient_rect4(layout, noiseless_snapshot(m, layout, p))).radians();
    const double b = cdoa_from_gradient(gradient_rect4(layout, noiseless_snapshot(m, layout, q))).radians();
    CHECK(near(angular_error(wrap_angle(b), wrap_angle(a + kPi / 2)), 0, 1e-9));
  }
}

TEST_CASE("model_gradient direction ignores reference power and exponent") {
  const auto layout = test::square6();
  const Position src(1.2, 4.4);
  ChannelModel m;
  m.ref_rssi_a = -33;
  m.path_loss_eta = 4.2;
  const auto a = model_gradient(layout, src, GradientMethod::Rect4);
  const auto b = gradient_rect4(layout, noiseless_snapshot(m, layout, src));
  CHECK(near(angular_error(cdoa_from_gradient(a), cdoa_from_gradient(b)), 0, 1e-12));
}

TEST_CASE("gradient method names") {
  CHECK(parse_gradient_method("lsq") == GradientMethod::Lsq);
  CHECK(to_string(GradientMethod::General) == "general");
  CHECK_THROWS_AS(parse_gradient_method("nope"), InvalidArgument);
  CHECK(default_gradient_method(test::square6()) == GradientMethod::Rect4);
}
