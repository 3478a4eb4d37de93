#include "cdoa/coverage.hpp"
#include "cdoa/core.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cdoa;
using test::near;

TEST_CASE("square coverage examples") {
  CHECK(square_coverage_area(10) == 50.0);
  CHECK(near(square_coverage_area(std::sqrt(2.0)), 1.0, 1e-15));
  CHECK(square_coverage_area(1) == 0.5);
  CHECK_THROWS_AS(square_coverage_area(0), InvalidArgument);
}

TEST_CASE("square coverage grows with derivative r") {
  double prev = 0;
  for (double r = 0.1; r < 100; r += 0.1) {
    const double a = square_coverage_area(r);
    CHECK(a > prev);
    prev = a;
    const double h = 1e-5;
    CHECK(near((square_coverage_area(r + h) - square_coverage_area(r - std::min(h, r / 2))) /
                   (h + std::min(h, r / 2)),
               r, 1e-6 * (1 + r)));
  }
}

TEST_CASE("rectangle coverage examples") {
  for (double r : {0.5, 1.0, 10.0, 37.0}) CHECK(near(rect_coverage_area(r, 1), square_coverage_area(r), 1e-12));
  CHECK(rect_coverage_area(10, 1e6) < 1e-5 * 100);
  for (double k : {2.0, 3.0, 7.5}) CHECK(near(rect_coverage_area(6, k), rect_coverage_area(6, 1 / k), 1e-12));
  CHECK_THROWS_AS(rect_coverage_area(1, 0), InvalidArgument);
  CHECK_THROWS_AS(rect_coverage_area(-1, 1), InvalidArgument);
}

TEST_CASE("rectangle coverage peaks at k = 1") {
  const double r = 10;
  double best_k = 0, best = -1;
  // Log-spaced sweep over [0.01, 100] that contains k = 1 exactly.
  for (int i = -2000; i <= 2000; ++i) {
    const double k = std::pow(10.0, i / 1000.0);
    const double a = rect_coverage_area(r, k);
    if (a > best) {
      best = a;
      best_k = k;
    }
  }
  CHECK(best_k == 1.0);
  CHECK(best == square_coverage_area(r));
}

TEST_CASE("nodes required examples and slope") {
  CHECK(nodes_required(1) == 4);
  CHECK(nodes_required(2) == 6);
  CHECK(nodes_required(10) == 22);
  for (long long n = 1; n < 1000; ++n) CHECK(nodes_required(n + 1) - nodes_required(n) == 2);
  CHECK_THROWS_AS(nodes_required(0), InvalidArgument);
}
