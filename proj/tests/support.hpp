#pragma once

#include "cdoa/core.hpp"

#include <cmath>
#include <random>

namespace test {

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool rel_near(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline cdoa::Workspace ws6() { return cdoa::Workspace::create(0, 6, 0, 6); }
inline cdoa::NodeLayout square6() { return cdoa::NodeLayout::corners(ws6()); }

}  // namespace test
