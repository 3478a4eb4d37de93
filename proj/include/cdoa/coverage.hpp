#pragma once

namespace cdoa {

/// Largest square four nodes of range r can cover: r^2 / 2.
double square_coverage_area(double r);

/// Rectangle with side ratio k: r^2 k / (1 + k^2). Peaks at k = 1.
double rect_coverage_area(double r, double k);

/// Nodes needed to cover n replicated unit squares: 2n + 2.
long long nodes_required(long long n_units);

}  // namespace cdoa
