#include "cdoa/coverage.hpp"

#include "cdoa/core.hpp"

namespace cdoa {

double square_coverage_area(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("sensing range must be > 0");
  return r * r / 2.0;
}

double rect_coverage_area(double r, double k) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("sensing range must be > 0");
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidArgument("aspect factor must be > 0");
  return r * r * k / (1.0 + k * k);
}

long long nodes_required(long long n_units) {
  if (n_units < 1) throw InvalidArgument("area units must be >= 1");
  return 2 * n_units + 2;
}

}  // namespace cdoa
