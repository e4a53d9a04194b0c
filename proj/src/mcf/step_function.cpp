#include "rfr/mcf/step_function.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rfr/util/numeric.hpp"

namespace rfr {

double StepFunction::at(double t) const {
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return 0.0;
  return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

void validate_step(const StepFunction& sf) {
  if (sf.knots.size() != sf.values.size()) {
    throw std::invalid_argument("step function has " + std::to_string(sf.knots.size()) +
                                " knots but " + std::to_string(sf.values.size()) + " values");
  }
  double prev = 0;
  for (std::size_t i = 0; i < sf.knots.size(); ++i) {
    if (!std::isfinite(sf.knots[i]) || sf.knots[i] <= 0) {
      throw std::invalid_argument("step function knots must be positive and finite, got " +
                                  format_double(sf.knots[i]));
    }
    if (i > 0 && sf.knots[i] <= prev) {
      throw std::invalid_argument("step function knots must be strictly increasing, got " +
                                  format_double(sf.knots[i]) + " after " + format_double(prev));
    }
    if (!std::isfinite(sf.values[i])) {
      throw std::invalid_argument("step function values must be finite");
    }
    prev = sf.knots[i];
  }
}

double sup_diff(const StepFunction& a, const StepFunction& b) {
  double sup = 0;
  for (const auto* sf : {&a, &b}) {
    for (double t : sf->knots) sup = std::max(sup, std::abs(a.at(t) - b.at(t)));
  }
  return sup;
}

}  // namespace rfr
