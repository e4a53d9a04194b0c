#pragma once

#include <vector>

namespace rfr {

// Right-continuous step function: 0 before the first knot, values[i] on
// [knots[i], knots[i+1]), last value carried past the last knot.
struct StepFunction {
  std::vector<double> knots;  // strictly increasing, positive
  std::vector<double> values;

  bool operator==(const StepFunction&) const = default;
  bool empty() const { return knots.empty(); }
  double at(double t) const;
};

// Throws std::invalid_argument on knot/value count mismatch, non-positive or
// non-increasing knots, or non-finite entries.
void validate_step(const StepFunction& sf);

// sup_t |a(t) - b(t)|; both functions change value only at their knots
double sup_diff(const StepFunction& a, const StepFunction& b);

}  // namespace rfr
