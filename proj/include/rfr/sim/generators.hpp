#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "rfr/data/dataset.hpp"
#include "rfr/util/rng.hpp"

namespace rfr {

// event times on (0, horizon] from successive exponential gaps
std::vector<double> gen_hpp(double rate, double horizon, Rng& rng);

// z(0) = 0 with independent Normal(0, sigma^2 * step) increments on a uniform
// sample grid
CovariateSeries gen_brownian_covariate(double sigma, double horizon, double step, Rng& rng);

// Thinning: candidate events at rate lambda_max accepted with probability
// intensity(t) / lambda_max. Throws DataError when the bound is violated.
std::vector<double> gen_nhpp_thinning(const std::function<double(double)>& intensity,
                                      double lambda_max, double horizon, Rng& rng);

// Built-in generator scenarios, keyed by letter:
//   A: constant per-system rate keyed on the (x1, x2) quadrant: 0.01 when
//      both are at most 0.5, 0.1 when both exceed 0.5, 0.05 otherwise
//   B: constant rate log(lambda) = 0.01 + 2 x1 + 0.5 x2
//   C: dynamic intensity exp{b0 + b1 z(t)} with (exp b0, b1) keyed on the
//      quadrant: (0.01, 0.5), (0.1, 0.1), else (0.05, 0); Brownian z
//   D: dynamic intensity exp{log(0.01) + 2 x1 + 0.5 x2 + 0.5 z(t)}
// Statics beyond x1, x2 are drawn but never used (redundant by design).
struct SimConfig {
  char scenario = 'A';
  int n = 200;
  int p = 10;
  double horizon = 100.0;
  double brownian_sigma = 0.1;
  double brownian_step = 1.0;
  std::uint64_t seed = 1;
};

// per-system rate for the constant-rate scenarios (A, B)
double scenario_rate(char scenario, double x1, double x2);

// (beta0, beta_z) for the dynamic scenarios (C, D)
std::pair<double, double> scenario_dynamic_coefs(char scenario, double x1, double x2);

// Deterministic under the seed: each system draws from its own derived
// stream, so the dataset is invariant to generation order.
RecurrenceDataset build_dataset(const SimConfig& cfg);

}  // namespace rfr
