#include "rfr/sim/generators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rfr/util/numeric.hpp"

namespace rfr {

std::vector<double> gen_hpp(double rate, double horizon, Rng& rng) {
  if (rate < 0) throw std::invalid_argument("gen_hpp: negative rate");
  std::vector<double> times;
  if (rate == 0) return times;
  double t = 0;
  for (;;) {
    t += rng.exponential(rate);
    if (t > horizon) break;
    times.push_back(t);
  }
  return times;
}

CovariateSeries gen_brownian_covariate(double sigma, double horizon, double step, Rng& rng) {
  if (step <= 0) throw std::invalid_argument("gen_brownian_covariate: step must be positive");
  if (sigma < 0) throw std::invalid_argument("gen_brownian_covariate: negative sigma");
  CovariateSeries series;
  const double sd = sigma * std::sqrt(step);
  const long last = static_cast<long>(std::floor(horizon / step + 1e-9));
  double value = 0;
  for (long k = 0; k <= last; ++k) {
    series.times.push_back(static_cast<double>(k) * step);
    series.values.push_back(value);
    value += rng.normal() * sd;
  }
  return series;
}

std::vector<double> gen_nhpp_thinning(const std::function<double(double)>& intensity,
                                      double lambda_max, double horizon, Rng& rng) {
  if (!(lambda_max > 0)) throw std::invalid_argument("gen_nhpp_thinning: bound must be positive");
  std::vector<double> times;
  double t = 0;
  for (;;) {
    t += rng.exponential(lambda_max);
    if (t > horizon) break;
    const double lam = intensity(t);
    if (lam > lambda_max) {
      throw DataError("thinning bound violated: intensity " + format_double(lam) + " exceeds " +
                      format_double(lambda_max) + " at t=" + format_double(t));
    }
    if (rng.uniform() * lambda_max < lam) times.push_back(t);
  }
  return times;
}

double scenario_rate(char scenario, double x1, double x2) {
  switch (scenario) {
    case 'A':
      if (x1 <= 0.5 && x2 <= 0.5) return 0.01;
      if (x1 > 0.5 && x2 > 0.5) return 0.1;
      return 0.05;
    case 'B':
      return std::exp(0.01 + 2.0 * x1 + 0.5 * x2);
    default:
      throw std::invalid_argument("scenario_rate: not a constant-rate scenario");
  }
}

std::pair<double, double> scenario_dynamic_coefs(char scenario, double x1, double x2) {
  switch (scenario) {
    case 'C':
      if (x1 <= 0.5 && x2 <= 0.5) return {std::log(0.01), 0.5};
      if (x1 > 0.5 && x2 > 0.5) return {std::log(0.1), 0.1};
      return {std::log(0.05), 0.0};
    case 'D':
      return {std::log(0.01) + 2.0 * x1 + 0.5 * x2, 0.5};
    default:
      throw std::invalid_argument("scenario_dynamic_coefs: not a dynamic scenario");
  }
}

namespace {

double locf(const CovariateSeries& series, double t) {
  auto it = std::upper_bound(series.times.begin(), series.times.end(), t);
  const std::size_t idx = it == series.times.begin() ? 0 : (it - series.times.begin() - 1);
  return series.values[idx];
}

}  // namespace

RecurrenceDataset build_dataset(const SimConfig& cfg) {
  const bool dynamic = cfg.scenario == 'C' || cfg.scenario == 'D';
  if (!dynamic && cfg.scenario != 'A' && cfg.scenario != 'B') {
    throw DataError(std::string("unknown scenario '") + cfg.scenario + "'");
  }
  if (cfg.n < 1 || cfg.p < 2 || cfg.horizon <= 0) {
    throw DataError("simulation needs n >= 1, p >= 2 and a positive horizon");
  }

  RecurrenceDataset data;
  for (int j = 0; j < cfg.p; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
  data.systems.resize(cfg.n);

  for (int i = 0; i < cfg.n; ++i) {
    Rng rng(derive_seed(cfg.seed, seed_tag::system, static_cast<std::uint64_t>(i)));
    SystemRecord& rec = data.systems[i];
    rec.id = "s" + std::to_string(i + 1);
    rec.censor_time = cfg.horizon;
    rec.static_covariates.resize(cfg.p);
    for (int j = 0; j < cfg.p; ++j) rec.static_covariates[j] = rng.uniform();
    const double x1 = rec.static_covariates[0];
    const double x2 = rec.static_covariates[1];

    if (!dynamic) {
      rec.failure_times = gen_hpp(scenario_rate(cfg.scenario, x1, x2), cfg.horizon, rng);
      continue;
    }

    CovariateSeries z =
        gen_brownian_covariate(cfg.brownian_sigma, cfg.horizon, cfg.brownian_step, rng);
    const auto [beta0, beta_z] = scenario_dynamic_coefs(cfg.scenario, x1, x2);
    double peak = 0;
    for (double v : z.values) peak = std::max(peak, std::exp(beta0 + beta_z * v));
    const double lambda_max = 1.05 * peak;
    rec.failure_times = gen_nhpp_thinning(
        [&](double t) { return std::exp(beta0 + beta_z * locf(z, t)); }, lambda_max, cfg.horizon,
        rng);
    rec.dynamic_covariates.push_back(std::move(z));
  }

  validate_dataset(data);
  return data;
}

}  // namespace rfr
