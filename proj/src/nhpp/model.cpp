#include "rfr/nhpp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "rfr/kernels/kernels.hpp"
#include "rfr/util/rng.hpp"

namespace rfr {

double intensity_at(const IntensityModel& model, const std::vector<double>& z_raw) {
  if (static_cast<int>(z_raw.size()) != model.q()) {
    throw DataError("intensity_at: expected " + std::to_string(model.q()) + " channels, got " +
                    std::to_string(z_raw.size()));
  }
  double u = model.beta0;
  for (int j = 0; j < model.q(); ++j) {
    u += model.beta[j] * (z_raw[j] - model.z_mean[j]) / model.z_scale[j];
  }
  return std::exp(u);
}

namespace {

double soft_threshold(double v, double cut) {
  if (v > cut) return v - cut;
  if (v < -cut) return v + cut;
  return 0;
}

// segment boundaries of a record's channel paths over [0, upto]
std::vector<double> segment_boundaries(const SystemRecord& rec, double upto) {
  std::set<double> cuts;
  cuts.insert(0.0);
  for (const auto& series : rec.dynamic_covariates) {
    for (double t : series.times) {
      if (t > 0 && t < upto) cuts.insert(t);
    }
  }
  cuts.insert(upto);
  return {cuts.begin(), cuts.end()};
}

}  // namespace

double cumulative_intensity(const IntensityModel& model, const SystemRecord& rec, double t) {
  if (static_cast<int>(rec.dynamic_covariates.size()) != model.q()) {
    throw DataError("cumulative_intensity: record '" + rec.id + "' has " +
                    std::to_string(rec.dynamic_covariates.size()) + " channels, model expects " +
                    std::to_string(model.q()));
  }
  if (t <= 0) return 0;
  const double raw0 = model.raw_beta0();
  std::vector<double> raw(model.q());
  for (int j = 0; j < model.q(); ++j) raw[j] = model.raw_beta(j);

  const auto bounds = segment_boundaries(rec, t);
  double total = 0;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    const double len = bounds[k + 1] - bounds[k];
    if (len <= 0) continue;
    double u = raw0;
    for (int j = 0; j < model.q(); ++j) u += raw[j] * dynamic_value_backfill(rec, j, bounds[k]);
    total += len * std::exp(u);
  }
  return total;
}

SegmentCache::SegmentCache(const RecordRefs& records) {
  q_ = records.empty() ? 0 : static_cast<int>(records[0]->dynamic_covariates.size());
  seg_z_.resize(q_);
  event_z_sum_.assign(q_, 0.0);
  for (const auto* rec : records) {
    total_exposure_ += rec->censor_time;
    const auto bounds = segment_boundaries(*rec, rec->censor_time);
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
      const double len = bounds[k + 1] - bounds[k];
      if (len <= 0) continue;
      seg_len_.push_back(len);
      for (int j = 0; j < q_; ++j) {
        seg_z_[j].push_back(dynamic_value_backfill(*rec, j, bounds[k]));
      }
    }
    event_count_ += static_cast<double>(rec->failure_times.size());
    for (double ft : rec->failure_times) {
      for (int j = 0; j < q_; ++j) event_z_sum_[j] += dynamic_value_backfill(*rec, j, ft);
    }
  }
}

SegmentCache::Moments SegmentCache::moments() const {
  Moments m;
  m.count = static_cast<double>(seg_len_.size());
  m.sum.assign(q_, 0.0);
  m.sum_sq.assign(q_, 0.0);
  for (int j = 0; j < q_; ++j) {
    for (double v : seg_z_[j]) {
      m.sum[j] += v;
      m.sum_sq[j] += v * v;
    }
  }
  return m;
}

void moments_to_scalers(const SegmentCache::Moments& moments, std::vector<double>& z_mean,
                        std::vector<double>& z_scale) {
  const std::size_t q = moments.sum.size();
  z_mean.assign(q, 0.0);
  z_scale.assign(q, 1.0);
  if (moments.count <= 0) return;
  for (std::size_t j = 0; j < q; ++j) {
    const double mean = moments.sum[j] / moments.count;
    const double var = moments.sum_sq[j] / moments.count - mean * mean;
    z_mean[j] = mean;
    if (var > 1e-24) z_scale[j] = std::sqrt(var);
  }
}

NllPoint SegmentCache::eval(const std::vector<double>& params, const std::vector<double>& z_mean,
                            const std::vector<double>& z_scale) const {
  // fold the standardization into raw-space coefficients
  double c0 = params[0];
  std::vector<double> c(q_);
  for (int j = 0; j < q_; ++j) {
    c[j] = params[j + 1] / z_scale[j];
    c0 -= params[j + 1] * z_mean[j] / z_scale[j];
  }

  const std::size_t rows = seg_len_.size();
  std::vector<double> u(rows, c0);
  std::vector<double> lam(rows);
  for (int j = 0; j < q_; ++j) kernels::axpy(c[j], seg_z_[j].data(), u.data(), rows);
  kernels::vexp(u.data(), lam.data(), rows);
  std::vector<double> w(rows);
  double integral = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    w[r] = seg_len_[r] * lam[r];
    integral += w[r];
  }

  NllPoint out;
  out.gradient.assign(q_ + 1, 0.0);
  out.gradient[0] = integral - event_count_;
  out.value = integral - event_count_ * params[0];
  for (int j = 0; j < q_; ++j) {
    const double event_std = (event_z_sum_[j] - z_mean[j] * event_count_) / z_scale[j];
    out.value -= params[j + 1] * event_std;
    out.gradient[j + 1] =
        (kernels::dot(w.data(), seg_z_[j].data(), rows) - z_mean[j] * integral) / z_scale[j] -
        event_std;
  }
  return out;
}

namespace {

double l1_norm(const std::vector<double>& params) {
  double v = 0;
  for (std::size_t j = 1; j < params.size(); ++j) v += std::abs(params[j]);
  return v;
}

}  // namespace

IntensityModel fit_intensity_core(const NllFn& fn, int q, double omega, std::vector<double> z_mean,
                                  std::vector<double> z_scale, std::vector<double> init,
                                  const FitConfig& cfg) {
  std::vector<double> x = std::move(init);
  NllPoint cur = fn(x);
  double objective = cur.value + omega * l1_norm(x);
  double step = 1.0;
  int iter = 0;
  bool converged = false;

  // Step proposals use the Barzilai-Borwein secant estimate of the local
  // curvature; backtracking below keeps every accepted step monotone, so this
  // only sharpens the tail where plain doubling crawls.
  std::vector<double> prev_x;
  std::vector<double> prev_grad;
  std::vector<double> cand(q + 1);
  while (iter < cfg.max_iterations) {
    ++iter;
    double proposal = std::min(step * 2.0, 1e12);
    if (!prev_x.empty()) {
      double ss = 0, sy = 0;
      for (int k = 0; k <= q; ++k) {
        const double s = x[k] - prev_x[k];
        const double y = cur.gradient[k] - prev_grad[k];
        ss += s * s;
        sy += s * y;
      }
      if (sy > 0 && ss > 0) proposal = std::min(ss / sy, 1e12);
    }
    step = proposal;
    prev_x = x;
    prev_grad = cur.gradient;
    NllPoint cand_eval;
    for (;;) {
      cand[0] = x[0] - step * cur.gradient[0];
      for (int j = 0; j < q; ++j) {
        cand[j + 1] = soft_threshold(x[j + 1] - step * cur.gradient[j + 1], step * omega);
      }
      cand_eval = fn(cand);
      double linear = cur.value;
      double sq = 0;
      for (int k = 0; k <= q; ++k) {
        const double d = cand[k] - x[k];
        linear += cur.gradient[k] * d;
        sq += d * d;
      }
      if (cand_eval.value <= linear + sq / (2 * step) + 1e-12 * std::abs(cur.value) ||
          step <= 1e-14) {
        break;
      }
      step *= 0.5;
    }

    double displacement = 0;
    double magnitude = 0;
    for (int k = 0; k <= q; ++k) {
      displacement = std::max(displacement, std::abs(cand[k] - x[k]));
      magnitude = std::max(magnitude, std::abs(cand[k]));
    }
    const double new_objective = cand_eval.value + omega * l1_norm(cand);
    const double decrease = objective - new_objective;
    x = cand;
    cur = cand_eval;
    objective = new_objective;
    if (decrease < cfg.objective_tolerance && displacement < cfg.step_tolerance * (1 + magnitude)) {
      converged = true;
      break;
    }
  }

  IntensityModel model;
  model.beta0 = x[0];
  model.beta.assign(x.begin() + 1, x.end());
  model.omega = omega;
  model.z_mean = std::move(z_mean);
  model.z_scale = std::move(z_scale);
  model.converged = converged;
  model.iterations = iter;
  return model;
}

IntensityModel fit_intensity(const RecordRefs& records, double omega, const IntensityModel* warm,
                             const FitConfig& cfg) {
  SegmentCache cache(records);
  if (cache.event_count() <= 0) {
    throw DataError("degenerate node: no failures to fit an intensity model on");
  }
  std::vector<double> z_mean;
  std::vector<double> z_scale;
  moments_to_scalers(cache.moments(), z_mean, z_scale);
  const int q = cache.q();
  std::vector<double> init =
      initial_params(q, z_mean, z_scale, warm, cache.event_count(), cache.total_exposure());

  NllFn fn = [&cache, &z_mean, &z_scale](const std::vector<double>& p) {
    return cache.eval(p, z_mean, z_scale);
  };
  return fit_intensity_core(fn, q, omega, z_mean, z_scale, std::move(init), cfg);
}

std::vector<double> initial_params(int q, const std::vector<double>& z_mean,
                                   const std::vector<double>& z_scale, const IntensityModel* warm,
                                   double event_count, double total_exposure) {
  std::vector<double> init(q + 1, 0.0);
  if (warm && warm->q() == q) {
    init[0] = warm->raw_beta0();
    for (int j = 0; j < q; ++j) {
      const double raw = warm->raw_beta(j);
      init[j + 1] = raw * z_scale[j];
      init[0] += raw * z_mean[j];
    }
  } else {
    init[0] = std::log(event_count / total_exposure);
  }
  return init;
}

double penalized_nll(const IntensityModel& model, const RecordRefs& records) {
  SegmentCache cache(records);
  std::vector<double> params(model.q() + 1);
  params[0] = model.beta0;
  for (int j = 0; j < model.q(); ++j) params[j + 1] = model.beta[j];
  double value = cache.eval(params, model.z_mean, model.z_scale).value;
  for (double b : model.beta) value += model.omega * std::abs(b);
  return value;
}

std::vector<double> nll_gradient(const IntensityModel& model, const RecordRefs& records) {
  SegmentCache cache(records);
  std::vector<double> params(model.q() + 1);
  params[0] = model.beta0;
  for (int j = 0; j < model.q(); ++j) params[j + 1] = model.beta[j];
  return cache.eval(params, model.z_mean, model.z_scale).gradient;
}

double select_omega(const RecordRefs& records, std::uint64_t seed, const FitConfig& cfg) {
  SegmentCache full(records);
  if (full.event_count() <= 0) {
    throw DataError("degenerate node: no failures to select a penalty on");
  }
  if (full.q() == 0) return 0.0;

  std::vector<double> z_mean;
  std::vector<double> z_scale;
  moments_to_scalers(full.moments(), z_mean, z_scale);
  std::vector<double> at_null(full.q() + 1, 0.0);
  at_null[0] = std::log(full.event_count() / full.total_exposure());
  const auto null_point = full.eval(at_null, z_mean, z_scale);
  double omega_max = 0;
  for (int j = 0; j < full.q(); ++j) {
    omega_max = std::max(omega_max, std::abs(null_point.gradient[j + 1]));
  }
  if (omega_max <= 0) return 0.0;

  constexpr int kGridSize = 10;
  constexpr int kFolds = 5;
  std::vector<double> grid(kGridSize);
  for (int i = 0; i < kGridSize; ++i) grid[i] = omega_max * std::pow(10.0, -3.0 * i / 9.0);

  std::vector<int> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, seed_tag::fold));
  rng.shuffle(order);

  std::vector<double> score(kGridSize, 0.0);
  std::vector<int> contributors(kGridSize, 0);
  for (int f = 0; f < kFolds; ++f) {
    RecordRefs train;
    RecordRefs held;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (static_cast<int>(i) % kFolds == f ? held : train).push_back(records[order[i]]);
    }
    if (train.empty() || held.empty()) continue;
    IntensityModel prev;
    bool has_prev = false;
    for (int i = 0; i < kGridSize; ++i) {
      IntensityModel model;
      try {
        model = fit_intensity(train, grid[i], has_prev ? &prev : nullptr, cfg);
      } catch (const DataError&) {
        break;  // degenerate training fold
      }
      IntensityModel unpenalized = model;
      unpenalized.omega = 0;
      score[i] += penalized_nll(unpenalized, held);
      contributors[i] += 1;
      prev = std::move(model);
      has_prev = true;
    }
  }

  double best = grid[0];
  double best_score = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGridSize; ++i) {
    if (contributors[i] == 0) continue;
    const double mean = score[i] / contributors[i];
    if (mean < best_score) {
      best_score = mean;
      best = grid[i];
    }
  }
  return best;
}

}  // namespace rfr
