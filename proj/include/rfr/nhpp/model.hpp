#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rfr/data/dataset.hpp"
#include "rfr/mcf/estimator.hpp"

namespace rfr {

// Log-linear recurrence intensity over dynamic covariate channels:
// log lambda(t) = beta0 + sum_j beta_j z'_j(t), with z'_j = (z_j - z_mean_j) /
// z_scale_j standardized per fitting node. Coefficients are stored in the
// standardized space; raw_beta* give the equivalent raw-scale view.
struct IntensityModel {
  double beta0 = 0;
  std::vector<double> beta;
  double omega = 0;
  std::vector<double> z_mean;
  std::vector<double> z_scale;
  bool converged = true;
  int iterations = 0;

  bool operator==(const IntensityModel&) const = default;
  int q() const { return static_cast<int>(beta.size()); }
  double raw_beta(int j) const { return beta[j] / z_scale[j]; }
  double raw_beta0() const {
    double b = beta0;
    for (int j = 0; j < q(); ++j) b -= beta[j] * z_mean[j] / z_scale[j];
    return b;
  }
};

// lambda at raw channel values
double intensity_at(const IntensityModel& model, const std::vector<double>& z_raw);

// Exact integral of lambda over [0, t] along the record's piecewise-constant
// channel paths, first sample carried back to 0 and last carried forward; t
// may exceed the censor time (prediction use).
double cumulative_intensity(const IntensityModel& model, const SystemRecord& rec, double t);

// integral terms minus event log-intensities, plus omega * l1(beta); beta0
// unpenalized
double penalized_nll(const IntensityModel& model, const RecordRefs& records);

// gradient of the smooth (unpenalized) part in (beta0, beta...), standardized space
std::vector<double> nll_gradient(const IntensityModel& model, const RecordRefs& records);

struct FitConfig {
  int max_iterations = 500;
  // stop once the objective decrease falls under objective_tolerance and the
  // parameter displacement under step_tolerance; the displacement condition
  // keeps the fitted point accurate, not just the objective flat
  double objective_tolerance = 1e-8;
  double step_tolerance = 1e-9;
};

// Proximal-gradient (ISTA) fit with backtracking line search; soft-thresholds
// beta each step, leaves beta0 free. Standardization comes from the records.
// warm, if given, provides a raw-scale starting point from an enclosing node.
// Throws DataError when the records carry no failures. Non-convergence within
// max_iterations is flagged on the model, not an error.
IntensityModel fit_intensity(const RecordRefs& records, double omega,
                             const IntensityModel* warm = nullptr, const FitConfig& cfg = {});

struct NllPoint {
  double value = 0;
  std::vector<double> gradient;
};

// smooth NLL and gradient at standardized-space parameters (beta0, beta...)
using NllFn = std::function<NllPoint(const std::vector<double>&)>;

// Optimizer core shared by the in-process and distributed fits; init is in
// the standardized space matching z_mean/z_scale.
IntensityModel fit_intensity_core(const NllFn& fn, int q, double omega,
                                  std::vector<double> z_mean, std::vector<double> z_scale,
                                  std::vector<double> init, const FitConfig& cfg);

// Standardized-space starting point shared by the local and distributed
// fits: the warm model's raw-scale view re-standardized, else the constant
// intensity log(events / exposure).
std::vector<double> initial_params(int q, const std::vector<double>& z_mean,
                                   const std::vector<double>& z_scale, const IntensityModel* warm,
                                   double event_count, double total_exposure);

// 5-fold cross-validated penalty on held-out unpenalized NLL, over 10
// log-spaced values from the all-zero-coefficient threshold down three
// decades; ties prefer the stronger penalty.
double select_omega(const RecordRefs& records, std::uint64_t seed, const FitConfig& cfg = {});

// Flattened piecewise-constant segment tables for a record set; the
// likelihood evaluation hot path. Rows hold raw channel values; standardized
// parameters are folded into raw-space coefficients before each sweep.
class SegmentCache {
 public:
  explicit SegmentCache(const RecordRefs& records);

  int q() const { return q_; }
  double event_count() const { return event_count_; }
  double total_exposure() const { return total_exposure_; }

  // per-channel moments over segment rows: (row count, sum, sum of squares)
  struct Moments {
    double count = 0;
    std::vector<double> sum;
    std::vector<double> sum_sq;
  };
  Moments moments() const;

  NllPoint eval(const std::vector<double>& params, const std::vector<double>& z_mean,
                const std::vector<double>& z_scale) const;

 private:
  int q_ = 0;
  double event_count_ = 0;
  double total_exposure_ = 0;
  std::vector<double> seg_len_;
  std::vector<std::vector<double>> seg_z_;  // one column per channel
  std::vector<double> event_z_sum_;         // raw per-channel sums over events
};

// mean/scale from pooled moments; scale 1 for (near-)constant channels
void moments_to_scalers(const SegmentCache::Moments& moments, std::vector<double>& z_mean,
                        std::vector<double>& z_scale);

}  // namespace rfr
