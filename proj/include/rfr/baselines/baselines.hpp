#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfr/data/dataset.hpp"
#include "rfr/forest/forest.hpp"
#include "rfr/mcf/estimator.hpp"
#include "rfr/nhpp/model.hpp"

namespace rfr {

// Comparator methods: the pooled curve that ignores covariates entirely, its
// K-nearest-neighbor localization, and unpenalized log-linear rate models.
// All of them score a system by expected cumulative failures at a horizon,
// the same scale the forest predicts on.

// single curve from all training systems; every test system gets the same value
McfEstimate pooled_mcf(const RecordRefs& train);

// Indices into train of the K systems closest to x in Euclidean distance over
// all static covariates, ascending, distance ties broken by index. Throws
// when K is outside [1, |train|].
std::vector<int> k_nearest_indices(const RecordRefs& train, const std::vector<double>& x, int K);

// curve over the K nearest training systems; K = |train| gives pooled_mcf exactly
McfEstimate mcf_k_nearest(const RecordRefs& train, const std::vector<double>& x, int K);

// Unpenalized MLE of log lambda_i(t) = beta0 + sum_j beta_j x_ij (+ the
// record's own sensor channels when with_dynamics). Statics enter as
// constant channels so one likelihood implementation serves both variants.
IntensityModel fit_loglinear_rate(const RecordRefs& train, bool with_dynamics,
                                  const FitConfig& cfg = {});

// expected cumulative failures by t for one system under the fitted model
double loglinear_cumulative(const IntensityModel& model, const SystemRecord& rec,
                            bool with_dynamics, double t);

enum class CompareMethod { forest, pooled, k_nearest, hpp, nhpp };

std::string method_name(CompareMethod method);

struct CompareConfig {
  std::vector<CompareMethod> methods;
  int iterations = 500;
  double split = 0.75;  // training fraction
  int k_neighbors = 20;
  ForestHyper forest;
  FitConfig fit;
  int threads = 1;
};

// Repeated random train/test comparison on the concordance scale. Scores are
// [iteration][method]; a method failing on an iteration records NaN and the
// iteration is kept.
struct ComparisonReport {
  std::vector<std::string> methods;
  std::vector<std::vector<double>> scores;
  double split = 0;
  std::uint64_t seed = 0;

  struct Summary {
    double mean = 0;
    double sd = 0;
    double q1 = 0;
    double median = 0;
    double q3 = 0;
    int n = 0;  // iterations that produced a score
  };
  Summary summarize(int method) const;

  std::string to_csv() const;
  std::string summary_json() const;
};

// Per iteration: seeded shuffle, floor(split * n) training systems, fit every
// method on the training split, concordance on the held-out split at the
// training censor quantile. Deterministic under (data, cfg, seed); iterations
// run independently when cfg.threads > 1.
ComparisonReport cross_validate_compare(const RecurrenceDataset& data, const CompareConfig& cfg,
                                        std::uint64_t seed);

}  // namespace rfr
