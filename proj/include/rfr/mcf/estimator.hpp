#pragma once

#include <cstddef>
#include <vector>

#include "rfr/data/dataset.hpp"
#include "rfr/mcf/step_function.hpp"

namespace rfr {

// Record subsets are passed as pointer lists; a pointer appearing twice means
// the system counts twice (bootstrap multiplicity).
using RecordRefs = std::vector<const SystemRecord*>;

RecordRefs refs_of(const RecurrenceDataset& data);

// Nonparametric mean cumulative function estimate over a group of systems.
// Knots are the pooled unique failure times; the per-knot increment is the
// event count among at-risk systems divided by the at-risk count, and the
// variance tracks squared per-system cumulative deviations from those
// increments. event_counts, at_risk and censor_times are kept so estimates
// can be merged or covariance-projected without touching the records again.
struct McfEstimate {
  StepFunction mcf;
  StepFunction variance;
  std::size_t n_systems = 0;
  std::vector<double> event_counts;             // events at each knot, multiplicity included
  std::vector<double> at_risk;                  // systems still observed at each knot
  std::vector<double> censor_times;             // sorted ascending, one per system
  std::vector<std::vector<double>> covariance;  // k x k, filled by add_covariance / merge

  const std::vector<double>& pooled_times() const { return mcf.knots; }
  bool has_covariance() const { return !covariance.empty(); }

  // at-risk count at an arbitrary time, from the censor times
  double at_risk_at(double t) const;

  // covariance of the estimate at (t, t'); 0 before the first knot
  double covariance_at(double t, double t_prime) const;
};

// Estimate for one group. Zero-failure systems widen the at-risk counts but
// add no knots; an empty group yields an empty estimate.
McfEstimate local_mcf(const RecordRefs& records);

// Curve-only estimate from pre-sorted pooled failure times and censor times
// (variance left empty). local_mcf routes through this, so callers that
// maintain sorted member lists get bit-identical curves without re-sorting.
McfEstimate mcf_from_sorted(std::vector<double> event_times_sorted,
                            std::vector<double> censor_times_sorted);

// Full covariance matrix of the estimate at its own pooled times.
std::vector<std::vector<double>> mcf_covariance(const RecordRefs& records);

// Computes and stores the covariance matrix on an estimate built by local_mcf
// from the same records.
void add_covariance(McfEstimate& est, const RecordRefs& records);

// Combines per-group estimates on the union of their knots. The default is
// the unweighted mean of the group curves (variances scaled by 1/W^2);
// weighted=true recombines per-knot event and at-risk counts so the merged
// curve equals the pooled single-group estimate. The weighted variance and
// covariance are share-weighted recombinations, exact at W=1.
//
// Every entry of locals counts toward the divisor; callers that want to skip
// empty groups filter first. Covariance merges when every group with any
// failure carries it (failure-free groups have nothing to contribute).
McfEstimate merge_mcf(const std::vector<McfEstimate>& locals, bool weighted = false);

}  // namespace rfr
