#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfr {

// Thrown on malformed or inconsistent input data; the CLI maps it to exit 1.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One observed dynamic covariate channel: samples (t_k, v_k) with strictly
// increasing timestamps, value carried forward between samples.
struct CovariateSeries {
  std::vector<double> times;
  std::vector<double> values;
  bool operator==(const CovariateSeries&) const = default;
};

struct SystemRecord {
  std::string id;
  std::vector<double> failure_times;  // strictly increasing, 0 < t <= censor_time
  double censor_time = 0;             // > 0
  std::vector<double> static_covariates;
  std::vector<CovariateSeries> dynamic_covariates;

  bool operator==(const SystemRecord&) const = default;
  int n_failures() const { return static_cast<int>(failure_times.size()); }
  int failures_up_to(double t) const;
};

struct RecurrenceDataset {
  std::vector<SystemRecord> systems;
  std::vector<std::string> covariate_names;

  bool operator==(const RecurrenceDataset&) const = default;
  int n() const { return static_cast<int>(systems.size()); }
  int p() const { return static_cast<int>(covariate_names.size()); }
  int q() const {
    return systems.empty() ? 0 : static_cast<int>(systems[0].dynamic_covariates.size());
  }
};

// Min-max scaling fitted on training data, reusable on held-out records.
struct ScalingParams {
  std::vector<double> mins;
  std::vector<double> ranges;  // 1 for constant columns

  bool identity() const { return mins.empty(); }
  void apply(SystemRecord& rec) const;
  void apply(RecurrenceDataset& data) const;
};

// Throws DataError naming the first violated invariant (unique non-empty ids,
// positive strictly increasing failure times within the censor window,
// consistent covariate dimensions, strictly increasing sensor timestamps,
// first sensor timestamp at or before 0 or the first failure).
void validate_dataset(const RecurrenceDataset& data);

// In-place min-max standardization of static covariates; constant columns map
// to 0. Returns the fitted scaling for application to held-out data.
ScalingParams standardize_covariates(RecurrenceDataset& data);

// Last-observation-carried-forward lookup. Requires 0 <= t <= censor_time and
// throws DataError when t falls before the first sample.
double dynamic_value_at(const SystemRecord& rec, int channel, double t);

// Like dynamic_value_at but carries the first sample backward; used where a
// whole-path value is needed (integrals, mean covariate paths) rather than a
// strictly observed one.
double dynamic_value_backfill(const SystemRecord& rec, int channel, double t);

struct Shard {
  int worker_id = 0;  // 1-based, in [1, W]
  std::vector<int> system_indices;
};

// Partition into W shards with sizes differing by at most one. W=1 preserves
// dataset order; W>1 deals a seeded shuffle round-robin.
std::vector<Shard> shard_dataset(const RecurrenceDataset& data, int workers, std::uint64_t seed);

}  // namespace rfr
