#include "rfr/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rfr/util/numeric.hpp"
#include "rfr/util/rng.hpp"

namespace rfr {

int SystemRecord::failures_up_to(double t) const {
  return static_cast<int>(std::upper_bound(failure_times.begin(), failure_times.end(), t) -
                          failure_times.begin());
}

void ScalingParams::apply(SystemRecord& rec) const {
  if (identity()) return;
  if (rec.static_covariates.size() != mins.size()) {
    throw DataError("scaling fitted on " + std::to_string(mins.size()) +
                    " covariates, record '" + rec.id + "' has " +
                    std::to_string(rec.static_covariates.size()));
  }
  for (std::size_t j = 0; j < mins.size(); ++j) {
    rec.static_covariates[j] = (rec.static_covariates[j] - mins[j]) / ranges[j];
  }
}

void ScalingParams::apply(RecurrenceDataset& data) const {
  for (auto& rec : data.systems) apply(rec);
}

namespace {

void validate_record(const SystemRecord& rec, int p, int q) {
  const std::string who = "system '" + rec.id + "': ";
  if (rec.id.empty()) throw DataError("system with empty id");
  if (!(rec.censor_time > 0) || !std::isfinite(rec.censor_time)) {
    throw DataError(who + "censor time must be positive and finite, got " +
                    format_double(rec.censor_time));
  }
  double prev = 0;
  for (double t : rec.failure_times) {
    if (!std::isfinite(t) || t <= 0) {
      throw DataError(who + "failure times must be positive and finite, got " + format_double(t));
    }
    if (t <= prev && prev > 0) {
      throw DataError(who + "failure times must be strictly increasing, got " + format_double(t) +
                      " after " + format_double(prev));
    }
    if (t > rec.censor_time) {
      throw DataError(who + "failure time " + format_double(t) + " exceeds censor time " +
                      format_double(rec.censor_time));
    }
    prev = t;
  }
  if (static_cast<int>(rec.static_covariates.size()) != p) {
    throw DataError(who + "expected " + std::to_string(p) + " static covariates, got " +
                    std::to_string(rec.static_covariates.size()));
  }
  for (double x : rec.static_covariates) {
    if (!std::isfinite(x)) throw DataError(who + "non-finite static covariate");
  }
  if (static_cast<int>(rec.dynamic_covariates.size()) != q) {
    throw DataError(who + "expected " + std::to_string(q) + " dynamic channels, got " +
                    std::to_string(rec.dynamic_covariates.size()));
  }
  for (std::size_t ch = 0; ch < rec.dynamic_covariates.size(); ++ch) {
    const auto& series = rec.dynamic_covariates[ch];
    const std::string where = who + "channel " + std::to_string(ch + 1) + ": ";
    if (series.times.size() != series.values.size()) {
      throw DataError(where + "timestamp and value counts differ");
    }
    if (series.times.empty()) throw DataError(where + "empty series");
    for (std::size_t k = 0; k < series.times.size(); ++k) {
      if (!std::isfinite(series.times[k]) || !std::isfinite(series.values[k])) {
        throw DataError(where + "non-finite sample");
      }
      if (k > 0 && series.times[k] <= series.times[k - 1]) {
        throw DataError(where + "timestamps must be strictly increasing, got " +
                        format_double(series.times[k]) + " after " +
                        format_double(series.times[k - 1]));
      }
    }
    const bool anchored = series.times.front() <= 0 ||
                          (!rec.failure_times.empty() &&
                           series.times.front() <= rec.failure_times.front());
    if (!anchored) {
      throw DataError(where + "first timestamp " + format_double(series.times.front()) +
                      " starts after the first failure; series must begin at or before 0 or the "
                      "first failure time");
    }
  }
}

}  // namespace

void validate_dataset(const RecurrenceDataset& data) {
  const int p = data.p();
  const int q = data.q();
  std::unordered_set<std::string> seen;
  seen.reserve(data.systems.size());
  for (const auto& rec : data.systems) {
    if (!seen.insert(rec.id).second) throw DataError("duplicate system id '" + rec.id + "'");
    validate_record(rec, p, q);
  }
}

ScalingParams standardize_covariates(RecurrenceDataset& data) {
  ScalingParams params;
  const int p = data.p();
  if (p == 0 || data.systems.empty()) return params;
  params.mins.assign(p, 0.0);
  params.ranges.assign(p, 1.0);
  for (int j = 0; j < p; ++j) {
    double lo = data.systems[0].static_covariates[j];
    double hi = lo;
    for (const auto& rec : data.systems) {
      lo = std::min(lo, rec.static_covariates[j]);
      hi = std::max(hi, rec.static_covariates[j]);
    }
    params.mins[j] = lo;
    params.ranges[j] = hi > lo ? hi - lo : 1.0;
  }
  params.apply(data);
  return params;
}

double dynamic_value_at(const SystemRecord& rec, int channel, double t) {
  if (channel < 0 || channel >= static_cast<int>(rec.dynamic_covariates.size())) {
    throw DataError("system '" + rec.id + "': no dynamic channel " + std::to_string(channel + 1));
  }
  if (t < 0 || t > rec.censor_time) {
    throw DataError("system '" + rec.id + "': lookup time " + format_double(t) +
                    " outside [0, " + format_double(rec.censor_time) + "]");
  }
  const auto& series = rec.dynamic_covariates[channel];
  auto it = std::upper_bound(series.times.begin(), series.times.end(), t);
  if (it == series.times.begin()) {
    throw DataError("system '" + rec.id + "': lookup time " + format_double(t) +
                    " precedes first sample at " + format_double(series.times.front()));
  }
  return series.values[static_cast<std::size_t>(it - series.times.begin()) - 1];
}

double dynamic_value_backfill(const SystemRecord& rec, int channel, double t) {
  const auto& series = rec.dynamic_covariates.at(static_cast<std::size_t>(channel));
  auto it = std::upper_bound(series.times.begin(), series.times.end(), t);
  if (it == series.times.begin()) return series.values.front();
  return series.values[static_cast<std::size_t>(it - series.times.begin()) - 1];
}

std::vector<Shard> shard_dataset(const RecurrenceDataset& data, int workers, std::uint64_t seed) {
  if (workers < 1) throw DataError("worker count must be at least 1");
  std::vector<Shard> shards(workers);
  for (int w = 0; w < workers; ++w) shards[w].worker_id = w + 1;
  std::vector<int> order(data.systems.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  if (workers > 1) {
    Rng rng(derive_seed(seed, seed_tag::shard));
    rng.shuffle(order);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    shards[i % workers].system_indices.push_back(order[i]);
  }
  return shards;
}

}  // namespace rfr
