#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace oracle {

using rfr::RecordRefs;

std::vector<double> pooled_times(const RecordRefs& records) {
  std::set<double> times;
  for (const auto* rec : records) times.insert(rec->failure_times.begin(), rec->failure_times.end());
  return {times.begin(), times.end()};
}

namespace {

double d_i(const rfr::SystemRecord& rec, double t) {
  double count = 0;
  for (double ft : rec.failure_times) {
    if (ft == t) count += 1;
  }
  return count;
}

double delta_i(const rfr::SystemRecord& rec, double t) { return rec.censor_time >= t ? 1.0 : 0.0; }

double d_bar(const RecordRefs& records, double t) {
  return d_total(records, t) / delta_total(records, t);
}

// spread of event counts at one time among at-risk records
double var_d(const RecordRefs& records, double tk) {
  const double bar = d_bar(records, tk);
  double sum = 0;
  for (const auto* rec : records) {
    sum += delta_i(*rec, tk) / delta_total(records, tk) * (d_i(*rec, tk) - bar) * (d_i(*rec, tk) - bar);
  }
  return sum;
}

// co-movement of event counts at two times, tk strictly earlier than tk2
double cov_d(const RecordRefs& records, double tk, double tk2) {
  const double bar2 = d_bar(records, tk2);
  double sum = 0;
  for (const auto* rec : records) {
    sum += delta_i(*rec, tk2) / delta_total(records, tk2) * (d_i(*rec, tk2) - bar2) * d_i(*rec, tk);
  }
  return sum;
}

double cov_d_bar(const RecordRefs& records, double tk, double tk2) {
  if (tk == tk2) return var_d(records, tk) / delta_total(records, tk);
  const double earlier = std::min(tk, tk2);
  const double later = std::max(tk, tk2);
  return cov_d(records, earlier, later) / delta_total(records, earlier);
}

}  // namespace

double d_total(const RecordRefs& records, double t) {
  double sum = 0;
  for (const auto* rec : records) sum += d_i(*rec, t);
  return sum;
}

double delta_total(const RecordRefs& records, double t) {
  double sum = 0;
  for (const auto* rec : records) sum += delta_i(*rec, t);
  return sum;
}

double mcf_at(const RecordRefs& records, double t) {
  double sum = 0;
  for (double tk : pooled_times(records)) {
    if (tk <= t) sum += d_bar(records, tk);
  }
  return sum;
}

double variance_at(const RecordRefs& records, double t) {
  const auto times = pooled_times(records);
  double total = 0;
  for (const auto* rec : records) {
    double inner = 0;
    for (double tk : times) {
      if (tk > t) break;
      inner += delta_i(*rec, tk) / delta_total(records, tk) * (d_i(*rec, tk) - d_bar(records, tk));
    }
    total += inner * inner;
  }
  return total;
}

double covariance_at(const RecordRefs& records, double t_j, double t_p) {
  const auto times = pooled_times(records);
  double total = 0;
  for (double tk : times) {
    if (tk > t_j) break;
    for (double tk2 : times) {
      if (tk2 > t_p) break;
      total += cov_d_bar(records, tk, tk2);
    }
  }
  return total;
}

double merged_at(const std::vector<RecordRefs>& groups, double t) {
  double sum = 0;
  for (const auto& group : groups) sum += mcf_at(group, t);
  return sum / static_cast<double>(groups.size());
}

double c_index(const std::vector<double>& predicted, const std::vector<double>& observed) {
  double credit = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    for (std::size_t j = i + 1; j < observed.size(); ++j) {
      pairs += 1;
      if (observed[i] == observed[j] || predicted[i] == predicted[j]) {
        credit += 0.5;
      } else if ((observed[i] < observed[j]) == (predicted[i] < predicted[j])) {
        credit += 1;
      }
    }
  }
  return credit / pairs;
}

rfr::RecurrenceDataset random_small_dataset(rfr::Rng& rng, bool grid) {
  rfr::RecurrenceDataset data;
  const int n = 1 + static_cast<int>(rng.below(10));
  for (int i = 0; i < n; ++i) {
    rfr::SystemRecord rec;
    rec.id = "s" + std::to_string(i + 1);
    const int r = static_cast<int>(rng.below(6));
    std::set<double> times;
    while (static_cast<int>(times.size()) < r) {
      times.insert(grid ? static_cast<double>(1 + rng.below(12)) : rng.uniform(0.1, 12.0));
    }
    rec.failure_times.assign(times.begin(), times.end());
    const double last = rec.failure_times.empty() ? 0.0 : rec.failure_times.back();
    rec.censor_time = grid ? last + 1 + static_cast<double>(rng.below(4)) : last + rng.uniform(0.1, 4.0);
    data.systems.push_back(std::move(rec));
  }
  return data;
}

}  // namespace oracle
