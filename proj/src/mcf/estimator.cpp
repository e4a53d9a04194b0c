#include "rfr/mcf/estimator.hpp"

#include <algorithm>
#include <stdexcept>

namespace rfr {

RecordRefs refs_of(const RecurrenceDataset& data) {
  RecordRefs refs;
  refs.reserve(data.systems.size());
  for (const auto& rec : data.systems) refs.push_back(&rec);
  return refs;
}

double McfEstimate::at_risk_at(double t) const {
  auto it = std::lower_bound(censor_times.begin(), censor_times.end(), t);
  return static_cast<double>(censor_times.end() - it);
}

double McfEstimate::covariance_at(double t, double t_prime) const {
  const auto& knots = mcf.knots;
  auto row = std::upper_bound(knots.begin(), knots.end(), t) - knots.begin();
  auto col = std::upper_bound(knots.begin(), knots.end(), t_prime) - knots.begin();
  if (row == 0 || col == 0) return 0.0;
  return covariance[row - 1][col - 1];
}

namespace {

// Pooled per-knot tabulation shared by the estimate and covariance paths.
struct PooledTabs {
  std::vector<double> knots;
  std::vector<double> events;     // d.(t_k)
  std::vector<double> at_risk;    // delta.(t_k)
  std::vector<double> increment;  // d.(t_k) / delta.(t_k)
};

PooledTabs tabulate_sorted(const std::vector<double>& all, const std::vector<double>& censor_sorted) {
  PooledTabs tabs;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    tabs.knots.push_back(all[i]);
    tabs.events.push_back(static_cast<double>(j - i));
    i = j;
  }
  tabs.at_risk.resize(tabs.knots.size());
  tabs.increment.resize(tabs.knots.size());
  std::size_t censored = 0;  // censor times below the current knot
  for (std::size_t k = 0; k < tabs.knots.size(); ++k) {
    while (censored < censor_sorted.size() && censor_sorted[censored] < tabs.knots[k]) ++censored;
    tabs.at_risk[k] = static_cast<double>(censor_sorted.size() - censored);
    tabs.increment[k] = tabs.events[k] / tabs.at_risk[k];
  }
  return tabs;
}

PooledTabs tabulate(const RecordRefs& records, const std::vector<double>& censor_sorted) {
  std::vector<double> all;
  for (const auto* rec : records) {
    all.insert(all.end(), rec->failure_times.begin(), rec->failure_times.end());
  }
  std::sort(all.begin(), all.end());
  return tabulate_sorted(all, censor_sorted);
}

// Event count of one record at each pooled knot; sparse walk over its times.
template <class Fn>
void for_each_knot_event_count(const SystemRecord& rec, const std::vector<double>& knots, Fn fn) {
  std::size_t e = 0;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    double count = 0;
    while (e < rec.failure_times.size() && rec.failure_times[e] == knots[k]) {
      ++count;
      ++e;
    }
    fn(k, count);
  }
}

}  // namespace

McfEstimate mcf_from_sorted(std::vector<double> event_times_sorted,
                            std::vector<double> censor_times_sorted) {
  McfEstimate est;
  est.n_systems = censor_times_sorted.size();
  est.censor_times = std::move(censor_times_sorted);
  if (est.n_systems == 0) return est;

  PooledTabs tabs = tabulate_sorted(event_times_sorted, est.censor_times);
  const std::size_t k_total = tabs.knots.size();
  est.mcf.knots = std::move(tabs.knots);
  est.event_counts = std::move(tabs.events);
  est.at_risk = std::move(tabs.at_risk);
  est.mcf.values.resize(k_total);
  double cum = 0;
  for (std::size_t k = 0; k < k_total; ++k) {
    cum += tabs.increment[k];
    est.mcf.values[k] = cum;
  }
  return est;
}

McfEstimate local_mcf(const RecordRefs& records) {
  std::vector<double> all;
  std::vector<double> censor;
  censor.reserve(records.size());
  for (const auto* rec : records) {
    all.insert(all.end(), rec->failure_times.begin(), rec->failure_times.end());
    censor.push_back(rec->censor_time);
  }
  std::sort(all.begin(), all.end());
  std::sort(censor.begin(), censor.end());

  McfEstimate est = mcf_from_sorted(std::move(all), std::move(censor));
  est.n_systems = records.size();
  if (records.empty()) return est;

  const std::size_t k_total = est.mcf.knots.size();
  std::vector<double> increment(k_total);
  for (std::size_t k = 0; k < k_total; ++k) increment[k] = est.event_counts[k] / est.at_risk[k];

  // Var(mcf(t_j)) = sum_i [ sum_{k<=j, system at risk} (d_i(t_k) - dbar(t_k)) / delta.(t_k) ]^2
  est.variance.knots = est.mcf.knots;
  est.variance.values.assign(k_total, 0.0);
  for (const auto* rec : records) {
    double cum_dev = 0;
    for_each_knot_event_count(*rec, est.mcf.knots, [&](std::size_t k, double d_ik) {
      if (est.mcf.knots[k] <= rec->censor_time) {
        cum_dev += (d_ik - increment[k]) / est.at_risk[k];
      }
      est.variance.values[k] += cum_dev * cum_dev;
    });
  }
  return est;
}

std::vector<std::vector<double>> mcf_covariance(const RecordRefs& records) {
  std::vector<double> censor_sorted;
  censor_sorted.reserve(records.size());
  for (const auto* rec : records) censor_sorted.push_back(rec->censor_time);
  std::sort(censor_sorted.begin(), censor_sorted.end());
  PooledTabs tabs = tabulate(records, censor_sorted);
  const std::size_t k_total = tabs.knots.size();

  // Per-increment covariance: diagonal from the at-risk-weighted spread of
  // event counts, off-diagonal from later-time deviations against earlier
  // event counts, each divided by the at-risk count at the earlier knot.
  std::vector<std::vector<double>> inc(k_total, std::vector<double>(k_total, 0.0));
  for (const auto* rec : records) {
    std::vector<std::size_t> event_knots;
    std::vector<double> event_counts;
    for_each_knot_event_count(*rec, tabs.knots, [&](std::size_t k, double d_ik) {
      if (tabs.knots[k] > rec->censor_time) return;
      const double dev = d_ik - tabs.increment[k];
      inc[k][k] += dev * dev / (tabs.at_risk[k] * tabs.at_risk[k]);
      // pair this knot's deviation with the record's earlier event counts
      for (std::size_t e = 0; e < event_knots.size(); ++e) {
        const std::size_t ke = event_knots[e];
        const double v = dev * event_counts[e] / (tabs.at_risk[k] * tabs.at_risk[ke]);
        inc[ke][k] += v;
        inc[k][ke] += v;
      }
      if (d_ik > 0) {
        event_knots.push_back(k);
        event_counts.push_back(d_ik);
      }
    });
  }

  // Cov(mcf(t_j), mcf(t_p)) sums inc over k <= j, k' <= p.
  std::vector<std::vector<double>> cov(k_total, std::vector<double>(k_total, 0.0));
  for (std::size_t j = 0; j < k_total; ++j) {
    for (std::size_t p = 0; p < k_total; ++p) {
      double v = inc[j][p];
      if (j > 0) v += cov[j - 1][p];
      if (p > 0) v += cov[j][p - 1];
      if (j > 0 && p > 0) v -= cov[j - 1][p - 1];
      cov[j][p] = v;
    }
  }
  return cov;
}

void add_covariance(McfEstimate& est, const RecordRefs& records) {
  est.covariance = mcf_covariance(records);
}

McfEstimate merge_mcf(const std::vector<McfEstimate>& locals, bool weighted) {
  if (locals.empty()) throw std::invalid_argument("merge_mcf needs at least one estimate");
  const double W = static_cast<double>(locals.size());

  McfEstimate merged;
  std::vector<double> knots;
  for (const auto& est : locals) {
    knots.insert(knots.end(), est.mcf.knots.begin(), est.mcf.knots.end());
    merged.censor_times.insert(merged.censor_times.end(), est.censor_times.begin(),
                               est.censor_times.end());
    merged.n_systems += est.n_systems;
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::sort(merged.censor_times.begin(), merged.censor_times.end());

  const std::size_t k_total = knots.size();
  merged.mcf.knots = knots;
  merged.variance.knots = knots;
  merged.mcf.values.assign(k_total, 0.0);
  merged.variance.values.assign(k_total, 0.0);
  merged.event_counts.assign(k_total, 0.0);
  merged.at_risk.assign(k_total, 0.0);

  for (std::size_t k = 0; k < k_total; ++k) {
    const double t = knots[k];
    for (const auto& est : locals) {
      auto it = std::lower_bound(est.mcf.knots.begin(), est.mcf.knots.end(), t);
      if (it != est.mcf.knots.end() && *it == t) {
        merged.event_counts[k] += est.event_counts[it - est.mcf.knots.begin()];
      }
      merged.at_risk[k] += est.at_risk_at(t);
    }
  }

  if (weighted) {
    double cum = 0;
    for (std::size_t k = 0; k < k_total; ++k) {
      cum += merged.event_counts[k] / merged.at_risk[k];
      merged.mcf.values[k] = cum;
      double var = 0;
      for (const auto& est : locals) {
        const double share = est.at_risk_at(knots[k]) / merged.at_risk[k];
        var += share * share * est.variance.at(knots[k]);
      }
      merged.variance.values[k] = var;
    }
    bool mergeable_cov = true;
    for (const auto& est : locals) {
      if (!est.mcf.knots.empty() && !est.has_covariance()) mergeable_cov = false;
    }
    if (mergeable_cov) {
      merged.covariance.assign(k_total, std::vector<double>(k_total, 0.0));
      for (std::size_t j = 0; j < k_total; ++j) {
        for (std::size_t p = 0; p < k_total; ++p) {
          double v = 0;
          for (const auto& est : locals) {
            if (!est.has_covariance()) continue;
            const double share_j = est.at_risk_at(knots[j]) / merged.at_risk[j];
            const double share_p = est.at_risk_at(knots[p]) / merged.at_risk[p];
            v += share_j * share_p * est.covariance_at(knots[j], knots[p]);
          }
          merged.covariance[j][p] = v;
        }
      }
    }
    return merged;
  }

  for (std::size_t k = 0; k < k_total; ++k) {
    double value = 0;
    double var = 0;
    for (const auto& est : locals) {
      value += est.mcf.at(knots[k]);
      var += est.variance.at(knots[k]);
    }
    merged.mcf.values[k] = value / W;
    merged.variance.values[k] = var / (W * W);
  }

  // a group without any failure has identically-zero deviations, so its
  // missing matrix contributes nothing and must not block the merge
  bool mergeable_cov = true;
  for (const auto& est : locals) {
    if (!est.mcf.knots.empty() && !est.has_covariance()) mergeable_cov = false;
  }
  if (mergeable_cov) {
    merged.covariance.assign(k_total, std::vector<double>(k_total, 0.0));
    for (std::size_t j = 0; j < k_total; ++j) {
      for (std::size_t p = 0; p < k_total; ++p) {
        double v = 0;
        for (const auto& est : locals) {
          if (est.has_covariance()) v += est.covariance_at(knots[j], knots[p]);
        }
        merged.covariance[j][p] = v / (W * W);
      }
    }
  }
  return merged;
}

}  // namespace rfr
