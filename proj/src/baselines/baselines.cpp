#include "rfr/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rfr/util/parallel.hpp"
#include "rfr/util/rng.hpp"

namespace rfr {

McfEstimate pooled_mcf(const RecordRefs& train) {
  if (train.empty()) throw DataError("pooled baseline needs training systems");
  return local_mcf(train);
}

std::vector<int> k_nearest_indices(const RecordRefs& train, const std::vector<double>& x,
                                   int K) {
  if (K < 1 || K > static_cast<int>(train.size())) {
    throw std::invalid_argument("neighbor count must lie in [1, train size]");
  }
  std::vector<std::pair<double, int>> by_distance;
  by_distance.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& cov = train[i]->static_covariates;
    if (cov.size() != x.size()) throw DataError("covariate dimension mismatch");
    double d2 = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = cov[j] - x[j];
      d2 += diff * diff;
    }
    by_distance.emplace_back(d2, static_cast<int>(i));
  }
  std::sort(by_distance.begin(), by_distance.end());
  std::vector<int> chosen(K);
  for (int k = 0; k < K; ++k) chosen[k] = by_distance[k].second;
  // training order, so K = |train| reproduces the pooled curve bit for bit
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

McfEstimate mcf_k_nearest(const RecordRefs& train, const std::vector<double>& x, int K) {
  RecordRefs neighbors;
  neighbors.reserve(K);
  for (int i : k_nearest_indices(train, x, K)) neighbors.push_back(train[i]);
  return local_mcf(neighbors);
}

namespace {

// statics become constant channels ahead of any real sensor channels
SystemRecord with_static_channels(const SystemRecord& rec, bool with_dynamics) {
  SystemRecord out;
  out.id = rec.id;
  out.failure_times = rec.failure_times;
  out.censor_time = rec.censor_time;
  for (double v : rec.static_covariates) {
    CovariateSeries constant;
    constant.times = {0.0};
    constant.values = {v};
    out.dynamic_covariates.push_back(std::move(constant));
  }
  if (with_dynamics) {
    for (const auto& series : rec.dynamic_covariates) out.dynamic_covariates.push_back(series);
  }
  return out;
}

}  // namespace

IntensityModel fit_loglinear_rate(const RecordRefs& train, bool with_dynamics,
                                  const FitConfig& cfg) {
  if (train.empty()) throw DataError("log-linear baseline needs training systems");
  std::vector<SystemRecord> expanded;
  expanded.reserve(train.size());
  for (const auto* rec : train) expanded.push_back(with_static_channels(*rec, with_dynamics));
  RecordRefs refs;
  refs.reserve(expanded.size());
  for (const auto& rec : expanded) refs.push_back(&rec);
  return fit_intensity(refs, 0.0, nullptr, cfg);
}

double loglinear_cumulative(const IntensityModel& model, const SystemRecord& rec,
                            bool with_dynamics, double t) {
  return cumulative_intensity(model, with_static_channels(rec, with_dynamics), t);
}

std::string method_name(CompareMethod method) {
  switch (method) {
    case CompareMethod::forest: return "rfr";
    case CompareMethod::pooled: return "mcf";
    case CompareMethod::k_nearest: return "mcf-k";
    case CompareMethod::hpp: return "hpp";
    case CompareMethod::nhpp: return "nhpp";
  }
  throw std::invalid_argument("unknown method");
}

ComparisonReport::Summary ComparisonReport::summarize(int method) const {
  std::vector<double> column;
  for (const auto& row : scores) {
    if (!std::isnan(row.at(method))) column.push_back(row[method]);
  }
  Summary s;
  s.n = static_cast<int>(column.size());
  if (column.empty()) {
    s.mean = s.sd = s.q1 = s.median = s.q3 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = std::accumulate(column.begin(), column.end(), 0.0) / s.n;
  double ss = 0;
  for (double v : column) ss += (v - s.mean) * (v - s.mean);
  s.sd = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
  std::sort(column.begin(), column.end());
  auto quantile = [&](double p) {
    const double pos = p * (column.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, column.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return column[lo] * (1 - frac) + column[hi] * frac;
  };
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

std::string ComparisonReport::to_csv() const {
  std::ostringstream out;
  out << "iteration";
  for (const auto& name : methods) out << ',' << name;
  out << '\n';
  out.precision(17);
  for (std::size_t it = 0; it < scores.size(); ++it) {
    out << it;
    for (double v : scores[it]) {
      out << ',';
      if (std::isnan(v)) {
        out << "nan";
      } else {
        out << v;
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string ComparisonReport::summary_json() const {
  nlohmann::json doc;
  doc["methods"] = methods;
  doc["iterations"] = scores.size();
  doc["split"] = split;
  doc["seed"] = seed;
  nlohmann::json all = nlohmann::json::object();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const Summary s = summarize(static_cast<int>(m));
    nlohmann::json entry;
    entry["n"] = s.n;
    if (s.n > 0) {
      entry["mean"] = s.mean;
      entry["sd"] = s.sd;
      entry["q1"] = s.q1;
      entry["median"] = s.median;
      entry["q3"] = s.q3;
    }
    all[methods[m]] = std::move(entry);
  }
  doc["summary"] = std::move(all);
  return doc.dump(2);
}

ComparisonReport cross_validate_compare(const RecurrenceDataset& data, const CompareConfig& cfg,
                                        std::uint64_t seed) {
  if (cfg.methods.empty()) throw std::invalid_argument("nothing to compare");
  if (cfg.iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (!(cfg.split > 0.0 && cfg.split < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  }
  const int n = data.n();
  const int n_train = static_cast<int>(std::floor(cfg.split * n));
  if (n_train < 1 || n_train >= n) {
    throw DataError("split leaves an empty training or testing set");
  }

  ComparisonReport report;
  for (CompareMethod m : cfg.methods) report.methods.push_back(method_name(m));
  report.split = cfg.split;
  report.seed = seed;
  report.scores.assign(cfg.iterations,
                       std::vector<double>(cfg.methods.size(),
                                           std::numeric_limits<double>::quiet_NaN()));

  parallel_for(static_cast<std::size_t>(cfg.iterations), cfg.threads, [&](std::size_t it) {
    const std::uint64_t it_seed = derive_seed(seed, seed_tag::cv_iteration, it);
    Rng rng(it_seed);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    RecurrenceDataset train;
    train.covariate_names = data.covariate_names;
    train.systems.reserve(n_train);
    for (int i = 0; i < n_train; ++i) train.systems.push_back(data.systems[order[i]]);
    std::vector<SystemRecord> test;
    test.reserve(n - n_train);
    for (int i = n_train; i < n; ++i) test.push_back(data.systems[order[i]]);

    const ScalingParams scaling = standardize_covariates(train);
    for (auto& rec : test) scaling.apply(rec);
    const double horizon = censor_quantile(train);

    std::vector<double> observed;
    observed.reserve(test.size());
    for (const auto& rec : test) {
      observed.push_back(static_cast<double>(rec.failures_up_to(horizon)));
    }
    const RecordRefs train_refs = refs_of(train);

    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      std::vector<double> predicted(test.size(), 0.0);
      try {
        switch (cfg.methods[m]) {
          case CompareMethod::forest: {
            const ForestModel forest = fit_forest(train, cfg.forest, it_seed);
            const bool hazard = forest.hyper.mode == TerminalMode::nhpp;
            for (std::size_t i = 0; i < test.size(); ++i) {
              predicted[i] = hazard
                                 ? predict_hazard_value(forest, test[i], horizon)
                                 : predict_mcf_value(forest, test[i].static_covariates, horizon);
            }
            break;
          }
          case CompareMethod::pooled: {
            const McfEstimate est = pooled_mcf(train_refs);
            const double value = est.mcf.at(horizon);
            for (auto& p : predicted) p = value;
            break;
          }
          case CompareMethod::k_nearest: {
            for (std::size_t i = 0; i < test.size(); ++i) {
              const McfEstimate est =
                  mcf_k_nearest(train_refs, test[i].static_covariates, cfg.k_neighbors);
              predicted[i] = est.mcf.at(horizon);
            }
            break;
          }
          case CompareMethod::hpp:
          case CompareMethod::nhpp: {
            const bool dynamics = cfg.methods[m] == CompareMethod::nhpp;
            const IntensityModel model = fit_loglinear_rate(train_refs, dynamics, cfg.fit);
            for (std::size_t i = 0; i < test.size(); ++i) {
              predicted[i] = loglinear_cumulative(model, test[i], dynamics, horizon);
            }
            break;
          }
        }
      } catch (const std::exception&) {
        continue;  // score stays NaN, the iteration survives
      }
      report.scores[it][m] = c_index(predicted, observed);
    }
  });
  return report;
}

}  // namespace rfr
