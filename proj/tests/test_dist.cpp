#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "rfr/dist/runtime.hpp"
#include "rfr/forest/serialize.hpp"
#include "rfr/sim/generators.hpp"
#include "rfr/split/rules.hpp"
#include "rfr/util/rng.hpp"

using namespace rfr;
using nlohmann::json;

namespace {

RecurrenceDataset sim_data(char scenario, int n, std::uint64_t seed, double horizon = 50.0) {
  SimConfig cfg;
  cfg.scenario = scenario;
  cfg.n = n;
  cfg.p = 3;
  cfg.horizon = horizon;
  cfg.seed = seed;
  return build_dataset(cfg);
}

// message decoder kept in the tests on purpose: it pins the wire schema
StepFunction step_of(const json& j) {
  StepFunction f;
  f.knots = j.at("knots").get<std::vector<double>>();
  f.values = j.at("values").get<std::vector<double>>();
  return f;
}

McfEstimate estimate_of(const json& j) {
  McfEstimate est;
  est.mcf = step_of(j.at("mcf"));
  est.variance = step_of(j.at("variance"));
  est.n_systems = j.at("n_systems").get<std::size_t>();
  est.event_counts = j.at("event_counts").get<std::vector<double>>();
  est.at_risk = j.at("at_risk").get<std::vector<double>>();
  est.censor_times = j.at("censor_times").get<std::vector<double>>();
  if (j.contains("covariance")) {
    est.covariance = j.at("covariance").get<std::vector<std::vector<double>>>();
  }
  return est;
}

std::vector<int> everyone(const RecurrenceDataset& data) {
  std::vector<int> all(data.n());
  for (int i = 0; i < data.n(); ++i) all[i] = i;
  return all;
}

// hand-built shards with known membership, bypassing the shuffle
std::vector<std::unique_ptr<WorkerContext>> hand_workers(
    const RecurrenceDataset& data, const std::vector<std::vector<int>>& memberships) {
  std::vector<std::unique_ptr<WorkerContext>> out;
  for (std::size_t w = 0; w < memberships.size(); ++w) {
    Shard shard;
    shard.worker_id = static_cast<int>(w) + 1;
    shard.system_indices = memberships[w];
    out.push_back(std::make_unique<WorkerContext>(shard, data));
  }
  return out;
}

std::vector<WorkerContext*> raw(const std::vector<std::unique_ptr<WorkerContext>>& workers) {
  std::vector<WorkerContext*> ptrs;
  for (const auto& w : workers) ptrs.push_back(w.get());
  return ptrs;
}

}  // namespace

TEST_CASE("make_workers copies each shard once and covers the dataset") {
  auto data = sim_data('A', 11, 41);
  auto workers = make_workers(data, 3, 7);
  REQUIRE(workers.size() == 3);
  std::vector<int> seen(data.n(), 0);
  int total = 0;
  for (int w = 0; w < 3; ++w) {
    CHECK(workers[w]->worker_id() == w + 1);
    const json d = json::parse(workers[w]->describe());
    CHECK(d.at("systems").get<int>() == workers[w]->size());
    CHECK(d.at("covariates").get<int>() == 3);
    CHECK(d.at("channels").get<int>() == 0);
    total += workers[w]->size();
    for (int g : workers[w]->global_indices()) ++seen[g];
  }
  CHECK(total == data.n());
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("single shard preserves dataset order so instance ids line up") {
  auto data = sim_data('A', 9, 42);
  auto workers = make_workers(data, 1, 5);
  REQUIRE(workers.size() == 1);
  const auto& idx = workers[0]->global_indices();
  for (int i = 0; i < data.n(); ++i) CHECK(idx[i] == i);
}

TEST_CASE("a worker's curve message reproduces the direct estimator bit for bit") {
  auto data = sim_data('A', 12, 43);
  auto workers = make_workers(data, 1, 9);
  const int node = workers[0]->make_scratch_node(everyone(data));

  RecordRefs refs = refs_of(data);
  McfEstimate direct = local_mcf(refs);
  add_covariance(direct, refs);

  const auto msg = estimate_of(json::parse(workers[0]->map_local_mcf(node, true)));
  CHECK(msg.mcf.knots == direct.mcf.knots);
  CHECK(msg.mcf.values == direct.mcf.values);
  CHECK(msg.variance.values == direct.variance.values);
  CHECK(msg.n_systems == direct.n_systems);
  CHECK(msg.event_counts == direct.event_counts);
  CHECK(msg.at_risk == direct.at_risk);
  CHECK(msg.censor_times == direct.censor_times);
  CHECK(msg.covariance == direct.covariance);
}

TEST_CASE("a candidate message carries both daughter curves, empty side included") {
  auto data = sim_data('A', 10, 44);
  auto workers = make_workers(data, 1, 9);
  const int node = workers[0]->make_scratch_node(everyone(data));

  // every x1 value is below 2, so the right side is empty
  const json m = json::parse(workers[0]->map_local_mcf(node, 0, 2.0, false));
  const auto left = estimate_of(m.at("left"));
  const auto right = estimate_of(m.at("right"));
  CHECK(left.n_systems == static_cast<std::size_t>(data.n()));
  CHECK(right.n_systems == 0);
  CHECK(right.mcf.knots.empty());

  const auto whole = estimate_of(json::parse(workers[0]->map_local_mcf(node, false)));
  CHECK(left.mcf.knots == whole.mcf.knots);
  CHECK(left.mcf.values == whole.mcf.values);
}

TEST_CASE("two shards assemble the pooled curve through the weighted merge") {
  auto data = sim_data('A', 9, 45);
  auto workers = hand_workers(data, {{0, 1, 2, 3}, {4, 5, 6, 7, 8}});
  std::vector<McfEstimate> locals;
  for (const auto& w : workers) {
    const int node = w->make_scratch_node(everyone(data));
    locals.push_back(estimate_of(json::parse(w->map_local_mcf(node, false))));
  }
  const McfEstimate merged = reduce_merge(locals, true);

  RecordRefs refs = refs_of(data);
  const McfEstimate pooled = local_mcf(refs);
  REQUIRE(merged.mcf.knots == pooled.mcf.knots);
  for (std::size_t j = 0; j < merged.mcf.knots.size(); ++j) {
    CHECK(merged.mcf.values[j] == doctest::Approx(pooled.mcf.values[j]).epsilon(1e-12));
    CHECK(merged.mcf.values[j] ==
          doctest::Approx(oracle::mcf_at(refs, merged.mcf.knots[j])).epsilon(1e-12));
  }
}

TEST_CASE("reduce_merge skips memberless locals and throws when all are") {
  auto data = sim_data('A', 8, 46);
  auto workers = make_workers(data, 1, 3);
  const int node = workers[0]->make_scratch_node(everyone(data));
  const auto full = estimate_of(json::parse(workers[0]->map_local_mcf(node, false)));

  McfEstimate empty;  // a worker holding none of the node's systems
  const auto merged = reduce_merge({empty, full, empty}, false);
  CHECK(merged.mcf.knots == full.mcf.knots);
  CHECK(merged.mcf.values == full.mcf.values);
  CHECK(merged.variance.values == full.variance.values);

  CHECK_THROWS_AS(reduce_merge({empty, empty}, false), std::invalid_argument);
}

TEST_CASE("unweighted reduce_merge averages the shard curves") {
  auto data = sim_data('A', 10, 47);
  std::vector<std::vector<int>> memberships = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
  auto workers = hand_workers(data, memberships);
  std::vector<McfEstimate> locals;
  std::vector<RecordRefs> groups;
  for (std::size_t w = 0; w < workers.size(); ++w) {
    const int node = workers[w]->make_scratch_node(everyone(data));
    locals.push_back(estimate_of(json::parse(workers[w]->map_local_mcf(node, false))));
    RecordRefs grp;
    for (int g : memberships[w]) grp.push_back(&data.systems[g]);
    groups.push_back(std::move(grp));
  }
  const auto merged = reduce_merge(locals, false);
  for (std::size_t j = 0; j < merged.mcf.knots.size(); ++j) {
    CHECK(merged.mcf.values[j] ==
          doctest::Approx(oracle::merged_at(groups, merged.mcf.knots[j])).epsilon(1e-12));
  }
}

TEST_CASE("likelihood messages sum to the pooled objective") {
  auto data = sim_data('C', 12, 48);
  REQUIRE(data.q() == 1);
  std::vector<double> params = {-2.5, 0.3};
  std::vector<double> z_mean = {0.1};
  std::vector<double> z_scale = {0.8};

  RecordRefs refs = refs_of(data);
  SegmentCache pooled(refs);
  const NllPoint want = pooled.eval(params, z_mean, z_scale);

  auto workers = hand_workers(data, {{0, 1, 2, 3, 4, 5}, {6, 7, 8, 9, 10, 11}});
  NllPoint got;
  got.gradient.assign(params.size(), 0.0);
  for (const auto& w : workers) {
    const int node = w->make_scratch_node(everyone(data));
    const json m = json::parse(w->map_local_likelihood(node, params, z_mean, z_scale));
    got.value += m.at("value").get<double>();
    const auto grad = m.at("gradient").get<std::vector<double>>();
    REQUIRE(grad.size() == params.size());
    for (std::size_t k = 0; k < grad.size(); ++k) got.gradient[k] += grad[k];
  }
  CHECK(got.value == doctest::Approx(want.value).epsilon(1e-12));
  for (std::size_t k = 0; k < params.size(); ++k) {
    CHECK(got.gradient[k] == doctest::Approx(want.gradient[k]).epsilon(1e-12));
  }
}

TEST_CASE("an empty scratch node contributes an exactly-zero likelihood") {
  auto data = sim_data('C', 6, 49);
  auto workers = hand_workers(data, {{0, 1, 2}, {3, 4, 5}});
  // systems owned entirely by the other worker
  const int node = workers[0]->make_scratch_node({3, 4, 5});
  const json m = json::parse(
      workers[0]->map_local_likelihood(node, {-2.0, 0.1}, {0.0}, {1.0}));
  CHECK(m.at("value").get<double>() == 0.0);
  const auto grad = m.at("gradient").get<std::vector<double>>();
  REQUIRE(grad.size() == 2);
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 0.0);

  const json s = json::parse(workers[0]->model_statistics(node));
  CHECK(s.at("events").get<double>() == 0.0);
  CHECK(s.at("exposure").get<double>() == 0.0);
  CHECK(s.at("moments").at("count").get<double>() == 0.0);
}

TEST_CASE("model statistic messages rebuild the pooled standardizers") {
  auto data = sim_data('C', 10, 50);
  RecordRefs refs = refs_of(data);
  SegmentCache pooled(refs);
  const auto want = pooled.moments();

  auto workers = hand_workers(data, {{0, 1, 2}, {3, 4, 5, 6}, {7, 8, 9}});
  double count = 0;
  std::vector<double> sum(data.q(), 0.0);
  std::vector<double> sum_sq(data.q(), 0.0);
  double events = 0;
  double exposure = 0;
  for (const auto& w : workers) {
    const int node = w->make_scratch_node(everyone(data));
    const json s = json::parse(w->model_statistics(node));
    CHECK(s.at("channels").get<int>() == data.q());
    events += s.at("events").get<double>();
    exposure += s.at("exposure").get<double>();
    count += s.at("moments").at("count").get<double>();
    for (int j = 0; j < data.q(); ++j) {
      sum[j] += s.at("moments").at("sum").at(j).get<double>();
      sum_sq[j] += s.at("moments").at("sum_sq").at(j).get<double>();
    }
  }
  CHECK(events == pooled.event_count());
  CHECK(exposure == doctest::Approx(pooled.total_exposure()).epsilon(1e-12));
  CHECK(count == want.count);
  for (int j = 0; j < data.q(); ++j) {
    CHECK(sum[j] == doctest::Approx(want.sum[j]).epsilon(1e-12));
    CHECK(sum_sq[j] == doctest::Approx(want.sum_sq[j]).epsilon(1e-12));
  }
}

TEST_CASE("worker node handles stay in lockstep across shards") {
  auto data = sim_data('A', 12, 51);
  auto workers = make_workers(data, 3, 13);
  for (const auto& w : workers) {
    const json msg = json::parse(w->begin_tree(0, 99));
    CHECK(msg.at("drawn").size() == static_cast<std::size_t>(w->size()));
    for (const auto& g : msg.at("drawn")) {
      // draws stay within the worker's own shard
      const auto& own = w->global_indices();
      CHECK(std::find(own.begin(), own.end(), g.get<int>()) != own.end());
    }
  }
  json first;
  for (std::size_t w = 0; w < workers.size(); ++w) {
    const json m = json::parse(workers[w]->apply_split(0, 0, 0.5));
    if (w == 0) {
      first = m;
      CHECK(m.at("left").get<int>() == 1);
      CHECK(m.at("right").get<int>() == 2);
    } else {
      CHECK(m == first);
    }
  }
}

TEST_CASE("split histograms report one row per cut") {
  auto data = sim_data('A', 10, 52);
  auto workers = make_workers(data, 2, 3);
  for (const auto& w : workers) {
    const int node = w->make_scratch_node(everyone(data));
    const std::vector<double> cuts = {0.25, 0.5, 0.75};
    const json h = json::parse(w->split_histogram(node, 0, cuts));
    REQUIRE(h.at("counts").size() == cuts.size());
    for (const auto& row : h.at("counts")) {
      REQUIRE(row.size() == 4);
      // members on both sides total the worker's node membership
      CHECK(row.at(0).get<int>() + row.at(2).get<int>() == w->size());
    }
  }
}

TEST_CASE("driver split search on one shard matches the in-process decision") {
  auto data = sim_data('A', 20, 53);
  ForestHyper hyper;
  hyper.min_failed = 2;

  auto in_proc = make_in_process_backend(data, hyper, 77);
  auto workers = make_workers(data, 1, 77);
  auto sharded = make_sharded_backend(raw(workers), [&] {
    std::vector<std::string> ids;
    for (const auto& rec : data.systems) ids.push_back(rec.id);
    return ids;
  }(), 77, false);

  std::vector<std::string> ids_a, ids_b;
  std::vector<std::uint8_t> oob_a, oob_b;
  const int root_a = in_proc->start_tree(0, ids_a, oob_a);
  const int root_b = sharded->start_tree(0, ids_b, oob_b);
  REQUIRE(ids_a == ids_b);
  REQUIRE(oob_a == oob_b);

  DriverPlan plan;
  plan.covariates = {0, 1, 2};
  for (int k = 1; k < 8; ++k) plan.cuts.push_back(k / 8.0);
  plan.node = root_a;
  const SplitDecision a = driver_split_search(*in_proc, plan, hyper, -1);
  plan.node = root_b;
  const SplitDecision b = driver_split_search(*sharded, plan, hyper, -1);
  CHECK(a.covariate == b.covariate);
  CHECK(a.cut == b.cut);
  CHECK(a.score == b.score);
}

TEST_CASE("driver split search goes terminal when no candidate qualifies") {
  RecurrenceDataset data;
  data.covariate_names = {"x1"};
  Rng rng(3);
  for (int i = 0; i < 12; ++i) {
    SystemRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.censor_time = 40.0;
    rec.static_covariates = {0.4};  // nothing separates
    rec.failure_times = gen_hpp(0.2, 40.0, rng);
    data.systems.push_back(std::move(rec));
  }
  auto workers = make_workers(data, 2, 5);
  std::vector<std::string> ids;
  for (const auto& rec : data.systems) ids.push_back(rec.id);
  auto backend = make_sharded_backend(raw(workers), ids, 5, false);
  std::vector<std::string> drawn;
  std::vector<std::uint8_t> oob;
  const int root = backend->start_tree(0, drawn, oob);

  ForestHyper hyper;
  hyper.min_failed = 2;
  DriverPlan plan;
  plan.node = root;
  plan.covariates = {0};
  for (int k = 1; k < 8; ++k) plan.cuts.push_back(k / 8.0);
  CHECK_FALSE(driver_split_search(*backend, plan, hyper, -1).found());
}

TEST_CASE("two-shard weighted search agrees with direct dataset arithmetic") {
  auto data = sim_data('A', 18, 54);
  std::vector<std::vector<int>> memberships = {{0, 2, 4, 6, 8, 10, 12, 14, 16},
                                               {1, 3, 5, 7, 9, 11, 13, 15, 17}};
  auto workers = hand_workers(data, memberships);
  std::vector<std::string> ids;
  for (const auto& rec : data.systems) ids.push_back(rec.id);
  auto backend = make_sharded_backend(raw(workers), ids, 11, true);

  // identity-membership scratch root on every worker: handle 0 everywhere
  std::vector<int> handles;
  for (const auto& w : workers) handles.push_back(w->make_scratch_node(everyone(data)));
  REQUIRE(handles[0] == handles[1]);

  ForestHyper hyper;
  hyper.min_failed = 2;
  DriverPlan plan;
  plan.node = handles[0];
  plan.covariates = {0, 1, 2};
  for (int k = 1; k < 8; ++k) plan.cuts.push_back(k / 8.0);
  const SplitDecision got = driver_split_search(*backend, plan, hyper, -1);

  // same search straight off the records: weighted merge equals the pool
  RecordRefs refs = refs_of(data);
  const McfEstimate parent = local_mcf(refs);
  SplitDecision want;
  for (int j : plan.covariates) {
    for (double cut : plan.cuts) {
      RecordRefs left, right;
      for (const auto* rec : refs) {
        (rec->static_covariates[j] <= cut ? left : right).push_back(rec);
      }
      int left_failed = 0, right_failed = 0;
      for (const auto* rec : left) left_failed += !rec->failure_times.empty();
      for (const auto* rec : right) right_failed += !rec->failure_times.empty();
      if (left.empty() || right.empty()) continue;
      if (left_failed < hyper.min_failed || right_failed < hyper.min_failed) continue;
      const double score =
          l2_distance(local_mcf(left), local_mcf(right), parent.pooled_times());
      if (score > want.score) {
        want.score = score;
        want.covariate = j;
        want.cut = cut;
      }
    }
  }
  REQUIRE(want.found());
  CHECK(got.covariate == want.covariate);
  CHECK(got.cut == want.cut);
  CHECK(got.score == doctest::Approx(want.score).epsilon(1e-12));
}

TEST_CASE("four-shard weighted node estimate equals the pooled curve exactly") {
  auto data = sim_data('A', 21, 55);
  auto workers = make_workers(data, 4, 19);
  std::vector<std::string> ids;
  for (const auto& rec : data.systems) ids.push_back(rec.id);
  auto backend = make_sharded_backend(raw(workers), ids, 19, true);
  for (const auto& w : workers) w->make_scratch_node(everyone(data));

  const McfEstimate merged = backend->node_estimate(0, false);
  RecordRefs refs = refs_of(data);
  const McfEstimate pooled = local_mcf(refs);
  CHECK(merged.mcf.knots == pooled.mcf.knots);
  for (std::size_t j = 0; j < merged.mcf.knots.size(); ++j) {
    CHECK(merged.mcf.values[j] == doctest::Approx(pooled.mcf.values[j]).epsilon(1e-12));
  }
  CHECK(merged.n_systems == pooled.n_systems);
}

TEST_CASE("distributed penalty selection matches the local one on a single shard") {
  auto data = sim_data('C', 14, 56, 40.0);
  auto workers = make_workers(data, 1, 23);
  FitConfig cfg;
  const double local = select_omega(refs_of(data), 23, cfg);
  const double dist = select_omega_distributed(raw(workers), 23, cfg);
  CHECK(dist == local);
}

TEST_CASE("one worker reproduces the in-process forest byte for byte") {
  ForestHyper base;
  base.n_trees = 2;
  base.min_failed = 2;
  base.m_try = 3;

  SUBCASE("mcf terminals, L2 rule") {
    auto data = sim_data('A', 16, 57);
    auto want = forest_to_json(fit_forest(data, base, 101));
    auto got = forest_to_json(fit_forest_distributed(data, base, 101, 1));
    CHECK(want == got);
  }
  SUBCASE("mcf terminals, log-rank rule") {
    auto data = sim_data('A', 16, 58);
    ForestHyper hyper = base;
    hyper.rule = SplitRule::logrank;
    auto want = forest_to_json(fit_forest(data, hyper, 102));
    auto got = forest_to_json(fit_forest_distributed(data, hyper, 102, 1));
    CHECK(want == got);
  }
  SUBCASE("nhpp terminals, fixed penalty") {
    auto data = sim_data('C', 14, 59, 40.0);
    ForestHyper hyper = base;
    hyper.mode = TerminalMode::nhpp;
    hyper.omega = 0.02;
    auto want = forest_to_json(fit_forest(data, hyper, 103));
    auto got = forest_to_json(fit_forest_distributed(data, hyper, 103, 1));
    CHECK(want == got);
  }
  SUBCASE("nhpp terminals, cross-validated penalty") {
    auto data = sim_data('C', 14, 60, 40.0);
    ForestHyper hyper = base;
    hyper.mode = TerminalMode::nhpp;
    hyper.omega = -1;
    auto want = forest_to_json(fit_forest(data, hyper, 104));
    auto got = forest_to_json(fit_forest_distributed(data, hyper, 104, 1));
    CHECK(want == got);
  }
}

TEST_CASE("a multi-worker forest grows without touching foreign records") {
  reset_locality_audit();
  auto data = sim_data('A', 18, 61);
  ForestHyper hyper;
  hyper.n_trees = 2;
  hyper.min_failed = 2;
  const auto forest = fit_forest_distributed(data, hyper, 105, 3);
  CHECK(forest.trees.size() == 2);
  CHECK(locality_violations() == 0);

  // positive control: a driver-side read is what the audit counts
  auto workers = make_workers(data, 2, 1);
  (void)workers[0]->records();
  CHECK(locality_violations() == 1);
  reset_locality_audit();
  CHECK(locality_violations() == 0);
}

TEST_CASE("weighted multi-worker forests carry pooled terminal curves") {
  auto data = sim_data('A', 20, 62);
  ForestHyper hyper;
  hyper.n_trees = 2;
  hyper.min_failed = 3;
  const auto forest = fit_forest_distributed(data, hyper, 106, 4, true);
  for (const auto& tree : forest.trees) {
    for (const auto& node : tree.nodes) {
      if (!node.terminal()) continue;
      REQUIRE(node.mcf_payload.has_value());
      const auto& est = *node.mcf_payload;
      // pooled-equivalent merge: event counts are whole bootstrap counts
      for (double d : est.event_counts) CHECK(d == std::floor(d));
      for (std::size_t j = 1; j < est.mcf.values.size(); ++j) {
        CHECK(est.mcf.values[j] >= est.mcf.values[j - 1]);
      }
    }
  }
}
