#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rfr/forest/forest.hpp"
#include "rfr/forest/serialize.hpp"
#include "rfr/sim/generators.hpp"
#include "rfr/util/rng.hpp"

using namespace rfr;

namespace {

// two clearly separated failure-rate groups keyed on x1
RecurrenceDataset two_group_data(int n_per_group, double slow_rate, double fast_rate,
                                 std::uint64_t seed, int extra_covariates = 2) {
  RecurrenceDataset data;
  data.covariate_names.push_back("x1");
  for (int j = 0; j < extra_covariates; ++j) {
    data.covariate_names.push_back("x" + std::to_string(j + 2));
  }
  Rng rng(seed);
  for (int g = 0; g < 2; ++g) {
    for (int i = 0; i < n_per_group; ++i) {
      SystemRecord rec;
      rec.id = (g == 0 ? "slow" : "fast") + std::to_string(i);
      rec.censor_time = 100.0;
      rec.static_covariates.push_back(g == 0 ? 0.1 + 0.2 * rng.uniform()
                                             : 0.7 + 0.2 * rng.uniform());
      for (int j = 0; j < extra_covariates; ++j) rec.static_covariates.push_back(rng.uniform());
      rec.failure_times = gen_hpp(g == 0 ? slow_rate : fast_rate, 100.0, rng);
      data.systems.push_back(std::move(rec));
    }
  }
  return data;
}

int count_terminals(const TreeModel& tree) {
  int c = 0;
  for (const auto& node : tree.nodes) c += node.terminal();
  return c;
}

}  // namespace

TEST_CASE("default m_try is p/3 clamped to one") {
  CHECK(default_m_try(10) == 3);
  CHECK(default_m_try(3) == 1);
  CHECK(default_m_try(2) == 1);
  CHECK(default_m_try(1) == 1);
}

TEST_CASE("homogeneous covariates leave the root terminal") {
  RecurrenceDataset data;
  data.covariate_names = {"x1"};
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    SystemRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.censor_time = 50.0;
    rec.static_covariates = {0.4};  // no candidate separates
    rec.failure_times = gen_hpp(0.2, 50.0, rng);
    data.systems.push_back(std::move(rec));
  }
  ForestHyper hyper;
  hyper.n_trees = 3;
  hyper.min_failed = 2;
  auto forest = fit_forest(data, hyper, 17);
  for (const auto& tree : forest.trees) {
    CHECK(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].terminal());
    REQUIRE(tree.nodes[0].mcf_payload.has_value());
  }
}

TEST_CASE("a cleanly separating covariate is chosen at the root") {
  auto data = two_group_data(10, 0.02, 0.5, 901);
  ForestHyper hyper;
  hyper.n_trees = 8;
  hyper.min_failed = 2;
  hyper.m_try = 3;  // consider every covariate so the gap always competes
  auto forest = fit_forest(data, hyper, 33);
  for (const auto& tree : forest.trees) {
    const auto& root = tree.nodes[0];
    REQUIRE_FALSE(root.terminal());
    CHECK(root.covariate == 0);
    // ties break toward the lowest cut, so the winner is the first grid
    // point that clears the slow group's bootstrap support
    CHECK(root.cut > 0.15);
    CHECK(root.cut < 0.45);
  }
}

TEST_CASE("forests are deterministic in their seed") {
  auto data = two_group_data(8, 0.05, 0.3, 77);
  ForestHyper hyper;
  hyper.n_trees = 5;
  hyper.min_failed = 2;
  auto f1 = fit_forest(data, hyper, 123);
  auto f2 = fit_forest(data, hyper, 123);
  CHECK(forest_to_json(f1) == forest_to_json(f2));
  auto f3 = fit_forest(data, hyper, 124);
  CHECK(forest_to_json(f1) != forest_to_json(f3));
}

TEST_CASE("thread count does not change the fitted forest") {
  auto data = two_group_data(8, 0.05, 0.3, 78);
  ForestHyper hyper;
  hyper.n_trees = 6;
  hyper.min_failed = 2;
  auto serial = fit_forest(data, hyper, 5);
  hyper.threads = 3;
  auto threaded = fit_forest(data, hyper, 5);
  threaded.hyper.threads = 1;
  serial.hyper.threads = 1;
  CHECK(forest_to_json(serial) == forest_to_json(threaded));
}

TEST_CASE("single root-terminal tree reproduces the pooled bootstrap curve") {
  auto data = two_group_data(6, 0.1, 0.1, 404);
  ForestHyper hyper;
  hyper.n_trees = 1;
  hyper.min_failed = 1000;  // unreachable: root stays terminal
  auto forest = fit_forest(data, hyper, 9);
  const auto& tree = forest.trees[0];
  REQUIRE(tree.nodes.size() == 1);

  // rebuild the bootstrap multiset and compare against the direct estimate
  RecordRefs refs;
  for (const auto& id : tree.bootstrap_ids) {
    for (const auto& rec : data.systems) {
      if (rec.id == id) refs.push_back(&rec);
    }
  }
  auto direct = local_mcf(refs);
  const auto& payload = *tree.nodes[0].mcf_payload;
  REQUIRE(payload.mcf.knots == direct.mcf.knots);
  CHECK(payload.mcf.values == direct.mcf.values);
  CHECK(payload.variance.values == direct.variance.values);

  for (double t : {5.0, 20.0, 80.0}) {
    CHECK(predict_mcf_value(forest, {0.5, 0.5, 0.5}, t) == direct.mcf.at(t));
  }
}

TEST_CASE("ensemble prediction is the mean of per-tree terminal values") {
  auto data = two_group_data(8, 0.05, 0.4, 11);
  ForestHyper hyper;
  hyper.n_trees = 7;
  hyper.min_failed = 2;
  auto forest = fit_forest(data, hyper, 21);
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
    const double t = rng.uniform() * 100.0;
    double total = 0;
    for (const auto& tree : forest.trees) {
      total += route_to_terminal(tree, x).mcf_payload->mcf.at(t);
    }
    CHECK(predict_mcf_value(forest, x, t) == total / 7.0);
  }
}

TEST_CASE("every x routes to exactly one terminal") {
  auto data = two_group_data(10, 0.05, 0.4, 5150);
  ForestHyper hyper;
  hyper.n_trees = 10;
  hyper.min_failed = 2;
  auto forest = fit_forest(data, hyper, 2);
  Rng rng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
    const auto& tree = forest.trees[trial % forest.trees.size()];
    const TreeNode& node = route_to_terminal(tree, x);
    CHECK(node.terminal());
  }
  for (const auto& tree : forest.trees) {
    CHECK(count_terminals(tree) == (static_cast<int>(tree.nodes.size()) + 1) / 2);
  }
}

TEST_CASE("bootstrap membership marks exactly the undrawn systems") {
  auto data = two_group_data(100, 0.05, 0.3, 31);
  ForestHyper hyper;
  hyper.n_trees = 150;
  hyper.min_failed = 5;
  auto forest = fit_forest(data, hyper, 8);

  double oob_total = 0;
  for (std::size_t b = 0; b < forest.trees.size(); ++b) {
    std::set<std::string> in_bag(forest.trees[b].bootstrap_ids.begin(),
                                 forest.trees[b].bootstrap_ids.end());
    for (int i = 0; i < data.n(); ++i) {
      const bool oob = !in_bag.count(data.systems[i].id);
      CHECK(static_cast<bool>(forest.membership[b][i]) == oob);
      oob_total += oob;
    }
  }
  const double frac = oob_total / (forest.trees.size() * data.n());
  CHECK(std::abs(frac - std::exp(-1.0)) < 0.015);  // (1 - 1/n)^n for n=200
}

TEST_CASE("out-of-bag predictions average only the holding trees") {
  auto data = two_group_data(10, 0.05, 0.4, 61);
  ForestHyper hyper;
  hyper.n_trees = 12;
  hyper.min_failed = 2;
  auto forest = fit_forest(data, hyper, 3);
  const double t = 40.0;

  SUBCASE("single holding tree equals that tree's prediction") {
    ForestModel tampered = forest;
    for (auto& row : tampered.membership) row.assign(data.n(), 0);
    tampered.membership[4][2] = 1;
    const double expect =
        route_to_terminal(forest.trees[4], data.systems[2].static_covariates)
            .mcf_payload->mcf.at(t);
    CHECK(oob_prediction(tampered, data, 2, t) == expect);
    CHECK(std::isnan(oob_prediction(tampered, data, 3, t)));
  }
  SUBCASE("all-ones row equals the full ensemble prediction") {
    ForestModel tampered = forest;
    tampered.membership[0].assign(data.n(), 1);
    for (std::size_t b = 1; b < tampered.membership.size(); ++b) {
      tampered.membership[b].assign(data.n(), 1);
    }
    CHECK(oob_prediction(tampered, data, 0, t) ==
          doctest::Approx(predict_mcf_value(forest, data.systems[0].static_covariates, t))
              .epsilon(1e-15));
  }
}

TEST_CASE("concordance index") {
  SUBCASE("perfect and reversed orderings") {
    CHECK(c_index({1, 2, 3, 4}, {10, 20, 30, 40}) == 1.0);
    CHECK(c_index({4, 3, 2, 1}, {10, 20, 30, 40}) == 0.0);
    CHECK(c_index({1, 1, 1}, {1, 2, 3}) == 0.5);
  }
  SUBCASE("matches the pairwise oracle exactly") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(12));
      std::vector<double> pred(n), obs(n);
      for (int i = 0; i < n; ++i) {
        pred[i] = rng.below(6);  // coarse values force ties
        obs[i] = rng.below(4);
      }
      CHECK(c_index(pred, obs) == oracle::c_index(pred, obs));
    }
  }
  SUBCASE("random scores hover near one half") {
    Rng rng(9);
    std::vector<double> pred(1000), obs(1000);
    for (int i = 0; i < 1000; ++i) {
      pred[i] = rng.uniform();
      obs[i] = rng.uniform();
    }
    CHECK(std::abs(c_index(pred, obs) - 0.5) < 0.05);
  }
  SUBCASE("fewer than two systems is a rejection") {
    CHECK_THROWS_AS(c_index({1.0}, {1.0}), std::invalid_argument);
  }
}

TEST_CASE("censor quantile uses the nearest rank") {
  RecurrenceDataset data;
  data.covariate_names = {};
  for (int i = 1; i <= 10; ++i) {
    SystemRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.censor_time = i;
    data.systems.push_back(std::move(rec));
  }
  CHECK(censor_quantile(data, 0.9) == 9.0);
  CHECK(censor_quantile(data, 0.5) == 5.0);
  CHECK(censor_quantile(data, 1.0) == 10.0);
  data.systems.resize(4);
  CHECK(censor_quantile(data, 0.9) == 4.0);
}

TEST_CASE("oob concordance on separated groups sits well above chance") {
  auto data = two_group_data(25, 0.02, 0.4, 414);
  ForestHyper hyper;
  hyper.n_trees = 30;
  hyper.min_failed = 3;
  hyper.m_try = 3;
  auto forest = fit_forest(data, hyper, 10);
  const double cidx = oob_c_index(forest, data);
  // within-group pairs are unorderable noise that averages 0.5, so with
  // equal groups even a perfect separator caps near 0.75; 0.7 leaves the
  // null at 0.5 far behind without riding the cap
  CHECK(cidx > 0.7);
  CHECK(cidx <= 1.0);
}

TEST_CASE("permutation importance is exactly zero for unused covariates") {
  // x2 and x3 are constant, so no split can use them
  RecurrenceDataset data;
  data.covariate_names = {"x1", "x2", "x3"};
  Rng rng(2718);
  for (int i = 0; i < 40; ++i) {
    SystemRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.censor_time = 100.0;
    const bool fast = i % 2 == 0;
    rec.static_covariates = {fast ? 0.8 : 0.2, 0.5, 0.5};
    rec.failure_times = gen_hpp(fast ? 0.35 : 0.03, 100.0, rng);
    data.systems.push_back(std::move(rec));
  }
  ForestHyper hyper;
  hyper.n_trees = 20;
  hyper.min_failed = 3;
  auto forest = fit_forest(data, hyper, 6);
  auto report = permutation_importance(forest, data, 5, 777);
  REQUIRE(report.importance.size() == 3);
  CHECK(report.importance[0] > 0.0);
  CHECK(report.importance[1] == 0.0);
  CHECK(report.importance[2] == 0.0);
  CHECK(report.baseline > 0.7);

  SUBCASE("repeated calls are deterministic") {
    auto again = permutation_importance(forest, data, 5, 777);
    CHECK(again.importance == report.importance);
  }
}

TEST_CASE("nhpp forests fit, predict hazards, and reject curve queries") {
  SimConfig cfg;
  cfg.scenario = 'C';
  cfg.n = 40;
  cfg.seed = 2;
  auto data = build_dataset(cfg);
  ForestHyper hyper;
  hyper.mode = TerminalMode::nhpp;
  hyper.n_trees = 4;
  hyper.min_failed = 4;
  hyper.omega = 0.01;  // fixed penalty keeps the test quick
  auto forest = fit_forest(data, hyper, 44);
  CHECK(forest.hyper.rule == SplitRule::intensity);
  CHECK(forest.omega_used == 0.01);

  const auto& rec = data.systems[0];
  const double h50 = predict_hazard_value(forest, rec, 50.0);
  const double h100 = predict_hazard_value(forest, rec, 100.0);
  CHECK(h50 > 0.0);
  CHECK(h100 >= h50);
  CHECK_THROWS_AS(predict_mcf_value(forest, rec.static_covariates, 50.0), std::invalid_argument);

  ForestHyper mcf_hyper;
  auto mcf_forest = fit_forest(two_group_data(6, 0.1, 0.2, 1), mcf_hyper, 1);
  CHECK_THROWS_AS(predict_hazard_value(mcf_forest, rec, 50.0), std::invalid_argument);

  SUBCASE("hazard-mode out-of-bag concordance is well defined") {
    const double cidx = oob_c_index(forest, data);
    CHECK(cidx >= 0.0);
    CHECK(cidx <= 1.0);
  }
}

TEST_CASE("mode and rule combinations are validated") {
  auto data = two_group_data(6, 0.1, 0.2, 3);
  ForestHyper hyper;
  hyper.rule = SplitRule::intensity;
  CHECK_THROWS_AS(fit_forest(data, hyper, 1), std::invalid_argument);
  hyper = {};
  hyper.n_trees = 0;
  CHECK_THROWS_AS(fit_forest(data, hyper, 1), std::invalid_argument);
  hyper = {};
  data.systems[0].static_covariates[0] = 1.5;
  CHECK_THROWS_AS(fit_forest(data, hyper, 1), DataError);
}

TEST_CASE("forest JSON round trip") {
  auto data = two_group_data(8, 0.05, 0.4, 88);
  ForestHyper hyper;
  hyper.n_trees = 5;
  hyper.min_failed = 2;
  auto forest = fit_forest(data, hyper, 55);
  const std::string text = forest_to_json(forest);
  auto loaded = forest_from_json(text);
  CHECK(forest_to_json(loaded) == text);
  CHECK(loaded.membership == forest.membership);
  CHECK(loaded.system_ids == forest.system_ids);
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
    const double t = rng.uniform() * 100.0;
    CHECK(predict_mcf_value(loaded, x, t) == predict_mcf_value(forest, x, t));
  }

  SUBCASE("nhpp payloads survive the round trip") {
    SimConfig cfg;
    cfg.scenario = 'D';
    cfg.n = 30;
    cfg.seed = 6;
    auto dyn = build_dataset(cfg);
    ForestHyper nh;
    nh.mode = TerminalMode::nhpp;
    nh.n_trees = 2;
    nh.min_failed = 4;
    nh.omega = 0.05;
    auto nf = fit_forest(dyn, nh, 7);
    auto reloaded = forest_from_json(forest_to_json(nf));
    CHECK(forest_to_json(reloaded) == forest_to_json(nf));
    CHECK(predict_hazard_value(reloaded, dyn.systems[3], 70.0) ==
          predict_hazard_value(nf, dyn.systems[3], 70.0));
  }
  SUBCASE("missing or wrong version is rejected") {
    CHECK_THROWS_AS(forest_from_json("{}"), DataError);
    CHECK_THROWS_AS(forest_from_json("{\"version\": 3}"), DataError);
    CHECK_THROWS_AS(forest_from_json("not json"), DataError);
  }
}
