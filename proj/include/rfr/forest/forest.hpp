#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfr/data/dataset.hpp"
#include "rfr/mcf/estimator.hpp"
#include "rfr/nhpp/model.hpp"

namespace rfr {

enum class TerminalMode { mcf, nhpp };
enum class SplitRule { l2, logrank, intensity };

struct ForestHyper {
  TerminalMode mode = TerminalMode::mcf;
  SplitRule rule = SplitRule::l2;  // forced to intensity when mode is nhpp
  int n_trees = 500;
  int m_try = 0;       // 0 resolves to max(1, p/3)
  int min_failed = 5;  // each daughter needs this many members with a failure
  int cut_grid = 32;   // candidate cuts at k/cut_grid
  double omega = -1;   // < 0: cross-validated once per forest (nhpp mode)
  int grid_points = 64;
  bool logrank_literal = false;
  int max_iterations = 500;
  int threads = 1;

  bool operator==(const ForestHyper&) const = default;
};

struct TreeNode {
  int covariate = -1;  // -1 marks a terminal
  double cut = 0;
  int left = -1;
  int right = -1;
  int member_count = 0;  // bootstrap instances reaching the node
  int failed_count = 0;  // of which with at least one failure
  std::optional<McfEstimate> mcf_payload;
  std::optional<IntensityModel> nhpp_payload;

  bool terminal() const { return covariate < 0; }
};

struct TreeModel {
  std::vector<TreeNode> nodes;             // nodes[0] is the root
  std::vector<std::string> bootstrap_ids;  // sampled system ids in draw order
};

struct ForestModel {
  int version = 1;
  ForestHyper hyper;
  std::uint64_t seed = 0;
  double omega_used = 0;
  std::vector<std::string> system_ids;  // training order
  std::vector<std::string> covariate_names;
  ScalingParams scaling;  // static-covariate scaling applied before fitting
  std::vector<TreeModel> trees;
  std::vector<std::vector<std::uint8_t>> membership;  // [b][i] = 1 iff i out of bag
};

int default_m_try(int p);

// Fits on data whose static covariates already lie in [0,1]; throws DataError
// otherwise. Identical data, hyperparameters and seed give an identical
// forest.
ForestModel fit_forest(const RecurrenceDataset& data, const ForestHyper& hyper,
                       std::uint64_t seed);

const TreeNode& route_to_terminal(const TreeModel& tree, const std::vector<double>& x);

// ensemble mean of terminal MCF curves at (x, t)
double predict_mcf_value(const ForestModel& forest, const std::vector<double>& x, double t);

// ensemble mean cumulative hazard at t along the record's own channel paths
double predict_hazard_value(const ForestModel& forest, const SystemRecord& rec, double t);

// out-of-bag ensemble prediction for training system i; NaN when the system
// is in-bag everywhere
double oob_prediction(const ForestModel& forest, const RecurrenceDataset& data, int i, double t);

// all-pairs concordance with half credit for ties on either axis
double c_index(const std::vector<double>& predicted, const std::vector<double>& observed);

// nearest-rank upper quantile of the censor times
double censor_quantile(const RecurrenceDataset& data, double quantile = 0.9);

// Out-of-bag concordance at the 0.9 censor quantile: observed raw failure
// counts against out-of-bag ensemble predictions. Systems never out of bag
// are skipped.
double oob_c_index(const ForestModel& forest, const RecurrenceDataset& data);

struct ImportanceReport {
  std::vector<std::string> names;
  std::vector<double> importance;
  double baseline = 0;  // unpermuted out-of-bag concordance
};

// mean drop in out-of-bag concordance over seeded permutations of each static
// covariate column; covariates no tree splits on come out exactly 0
ImportanceReport permutation_importance(const ForestModel& forest, const RecurrenceDataset& data,
                                        int repeats, std::uint64_t seed);

}  // namespace rfr
