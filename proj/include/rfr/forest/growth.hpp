#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rfr/forest/forest.hpp"

namespace rfr {

// Node-level statistics a tree grower needs. The in-process implementation
// reads the dataset directly; the sharded one assembles the same numbers from
// per-worker messages. Both must produce bit-identical results for one shard,
// which the tests pin down.
class GrowthBackend {
 public:
  virtual ~GrowthBackend() = default;

  virtual int system_count() const = 0;
  virtual int covariate_count() const = 0;
  virtual int dynamic_channel_count() const = 0;

  // Draws the bootstrap sample for tree b, resets node state and returns the
  // root node handle. Fills the sampled ids (draw order) and the out-of-bag
  // indicator row.
  virtual int start_tree(int b, std::vector<std::string>& bootstrap_ids,
                         std::vector<std::uint8_t>& out_of_bag) = 0;

  virtual int member_count(int node) = 0;
  virtual int failed_count(int node) = 0;
  virtual double max_failure_time(int node) = 0;

  struct CandidateCounts {
    int left_members = 0;
    int right_members = 0;
    int left_failed = 0;
    int right_failed = 0;
  };
  virtual std::vector<CandidateCounts> candidate_counts(int node, int covariate,
                                                        const std::vector<double>& cuts) = 0;

  virtual McfEstimate node_estimate(int node, bool with_covariance) = 0;

  struct DaughterEstimates {
    McfEstimate left;
    McfEstimate right;
  };
  virtual DaughterEstimates daughter_estimates(int node, int covariate, double cut,
                                               bool with_covariance) = 0;

  virtual IntensityModel fit_node_model(int node, double omega, const IntensityModel* warm,
                                        const FitConfig& cfg) = 0;

  struct DaughterModels {
    IntensityModel left;
    IntensityModel right;
    // per-channel mean covariate path of each side on the scoring grid
    std::vector<std::vector<double>> left_path;
    std::vector<std::vector<double>> right_path;
  };
  virtual DaughterModels daughter_models(int node, int covariate, double cut, double omega,
                                         const IntensityModel* warm, const FitConfig& cfg,
                                         const std::vector<double>& grid) = 0;

  virtual std::pair<int, int> apply_split(int node, int covariate, double cut) = 0;
};

struct SplitDecision {
  int covariate = -1;
  double cut = 0;
  double score = 0;

  bool found() const { return covariate >= 0 && score > 0; }
};

// Scores every (covariate, cut) candidate on a node and returns the best, or
// an empty decision when none qualifies. parent_est supplies the scoring
// times for the curve rules; warm seeds the daughter fits for the intensity
// rule. Candidate order fixes ties: lowest covariate, then lowest cut.
SplitDecision search_best_split(GrowthBackend& backend, int node, const ForestHyper& hyper,
                                double omega, const FitConfig& cfg,
                                const std::vector<int>& covariates,
                                const std::vector<double>& cuts, const McfEstimate* parent_est,
                                const IntensityModel* warm);

// Grows one tree depth-first (left daughter first). Node handles come from
// the backend; tree node indices are assigned in creation order so the same
// decisions give the same layout on any backend.
TreeModel grow_tree(GrowthBackend& backend, const ForestHyper& hyper, double omega, int b,
                    std::uint64_t seed, std::vector<std::uint8_t>& out_of_bag);

// Dataset facts a grown forest carries along; kept separate so a driver can
// pass them without touching the records themselves.
struct ForestMeta {
  std::vector<std::string> system_ids;
  std::vector<std::string> covariate_names;
};

// Drives grow_tree over all trees and assembles the model. omega resolution
// (cross-validation when requested) is the caller's job.
ForestModel grow_forest(GrowthBackend& backend, const ForestMeta& meta, const ForestHyper& hyper,
                        double omega, std::uint64_t seed);

std::unique_ptr<GrowthBackend> make_in_process_backend(const RecurrenceDataset& data,
                                                       const ForestHyper& hyper,
                                                       std::uint64_t seed);

// Shared entry validation: hyperparameter sanity, [0,1] covariate scaling,
// and the rule forced to intensity for nhpp terminals.
ForestHyper check_fit_inputs(const RecurrenceDataset& data, const ForestHyper& hyper);

}  // namespace rfr
