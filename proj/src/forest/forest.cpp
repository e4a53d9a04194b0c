#include "rfr/forest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <unordered_map>

#include "rfr/forest/growth.hpp"
#include "rfr/forest/node_state.hpp"
#include "rfr/split/rules.hpp"
#include "rfr/util/parallel.hpp"
#include "rfr/util/rng.hpp"

namespace rfr {

int default_m_try(int p) { return std::max(1, p / 3); }

namespace {

// In-process growth: node membership is a list of bootstrap instances; each
// node keeps its member events and censor times sorted so daughter curves
// come from a stable filter pass instead of a re-sort. The sharded backend
// mirrors this construction order, which is what makes the one-worker case
// bit-identical.
class InProcessBackend final : public GrowthBackend {
 public:
  InProcessBackend(const RecurrenceDataset& data, const ForestHyper& hyper, std::uint64_t seed)
      : data_(data), hyper_(hyper), seed_(seed) {}

  int system_count() const override { return data_.n(); }
  int covariate_count() const override { return data_.p(); }
  int dynamic_channel_count() const override { return data_.q(); }

  int start_tree(int b, std::vector<std::string>& bootstrap_ids,
                 std::vector<std::uint8_t>& out_of_bag) override {
    nodes_.clear();
    instance_sys_.clear();
    const int n = data_.n();
    Rng rng(derive_seed(seed_, seed_tag::bootstrap, static_cast<std::uint64_t>(b), 0));
    out_of_bag.assign(n, 1);
    bootstrap_ids.clear();
    bootstrap_ids.reserve(n);
    for (int i = 0; i < n; ++i) {
      const int sys = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      instance_sys_.push_back(sys);
      bootstrap_ids.push_back(data_.systems[sys].id);
      out_of_bag[sys] = 0;
    }

    detail::NodeState root;
    root.instances.resize(n);
    for (int k = 0; k < n; ++k) root.instances[k] = k;
    detail::fill_sorted_members(root, [this](int inst) -> const SystemRecord& {
      return record_of(inst);
    });
    nodes_.push_back(std::move(root));
    return 0;
  }

  int member_count(int node) override {
    return static_cast<int>(nodes_[node].instances.size());
  }

  int failed_count(int node) override {
    int c = 0;
    for (int inst : nodes_[node].instances) {
      if (!record_of(inst).failure_times.empty()) ++c;
    }
    return c;
  }

  double max_failure_time(int node) override {
    const auto& ev = nodes_[node].events;
    return ev.empty() ? 0.0 : ev.back().first;
  }

  std::vector<CandidateCounts> candidate_counts(int node, int covariate,
                                                const std::vector<double>& cuts) override {
    std::vector<CandidateCounts> counts(cuts.size());
    for (int inst : nodes_[node].instances) {
      const SystemRecord& rec = record_of(inst);
      const double v = rec.static_covariates[covariate];
      const bool failed = !rec.failure_times.empty();
      for (std::size_t c = 0; c < cuts.size(); ++c) {
        if (v <= cuts[c]) {
          ++counts[c].left_members;
          counts[c].left_failed += failed;
        } else {
          ++counts[c].right_members;
          counts[c].right_failed += failed;
        }
      }
    }
    return counts;
  }

  McfEstimate node_estimate(int node, bool with_covariance) override {
    RecordRefs refs = refs_of_node(node);
    McfEstimate est = local_mcf(refs);
    if (with_covariance) add_covariance(est, refs);
    return est;
  }

  DaughterEstimates daughter_estimates(int node, int covariate, double cut,
                                       bool with_covariance) override {
    if (with_covariance) {
      // the log-rank path needs per-record covariance walks anyway
      RecordRefs left, right;
      for (int inst : nodes_[node].instances) {
        const SystemRecord& rec = record_of(inst);
        (rec.static_covariates[covariate] <= cut ? left : right).push_back(&rec);
      }
      DaughterEstimates d;
      d.left = local_mcf(left);
      d.right = local_mcf(right);
      add_covariance(d.left, left);
      add_covariance(d.right, right);
      return d;
    }
    DaughterEstimates d;
    detail::split_curves(nodes_[node], covariate, cut,
                         [this](int inst) -> const SystemRecord& { return record_of(inst); },
                         d.left, d.right);
    return d;
  }

  IntensityModel fit_node_model(int node, double omega, const IntensityModel* warm,
                                const FitConfig& cfg) override {
    RecordRefs refs = refs_of_node(node);
    return fit_intensity(refs, omega, warm, cfg);
  }

  DaughterModels daughter_models(int node, int covariate, double cut, double omega,
                                 const IntensityModel* warm, const FitConfig& cfg,
                                 const std::vector<double>& grid) override {
    RecordRefs left, right;
    for (int inst : nodes_[node].instances) {
      const SystemRecord& rec = record_of(inst);
      (rec.static_covariates[covariate] <= cut ? left : right).push_back(&rec);
    }
    DaughterModels d;
    d.left = fit_intensity(left, omega, warm, cfg);
    d.right = fit_intensity(right, omega, warm, cfg);
    d.left_path = mean_paths(left, grid);
    d.right_path = mean_paths(right, grid);
    return d;
  }

  std::pair<int, int> apply_split(int node, int covariate, double cut) override {
    detail::NodeState left, right;
    detail::split_node(nodes_[node], covariate, cut,
                       [this](int inst) -> const SystemRecord& { return record_of(inst); },
                       left, right);
    const int li = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(left));
    nodes_.push_back(std::move(right));
    return {li, li + 1};
  }

 private:
  const SystemRecord& record_of(int instance) const {
    return data_.systems[instance_sys_[instance]];
  }

  RecordRefs refs_of_node(int node) const {
    RecordRefs refs;
    refs.reserve(nodes_[node].instances.size());
    for (int inst : nodes_[node].instances) refs.push_back(&record_of(inst));
    return refs;
  }

  std::vector<std::vector<double>> mean_paths(const RecordRefs& refs,
                                              const std::vector<double>& grid) const {
    auto sums = sum_covariate_paths(refs, grid);
    const double n = static_cast<double>(refs.size());
    for (auto& channel : sums) {
      for (auto& v : channel) v /= n;
    }
    return sums;
  }

  const RecurrenceDataset& data_;
  const ForestHyper hyper_;
  const std::uint64_t seed_;
  std::vector<int> instance_sys_;
  std::vector<detail::NodeState> nodes_;
};

IntensityModel zero_rate_model(int q) {
  // a bootstrap sample can come up failure-free; the likelihood then has no
  // finite minimizer, so the terminal carries an effectively-zero rate
  IntensityModel m;
  m.beta0 = std::log(std::numeric_limits<double>::min());
  m.beta.assign(q, 0.0);
  m.z_mean.assign(q, 0.0);
  m.z_scale.assign(q, 1.0);
  return m;
}

}  // namespace

std::unique_ptr<GrowthBackend> make_in_process_backend(const RecurrenceDataset& data,
                                                       const ForestHyper& hyper,
                                                       std::uint64_t seed) {
  return std::make_unique<InProcessBackend>(data, hyper, seed);
}

SplitDecision search_best_split(GrowthBackend& backend, int node, const ForestHyper& hyper,
                                double omega, const FitConfig& cfg,
                                const std::vector<int>& covariates,
                                const std::vector<double>& cuts, const McfEstimate* parent_est,
                                const IntensityModel* warm) {
  const bool nhpp = hyper.mode == TerminalMode::nhpp;
  std::vector<double> grid;
  if (nhpp) grid = intensity_grid(backend.max_failure_time(node), hyper.grid_points);

  SplitDecision best;
  for (int j : covariates) {
    const auto counts = backend.candidate_counts(node, j, cuts);
    for (std::size_t c = 0; c < cuts.size(); ++c) {
      const auto& cnt = counts[c];
      if (cnt.left_members == 0 || cnt.right_members == 0) continue;
      if (cnt.left_failed < hyper.min_failed || cnt.right_failed < hyper.min_failed) continue;
      double score = 0;
      if (nhpp) {
        const auto d = backend.daughter_models(node, j, cuts[c], omega, warm, cfg, grid);
        score = intensity_l2_from_curves(intensity_curve(d.left, grid, d.left_path),
                                         intensity_curve(d.right, grid, d.right_path));
      } else if (hyper.rule == SplitRule::logrank) {
        const auto d = backend.daughter_estimates(node, j, cuts[c], true);
        score = logrank_statistic(d.left, d.right, parent_est->pooled_times(),
                                  hyper.logrank_literal)
                    .statistic;
      } else {
        const auto d = backend.daughter_estimates(node, j, cuts[c], false);
        score = l2_distance(d.left, d.right, parent_est->pooled_times());
      }
      // strict improvement keeps the first (lowest covariate, lowest cut) of
      // any tied candidates
      if (score > best.score) {
        best.score = score;
        best.covariate = j;
        best.cut = cuts[c];
      }
    }
  }
  return best;
}

TreeModel grow_tree(GrowthBackend& backend, const ForestHyper& hyper, double omega, int b,
                    std::uint64_t seed, std::vector<std::uint8_t>& out_of_bag) {
  TreeModel tree;
  const int root = backend.start_tree(b, tree.bootstrap_ids, out_of_bag);
  Rng rng(derive_seed(seed, seed_tag::tree, static_cast<std::uint64_t>(b)));
  const int p = backend.covariate_count();
  const int m = hyper.m_try > 0 ? std::min(hyper.m_try, p) : std::min(default_m_try(p), p);
  const bool nhpp = hyper.mode == TerminalMode::nhpp;
  FitConfig fit_cfg;
  fit_cfg.max_iterations = hyper.max_iterations;

  std::vector<double> cuts;
  for (int k = 1; k < hyper.cut_grid; ++k) {
    cuts.push_back(static_cast<double>(k) / hyper.cut_grid);
  }

  struct Pending {
    int backend_node;
    int tree_index;
    std::shared_ptr<const IntensityModel> warm;
  };
  tree.nodes.emplace_back();
  std::vector<Pending> stack{{root, 0, nullptr}};

  while (!stack.empty()) {
    Pending cur = stack.back();
    stack.pop_back();
    const int members = backend.member_count(cur.backend_node);
    const int failed = backend.failed_count(cur.backend_node);

    McfEstimate est;
    std::shared_ptr<const IntensityModel> model;
    if (nhpp) {
      model = failed > 0 ? std::make_shared<const IntensityModel>(backend.fit_node_model(
                               cur.backend_node, omega, cur.warm.get(), fit_cfg))
                         : std::make_shared<const IntensityModel>(
                               zero_rate_model(backend.dynamic_channel_count()));
    } else {
      est = backend.node_estimate(cur.backend_node, false);
    }

    SplitDecision best;
    if (failed >= 2 * hyper.min_failed && m > 0 && p > 0) {
      const auto covs = rng.draw_subset(p, m);
      best = search_best_split(backend, cur.backend_node, hyper, omega, fit_cfg, covs, cuts,
                               nhpp ? nullptr : &est, model.get());
    }

    if (best.found()) {
      const auto [ln, rn] = backend.apply_split(cur.backend_node, best.covariate, best.cut);
      const int li = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& tn = tree.nodes[cur.tree_index];
      tn.covariate = best.covariate;
      tn.cut = best.cut;
      tn.left = li;
      tn.right = li + 1;
      tn.member_count = members;
      tn.failed_count = failed;
      stack.push_back({rn, li + 1, model});
      stack.push_back({ln, li, model});
    } else {
      TreeNode& tn = tree.nodes[cur.tree_index];
      tn.member_count = members;
      tn.failed_count = failed;
      if (nhpp) {
        tn.nhpp_payload = *model;
      } else {
        tn.mcf_payload = std::move(est);
      }
    }
  }
  return tree;
}

ForestModel grow_forest(GrowthBackend& backend, const ForestMeta& meta, const ForestHyper& hyper,
                        double omega, std::uint64_t seed) {
  ForestModel forest;
  forest.hyper = hyper;
  forest.seed = seed;
  forest.omega_used = omega;
  forest.system_ids = meta.system_ids;
  forest.covariate_names = meta.covariate_names;
  forest.trees.resize(hyper.n_trees);
  forest.membership.resize(hyper.n_trees);
  for (int b = 0; b < hyper.n_trees; ++b) {
    forest.trees[b] = grow_tree(backend, hyper, omega, b, seed, forest.membership[b]);
  }
  return forest;
}

namespace {

void check_hyper(const ForestHyper& hyper) {
  if (hyper.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  if (hyper.min_failed < 1) throw std::invalid_argument("min_failed must be at least 1");
  if (hyper.cut_grid < 2) throw std::invalid_argument("cut_grid must be at least 2");
  if (hyper.grid_points < 2) throw std::invalid_argument("grid_points must be at least 2");
  if (hyper.mode == TerminalMode::mcf && hyper.rule == SplitRule::intensity) {
    throw std::invalid_argument("the intensity rule needs nhpp terminals");
  }
}

void check_scaled(const RecurrenceDataset& data) {
  for (const auto& rec : data.systems) {
    for (double x : rec.static_covariates) {
      if (!(x >= 0.0 && x <= 1.0)) {
        throw DataError("system '" + rec.id +
                        "': static covariates must lie in [0,1]; standardize first");
      }
    }
  }
}

}  // namespace

ForestHyper check_fit_inputs(const RecurrenceDataset& data, const ForestHyper& hyper) {
  check_hyper(hyper);
  check_scaled(data);
  ForestHyper resolved = hyper;
  if (resolved.mode == TerminalMode::nhpp) resolved.rule = SplitRule::intensity;
  return resolved;
}

ForestModel fit_forest(const RecurrenceDataset& data, const ForestHyper& hyper,
                       std::uint64_t seed) {
  ForestHyper resolved = check_fit_inputs(data, hyper);

  double omega = resolved.omega;
  if (resolved.mode == TerminalMode::nhpp && omega < 0) {
    FitConfig cfg;
    cfg.max_iterations = resolved.max_iterations;
    omega = select_omega(refs_of(data), derive_seed(seed, seed_tag::fold), cfg);
  }

  ForestMeta meta;
  for (const auto& rec : data.systems) meta.system_ids.push_back(rec.id);
  meta.covariate_names = data.covariate_names;

  if (resolved.threads <= 1) {
    auto backend = make_in_process_backend(data, resolved, seed);
    return grow_forest(*backend, meta, resolved, omega, seed);
  }

  // per-tree streams make results independent of scheduling; each task uses
  // its own backend instance
  ForestModel forest;
  forest.hyper = resolved;
  forest.seed = seed;
  forest.omega_used = omega;
  forest.system_ids = meta.system_ids;
  forest.covariate_names = meta.covariate_names;
  forest.trees.resize(resolved.n_trees);
  forest.membership.resize(resolved.n_trees);
  parallel_for(static_cast<std::size_t>(resolved.n_trees), resolved.threads, [&](std::size_t b) {
    auto backend = make_in_process_backend(data, resolved, seed);
    forest.trees[b] =
        grow_tree(*backend, resolved, omega, static_cast<int>(b), seed, forest.membership[b]);
  });
  return forest;
}

const TreeNode& route_to_terminal(const TreeModel& tree, const std::vector<double>& x) {
  int idx = 0;
  for (;;) {
    const TreeNode& node = tree.nodes[idx];
    if (node.terminal()) return node;
    if (node.covariate >= static_cast<int>(x.size())) {
      throw std::invalid_argument("covariate vector shorter than the tree expects");
    }
    idx = x[node.covariate] <= node.cut ? node.left : node.right;
  }
}

double predict_mcf_value(const ForestModel& forest, const std::vector<double>& x, double t) {
  if (forest.hyper.mode != TerminalMode::mcf) {
    throw std::invalid_argument("curve prediction needs an mcf-mode forest");
  }
  double total = 0;
  for (const auto& tree : forest.trees) {
    total += route_to_terminal(tree, x).mcf_payload->mcf.at(t);
  }
  return total / static_cast<double>(forest.trees.size());
}

double predict_hazard_value(const ForestModel& forest, const SystemRecord& rec, double t) {
  if (forest.hyper.mode != TerminalMode::nhpp) {
    throw std::invalid_argument("hazard prediction needs an nhpp-mode forest");
  }
  double total = 0;
  for (const auto& tree : forest.trees) {
    const TreeNode& node = route_to_terminal(tree, rec.static_covariates);
    total += cumulative_intensity(*node.nhpp_payload, rec, t);
  }
  return total / static_cast<double>(forest.trees.size());
}

double oob_prediction(const ForestModel& forest, const RecurrenceDataset& data, int i, double t) {
  const SystemRecord& rec = data.systems[i];
  double total = 0;
  int used = 0;
  for (std::size_t b = 0; b < forest.trees.size(); ++b) {
    if (!forest.membership[b][i]) continue;
    const TreeNode& node = route_to_terminal(forest.trees[b], rec.static_covariates);
    total += forest.hyper.mode == TerminalMode::mcf
                 ? node.mcf_payload->mcf.at(t)
                 : cumulative_intensity(*node.nhpp_payload, rec, t);
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / used;
}

double c_index(const std::vector<double>& predicted, const std::vector<double>& observed) {
  if (predicted.size() != observed.size()) {
    throw std::invalid_argument("c_index needs matching score vectors");
  }
  const std::size_t n = predicted.size();
  if (n < 2) throw std::invalid_argument("c_index needs at least two systems");
  double credit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (predicted[i] == predicted[j] || observed[i] == observed[j]) {
        credit += 0.5;
      } else if ((predicted[i] < predicted[j]) == (observed[i] < observed[j])) {
        credit += 1.0;
      }
    }
  }
  return credit / (static_cast<double>(n) * (n - 1) / 2.0);
}

double censor_quantile(const RecurrenceDataset& data, double quantile) {
  if (data.systems.empty()) throw std::invalid_argument("censor_quantile needs systems");
  std::vector<double> censor;
  censor.reserve(data.systems.size());
  for (const auto& rec : data.systems) censor.push_back(rec.censor_time);
  std::sort(censor.begin(), censor.end());
  const auto n = censor.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return censor[rank - 1];
}

namespace {

struct OobScores {
  std::vector<double> predicted;
  std::vector<double> observed;
};

// OOB scores at t*, with terminal values memoized per (tree, node, system)
// so repeated permutation passes only pay for routing
class OobEvaluator {
 public:
  OobEvaluator(const ForestModel& forest, const RecurrenceDataset& data)
      : forest_(forest), data_(data), t_star_(censor_quantile(data, 0.9)) {
    const std::size_t B = forest.trees.size();
    mcf_mode_ = forest.hyper.mode == TerminalMode::mcf;
    if (mcf_mode_) {
      mcf_value_.resize(B);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& nodes = forest_.trees[b].nodes;
        mcf_value_[b].assign(nodes.size(), 0.0);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          if (nodes[k].terminal()) mcf_value_[b][k] = nodes[k].mcf_payload->mcf.at(t_star_);
        }
      }
    }
    node_count_ = 0;
    for (const auto& tree : forest.trees) {
      node_count_ = std::max(node_count_, tree.nodes.size());
    }
  }

  double t_star() const { return t_star_; }

  // covariate column `permute` of `x_rows` replaces the systems' own values;
  // permute < 0 scores the unpermuted forest
  OobScores scores(const std::vector<std::vector<double>>& x_rows) {
    const int n = data_.n();
    std::vector<double> total(n, 0.0);
    std::vector<int> used(n, 0);
    for (std::size_t b = 0; b < forest_.trees.size(); ++b) {
      const auto& tree = forest_.trees[b];
      for (int i = 0; i < n; ++i) {
        if (!forest_.membership[b][i]) continue;
        const int node = route_index(tree, x_rows[i]);
        total[i] += terminal_value(b, node, i);
        ++used[i];
      }
    }
    OobScores out;
    for (int i = 0; i < n; ++i) {
      if (used[i] == 0) continue;  // never out of bag: excluded, not an error
      out.predicted.push_back(total[i] / used[i]);
      out.observed.push_back(static_cast<double>(data_.systems[i].failures_up_to(t_star_)));
    }
    return out;
  }

 private:
  static int route_index(const TreeModel& tree, const std::vector<double>& x) {
    int idx = 0;
    while (!tree.nodes[idx].terminal()) {
      const TreeNode& node = tree.nodes[idx];
      idx = x[node.covariate] <= node.cut ? node.left : node.right;
    }
    return idx;
  }

  double terminal_value(std::size_t b, int node, int i) {
    if (mcf_mode_) return mcf_value_[b][node];
    const std::size_t key = (b * node_count_ + static_cast<std::size_t>(node)) *
                                static_cast<std::size_t>(data_.n()) +
                            static_cast<std::size_t>(i);
    auto it = hazard_memo_.find(key);
    if (it != hazard_memo_.end()) return it->second;
    const double v = cumulative_intensity(*forest_.trees[b].nodes[node].nhpp_payload,
                                          data_.systems[i], t_star_);
    hazard_memo_.emplace(key, v);
    return v;
  }

  const ForestModel& forest_;
  const RecurrenceDataset& data_;
  double t_star_;
  bool mcf_mode_ = true;
  std::size_t node_count_ = 0;
  std::vector<std::vector<double>> mcf_value_;
  std::unordered_map<std::size_t, double> hazard_memo_;
};

std::vector<std::vector<double>> covariate_rows(const RecurrenceDataset& data) {
  std::vector<std::vector<double>> rows;
  rows.reserve(data.systems.size());
  for (const auto& rec : data.systems) rows.push_back(rec.static_covariates);
  return rows;
}

}  // namespace

double oob_c_index(const ForestModel& forest, const RecurrenceDataset& data) {
  OobEvaluator eval(forest, data);
  auto s = eval.scores(covariate_rows(data));
  return c_index(s.predicted, s.observed);
}

ImportanceReport permutation_importance(const ForestModel& forest, const RecurrenceDataset& data,
                                        int repeats, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("permutation_importance needs repeats >= 1");
  OobEvaluator eval(forest, data);
  const auto base_rows = covariate_rows(data);
  auto base_scores = eval.scores(base_rows);
  const double baseline = c_index(base_scores.predicted, base_scores.observed);

  ImportanceReport report;
  report.names = forest.covariate_names;
  report.baseline = baseline;
  const int p = static_cast<int>(forest.covariate_names.size());
  const int n = data.n();
  report.importance.assign(p, 0.0);

  std::vector<int> perm(n);
  for (int j = 0; j < p; ++j) {
    double drop = 0;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(seed, seed_tag::permutation, static_cast<std::uint64_t>(j),
                          static_cast<std::uint64_t>(r)));
      for (int i = 0; i < n; ++i) perm[i] = i;
      rng.shuffle(perm);
      auto rows = base_rows;
      for (int i = 0; i < n; ++i) rows[i][j] = base_rows[perm[i]][j];
      auto s = eval.scores(rows);
      drop += baseline - c_index(s.predicted, s.observed);
    }
    report.importance[j] = drop / repeats;
  }
  return report;
}

}  // namespace rfr
