#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "rfr/data/dataset.hpp"
#include "rfr/mcf/estimator.hpp"

namespace rfr::detail {

// Per-node bootstrap membership with the member events and censor times kept
// time-sorted, so daughter curves come from a stable filter pass instead of a
// re-sort. Shared between the in-process grower and the worker runtime: both
// build nodes through these helpers, which is what makes the one-worker
// distributed fit bit-identical to the local one. RecordOf maps a bootstrap
// instance index to its SystemRecord.
struct NodeState {
  std::vector<int> instances;                   // bootstrap instance indices, draw order
  std::vector<std::pair<double, int>> events;   // (failure time, instance), time-sorted
  std::vector<std::pair<double, int>> censors;  // (censor time, instance), time-sorted
};

template <class RecordOf>
void fill_sorted_members(NodeState& node, RecordOf&& record_of) {
  for (int inst : node.instances) {
    const SystemRecord& rec = record_of(inst);
    for (double t : rec.failure_times) node.events.emplace_back(t, inst);
    node.censors.emplace_back(rec.censor_time, inst);
  }
  std::sort(node.events.begin(), node.events.end());
  std::sort(node.censors.begin(), node.censors.end());
}

template <class RecordOf>
void split_node(const NodeState& node, int covariate, double cut, RecordOf&& record_of,
                NodeState& left, NodeState& right) {
  for (int inst : node.instances) {
    const bool to_left = record_of(inst).static_covariates[covariate] <= cut;
    (to_left ? left : right).instances.push_back(inst);
  }
  for (const auto& e : node.events) {
    const bool to_left = record_of(e.second).static_covariates[covariate] <= cut;
    (to_left ? left : right).events.push_back(e);
  }
  for (const auto& c : node.censors) {
    const bool to_left = record_of(c.second).static_covariates[covariate] <= cut;
    (to_left ? left : right).censors.push_back(c);
  }
}

template <class RecordOf>
void split_curves(const NodeState& node, int covariate, double cut, RecordOf&& record_of,
                  McfEstimate& left, McfEstimate& right) {
  std::vector<double> le, re, lc, rc;
  for (const auto& e : node.events) {
    const bool to_left = record_of(e.second).static_covariates[covariate] <= cut;
    (to_left ? le : re).push_back(e.first);
  }
  for (const auto& c : node.censors) {
    const bool to_left = record_of(c.second).static_covariates[covariate] <= cut;
    (to_left ? lc : rc).push_back(c.first);
  }
  left = mcf_from_sorted(std::move(le), std::move(lc));
  right = mcf_from_sorted(std::move(re), std::move(rc));
}

}  // namespace rfr::detail
