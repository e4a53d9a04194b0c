#pragma once

#include <vector>

#include "rfr/mcf/estimator.hpp"
#include "rfr/nhpp/model.hpp"

namespace rfr {

// daughter curve differences at the parent's pooled failure times
std::vector<double> z_diff(const McfEstimate& left, const McfEstimate& right,
                           const std::vector<double>& parent_times);

// Euclidean norm of z_diff; the default split score
double l2_distance(const McfEstimate& left, const McfEstimate& right,
                   const std::vector<double>& parent_times);

struct LogrankScore {
  double statistic = 0;
  int dof = 0;
};

// Quadratic form z' pinv(Sigma) z, or the literal z' Sigma z when
// literal_form is set. The pseudo-inverse comes from a symmetric
// eigendecomposition with eigenvalues cut at sigma_max * k * machine-epsilon.
double logrank_form(const std::vector<double>& z, const std::vector<std::vector<double>>& sigma,
                    bool literal_form = false);

// Log-rank style score: z from the daughter curves at the parent times, Sigma
// with daughter variances on the diagonal and summed covariance projections
// off it. Both daughters must carry covariance matrices. dof is one less
// than the number of parent times.
LogrankScore logrank_statistic(const McfEstimate& left, const McfEstimate& right,
                               const std::vector<double>& parent_times, bool literal_form = false);

// interior equal-width boundaries k/grid that separate the values into two
// non-empty groups
std::vector<double> enumerate_candidate_splits(const std::vector<double>& values, int grid);

// uniform grid over [0, t_max] used by the intensity rule
std::vector<double> intensity_grid(double t_max, int points = 64);

// per-channel sums of the records' channel values at the grid points (carried
// back before the first sample, forward after the last)
std::vector<std::vector<double>> sum_covariate_paths(const RecordRefs& records,
                                                     const std::vector<double>& grid);

// model intensity along a fixed raw-scale covariate path sampled at the grid
std::vector<double> intensity_curve(const IntensityModel& model, const std::vector<double>& grid,
                                    const std::vector<std::vector<double>>& path_at_grid);

// Euclidean distance between two grid-sampled curves
double intensity_l2_from_curves(const std::vector<double>& a, const std::vector<double>& b);

// Split score for intensity terminals: each daughter's model is evaluated
// along that daughter's mean covariate path, and the curves are compared on
// the grid.
double intensity_l2_distance(const IntensityModel& left, const IntensityModel& right,
                             const std::vector<double>& grid, const RecordRefs& left_records,
                             const RecordRefs& right_records);

}  // namespace rfr
