#include "rfr/split/rules.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rfr/kernels/kernels.hpp"

namespace rfr {

std::vector<double> z_diff(const McfEstimate& left, const McfEstimate& right,
                           const std::vector<double>& parent_times) {
  std::vector<double> diff(parent_times.size());
  for (std::size_t i = 0; i < parent_times.size(); ++i) {
    diff[i] = left.mcf.at(parent_times[i]) - right.mcf.at(parent_times[i]);
  }
  return diff;
}

double l2_distance(const McfEstimate& left, const McfEstimate& right,
                   const std::vector<double>& parent_times) {
  const std::size_t k = parent_times.size();
  std::vector<double> lv(k), rv(k);
  for (std::size_t i = 0; i < k; ++i) {
    lv[i] = left.mcf.at(parent_times[i]);
    rv[i] = right.mcf.at(parent_times[i]);
  }
  return std::sqrt(kernels::sum_sq_diff(lv.data(), rv.data(), k));
}

double logrank_form(const std::vector<double>& z, const std::vector<std::vector<double>>& sigma,
                    bool literal_form) {
  const std::size_t k = z.size();
  if (k == 0) return 0;
  Eigen::MatrixXd S(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (sigma[i].size() != k) throw std::invalid_argument("covariance matrix is not square");
    for (std::size_t j = 0; j < k; ++j) S(i, j) = sigma[i][j];
  }
  Eigen::Map<const Eigen::VectorXd> zv(z.data(), k);
  if (literal_form) return zv.dot(S * zv);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
  const auto& values = solver.eigenvalues();
  const double sigma_max = values.cwiseAbs().maxCoeff();
  const double cut = sigma_max * static_cast<double>(k) * std::numeric_limits<double>::epsilon();
  if (sigma_max <= 0) return 0;
  const Eigen::VectorXd projected = solver.eigenvectors().transpose() * zv;
  double statistic = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] > cut) statistic += projected[i] * projected[i] / values[i];
  }
  return statistic;
}

LogrankScore logrank_statistic(const McfEstimate& left, const McfEstimate& right,
                               const std::vector<double>& parent_times, bool literal_form) {
  if (!left.has_covariance() || !right.has_covariance()) {
    throw std::invalid_argument("logrank_statistic needs covariance on both daughters");
  }
  if (parent_times.empty()) throw std::invalid_argument("logrank_statistic: no pooled failures");
  const std::size_t k = parent_times.size();
  const auto z = z_diff(left, right, parent_times);
  std::vector<std::vector<double>> sigma(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    sigma[i][i] = left.variance.at(parent_times[i]) + right.variance.at(parent_times[i]);
    for (std::size_t j = i + 1; j < k; ++j) {
      const double v = left.covariance_at(parent_times[i], parent_times[j]) +
                       right.covariance_at(parent_times[i], parent_times[j]);
      sigma[i][j] = v;
      sigma[j][i] = v;
    }
  }
  LogrankScore score;
  score.statistic = logrank_form(z, sigma, literal_form);
  score.dof = static_cast<int>(k) - 1;
  return score;
}

std::vector<double> enumerate_candidate_splits(const std::vector<double>& values, int grid) {
  std::vector<double> cuts;
  if (values.empty() || grid < 2) return cuts;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  for (int k = 1; k < grid; ++k) {
    const double cut = static_cast<double>(k) / grid;
    if (*lo <= cut && *hi > cut) cuts.push_back(cut);
  }
  return cuts;
}

std::vector<double> intensity_grid(double t_max, int points) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

std::vector<std::vector<double>> sum_covariate_paths(const RecordRefs& records,
                                                     const std::vector<double>& grid) {
  const int q = records.empty() ? 0 : static_cast<int>(records[0]->dynamic_covariates.size());
  std::vector<std::vector<double>> sums(q, std::vector<double>(grid.size(), 0.0));
  for (const auto* rec : records) {
    for (int j = 0; j < q; ++j) {
      for (std::size_t g = 0; g < grid.size(); ++g) {
        sums[j][g] += dynamic_value_backfill(*rec, j, grid[g]);
      }
    }
  }
  return sums;
}

std::vector<double> intensity_curve(const IntensityModel& model, const std::vector<double>& grid,
                                    const std::vector<std::vector<double>>& path_at_grid) {
  if (static_cast<int>(path_at_grid.size()) != model.q()) {
    throw std::invalid_argument("intensity_curve: path channel count mismatch");
  }
  const std::size_t points = grid.size();
  std::vector<double> u(points, model.raw_beta0());
  for (int j = 0; j < model.q(); ++j) {
    kernels::axpy(model.raw_beta(j), path_at_grid[j].data(), u.data(), points);
  }
  std::vector<double> curve(points);
  kernels::vexp(u.data(), curve.data(), points);
  return curve;
}

double intensity_l2_from_curves(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("curve length mismatch");
  return std::sqrt(kernels::sum_sq_diff(a.data(), b.data(), a.size()));
}

double intensity_l2_distance(const IntensityModel& left, const IntensityModel& right,
                             const std::vector<double>& grid, const RecordRefs& left_records,
                             const RecordRefs& right_records) {
  auto mean_path = [&grid](const RecordRefs& records) {
    auto sums = sum_covariate_paths(records, grid);
    const double n = static_cast<double>(records.size());
    for (auto& channel : sums) {
      for (auto& v : channel) v /= n;
    }
    return sums;
  };
  const auto left_curve = intensity_curve(left, grid, mean_path(left_records));
  const auto right_curve = intensity_curve(right, grid, mean_path(right_records));
  return intensity_l2_from_curves(left_curve, right_curve);
}

}  // namespace rfr
