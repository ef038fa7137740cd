// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geometry/box.hpp"
#include "model/unic_model.hpp"
#include "train/losses.hpp"

namespace unic::train {

struct Assignment {
  /// (prediction index, ground-truth index), sorted by prediction index.
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched;
  double cost = 0.0;
};

/// Minimum-cost assignment of rows to columns of a rectangular cost matrix;
/// min(rows, cols) pairs are produced.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// Exhaustive search over injective maps; small instances only.
double brute_force_min_cost(const Eigen::MatrixXd& cost);

/// cost(i, j) = L1(pred_i, gt_j) + lambda_iou * (1 - GIoU) - lambda_focal * confidence_i
Eigen::MatrixXd matching_cost(const model::PredictionSet& preds, const std::vector<geom::Box>& gts,
                              const LossWeights& w);

Assignment match(const model::PredictionSet& preds, const std::vector<geom::Box>& gts, const LossWeights& w);

}  // namespace unic::train
