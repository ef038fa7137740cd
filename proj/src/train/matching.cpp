// SPDX-License-Identifier: Apache-2.0
#include "train/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace unic::train {

namespace {

// Shortest augmenting path Hungarian algorithm for n <= m, O(n^2 m).
// Returns the column assigned to each row.
std::vector<int> hungarian(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  }
  return col;
}

}  // namespace

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) throw std::invalid_argument("empty cost matrix");
  if (!cost.allFinite()) throw std::invalid_argument("non-finite matching cost");
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  std::vector<int> row_to_col(n, -1);
  if (cost.rows() <= cost.cols()) {
    row_to_col = hungarian(cost);
  } else {
    const Eigen::MatrixXd t = cost.transpose();
    const std::vector<int> col_to_row = hungarian(t);
    for (int j = 0; j < static_cast<int>(col_to_row.size()); ++j) row_to_col[col_to_row[j]] = j;
  }
  for (int i = 0; i < n; ++i) {
    if (row_to_col[i] >= 0) {
      out.pairs.emplace_back(i, row_to_col[i]);
      out.cost += cost(i, row_to_col[i]);
    } else {
      out.unmatched.push_back(i);
    }
  }
  return out;
}

double brute_force_min_cost(const Eigen::MatrixXd& cost) {
  const Eigen::MatrixXd c = cost.rows() <= cost.cols() ? Eigen::MatrixXd(cost) : Eigen::MatrixXd(cost.transpose());
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());
  // Enumerate column permutations; the first n entries pick the rows' columns.
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += c(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Eigen::MatrixXd matching_cost(const model::PredictionSet& preds, const std::vector<geom::Box>& gts,
                              const LossWeights& w) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(preds.size()), static_cast<Eigen::Index>(gts.size()));
  for (size_t i = 0; i < preds.size(); ++i) {
    for (size_t j = 0; j < gts.size(); ++j) {
      c(i, j) = l1_box_loss(preds.boxes[i], gts[j]) + w.iou * giou_loss(preds.boxes[i], gts[j]) -
                w.focal * preds.confidences[i];
    }
  }
  return c;
}

Assignment match(const model::PredictionSet& preds, const std::vector<geom::Box>& gts, const LossWeights& w) {
  if (gts.empty()) throw std::invalid_argument("matching requires at least one ground truth");
  if (preds.size() == 0) throw std::invalid_argument("matching requires at least one prediction");
  return solve_assignment(matching_cost(preds, gts, w));
}

}  // namespace unic::train
