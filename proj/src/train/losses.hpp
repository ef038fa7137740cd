// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "geometry/box.hpp"

namespace unic::train {

enum class ExtraLossType { SmoothL1, Mse, Cosine, Kl };

std::string_view to_string(ExtraLossType t);
ExtraLossType parse_extra_loss(std::string_view s);

struct LossWeights {
  double iou = 0.4;
  double focal = 0.1;
  double extra = 1.0;
  ExtraLossType extra_type = ExtraLossType::SmoothL1;
  double smooth_l1_delta = 1.0;
  double focal_gamma = 2.0;

  void validate() const;
};

/// Box-space gradient with respect to (x, y, w, h).
using BoxGrad = std::array<double, 4>;

/// Mean absolute difference of the four center-form coordinates.
double l1_box_loss(const geom::Box& p, const geom::Box& g, BoxGrad* grad = nullptr);
/// 1 - GIoU(p, g).
double giou_loss(const geom::Box& p, const geom::Box& g, BoxGrad* grad = nullptr);
/// |t - sigmoid(x)|^gamma * BCE(sigmoid(x), t), computed from the logit.
double quality_focal_loss(double logit, double target, double gamma, double* dlogit = nullptr);

/// Per-row feature distances averaged over rows. Smooth-l1 and MSE average
/// over channels; cosine is 1 - cos; KL is KL(softmax(target) || softmax(pred)).
double extra_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, ExtraLossType type,
                  double delta = 1.0, Eigen::MatrixXd* grad = nullptr);

struct CompLoss {
  double total = 0.0;
  double reg = 0.0;
  double iou = 0.0;
  double focal = 0.0;
  /// d total / d box, per prediction (zero for unmatched).
  std::vector<BoxGrad> box_grad;
  /// d total / d confidence logit, per prediction.
  std::vector<double> logit_grad;
};

struct Assignment;

/// L_comp = L_reg + w.iou * L_IoU + w.focal * L_focal. Box terms average over
/// matched pairs; the focal term sums over all predictions and is normalized
/// by the number of matched pairs. Throws std::domain_error on non-finite results.
CompLoss comp_loss(const std::vector<geom::Box>& pred_boxes, const std::vector<double>& conf_logits,
                   const std::vector<geom::Box>& gts, const Assignment& assignment,
                   const std::vector<double>& targets, const LossWeights& w);

enum class LabelMode { Quality, SelfDistill };

std::string_view to_string(LabelMode m);

/// Confidence targets. Quality: matched predictions get score / 5, others 0.
/// Self-distill: the teacher's confidences.
std::vector<double> make_soft_labels(const Assignment& assignment, size_t num_preds,
                                     const std::vector<double>& gt_scores, LabelMode mode,
                                     const std::vector<double>* teacher_confidences = nullptr);

}  // namespace unic::train
