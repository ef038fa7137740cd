// SPDX-License-Identifier: Apache-2.0
#include "train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "train/matching.hpp"

namespace unic::train {

using geom::Box;

std::string_view to_string(ExtraLossType t) {
  switch (t) {
    case ExtraLossType::SmoothL1: return "smooth-l1";
    case ExtraLossType::Mse: return "mse";
    case ExtraLossType::Cosine: return "cosine";
    case ExtraLossType::Kl: return "kl";
  }
  return "smooth-l1";
}

ExtraLossType parse_extra_loss(std::string_view s) {
  if (s == "smooth-l1" || s == "smooth_l1") return ExtraLossType::SmoothL1;
  if (s == "mse") return ExtraLossType::Mse;
  if (s == "cosine") return ExtraLossType::Cosine;
  if (s == "kl") return ExtraLossType::Kl;
  throw std::invalid_argument("unknown extrapolation loss type: " + std::string(s));
}

std::string_view to_string(LabelMode m) { return m == LabelMode::Quality ? "quality" : "self-distill"; }

void LossWeights::validate() const {
  if (!(iou >= 0 && focal >= 0 && extra >= 0)) throw std::invalid_argument("loss weights must be non-negative");
  if (!(smooth_l1_delta > 0)) throw std::invalid_argument("smooth-l1 delta must be positive");
  if (!(focal_gamma >= 0)) throw std::invalid_argument("focal gamma must be non-negative");
}

double l1_box_loss(const Box& p, const Box& g, BoxGrad* grad) {
  const std::array<double, 4> pa = p.to_array();
  const std::array<double, 4> ga = g.to_array();
  double s = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double d = pa[k] - ga[k];
    s += std::abs(d);
    if (grad) (*grad)[k] = 0.25 * ((d > 0) - (d < 0));
  }
  return 0.25 * s;
}

double giou_loss(const Box& p, const Box& g, BoxGrad* grad) {
  const geom::Corners a = p.corners();
  const geom::Corners b = g.corners();
  const double iw_raw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih_raw = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double iw = std::max(0.0, iw_raw);
  const double ih = std::max(0.0, ih_raw);
  const double inter = iw * ih;
  const double ap = p.w * p.h;
  const double uni = ap + g.w * g.h - inter;
  const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double encl = cw * ch;
  const double loss = 1.0 - (inter / uni - (encl - uni) / encl);
  if (!grad) return loss;

  // Derivatives with respect to the prediction's corners (x1, y1, x2, y2).
  double d_iw[4] = {0, 0, 0, 0}, d_ih[4] = {0, 0, 0, 0};
  if (iw_raw > 0) {
    if (a.x1 > b.x1) d_iw[0] = -1.0;
    if (a.x2 < b.x2) d_iw[2] = 1.0;
  }
  if (ih_raw > 0) {
    if (a.y1 > b.y1) d_ih[1] = -1.0;
    if (a.y2 < b.y2) d_ih[3] = 1.0;
  }
  const double d_ap[4] = {-p.h, -p.w, p.h, p.w};
  const double d_cw[4] = {a.x1 < b.x1 ? -1.0 : 0.0, 0.0, a.x2 > b.x2 ? 1.0 : 0.0, 0.0};
  const double d_ch[4] = {0.0, a.y1 < b.y1 ? -1.0 : 0.0, 0.0, a.y2 > b.y2 ? 1.0 : 0.0};
  double dc[4];
  for (int k = 0; k < 4; ++k) {
    const double d_inter = d_iw[k] * ih + iw * d_ih[k];
    const double d_uni = d_ap[k] - d_inter;
    const double d_encl = d_cw[k] * ch + cw * d_ch[k];
    // GIoU = I/U - 1 + U/C
    const double d_giou = d_inter / uni - inter * d_uni / (uni * uni) + d_uni / encl - uni * d_encl / (encl * encl);
    dc[k] = -d_giou;
  }
  (*grad)[0] = dc[0] + dc[2];
  (*grad)[1] = dc[1] + dc[3];
  (*grad)[2] = 0.5 * (dc[2] - dc[0]);
  (*grad)[3] = 0.5 * (dc[3] - dc[1]);
  return loss;
}

double quality_focal_loss(double x, double t, double gamma, double* dlogit) {
  const double p = 1.0 / (1.0 + std::exp(-x));
  // BCE from logits: softplus(x) - t x, stable for large |x|.
  const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  const double bce = softplus - t * x;
  const double diff = std::abs(p - t);
  const double mod = std::pow(diff, gamma);
  if (dlogit) {
    const double sgn = (p > t) - (p < t);
    const double d_mod = gamma == 0.0 ? 0.0 : gamma * std::pow(diff, gamma - 1.0) * sgn * p * (1.0 - p);
    *dlogit = d_mod * bce + mod * (p - t);
  }
  return mod * bce;
}

double extra_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, ExtraLossType type, double delta,
                  Eigen::MatrixXd* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("extrapolation loss shape mismatch");
  }
  const Eigen::Index n = pred.rows();
  const Eigen::Index d = pred.cols();
  if (grad) grad->setZero(n, d);
  if (n == 0 || d == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  switch (type) {
    case ExtraLossType::SmoothL1:
    case ExtraLossType::Mse: {
      const double inv = inv_n / static_cast<double>(d);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) {
          const double e = pred(i, k) - target(i, k);
          double v, g;
          if (type == ExtraLossType::Mse) {
            v = e * e;
            g = 2.0 * e;
          } else if (std::abs(e) < delta) {
            v = 0.5 * e * e / delta;
            g = e / delta;
          } else {
            v = std::abs(e) - 0.5 * delta;
            g = (e > 0) - (e < 0);
          }
          total += v * inv;
          if (grad) (*grad)(i, k) = g * inv;
        }
      }
      break;
    }
    case ExtraLossType::Cosine: {
      constexpr double eps = 1e-12;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = pred.row(i);
        const auto t = target.row(i);
        const double np = std::max(p.norm(), eps);
        const double nt = std::max(t.norm(), eps);
        const double dot = p.dot(t);
        total += (1.0 - dot / (np * nt)) * inv_n;
        if (grad) grad->row(i) = -(t / (np * nt) - dot * p / (np * np * np * nt)) * inv_n;
      }
      break;
    }
    case ExtraLossType::Kl: {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd p = pred.row(i);
        const Eigen::RowVectorXd t = target.row(i);
        const double lp = p.maxCoeff() + std::log((p.array() - p.maxCoeff()).exp().sum());
        const double lt = t.maxCoeff() + std::log((t.array() - t.maxCoeff()).exp().sum());
        const Eigen::RowVectorXd log_q = p.array() - lp;
        const Eigen::RowVectorXd log_pt = t.array() - lt;
        const Eigen::RowVectorXd pt = log_pt.array().exp();
        total += (pt.array() * (log_pt - log_q).array()).sum() * inv_n;
        if (grad) grad->row(i) = (log_q.array().exp() - pt.array()).matrix() * inv_n;
      }
      break;
    }
  }
  return total;
}

CompLoss comp_loss(const std::vector<Box>& pred_boxes, const std::vector<double>& conf_logits,
                   const std::vector<Box>& gts, const Assignment& assignment, const std::vector<double>& targets,
                   const LossWeights& w) {
  const size_t n = pred_boxes.size();
  if (conf_logits.size() != n || targets.size() != n) throw std::invalid_argument("prediction/target size mismatch");
  CompLoss out;
  out.box_grad.assign(n, BoxGrad{0, 0, 0, 0});
  out.logit_grad.assign(n, 0.0);
  const double m = static_cast<double>(assignment.pairs.size());
  if (m > 0) {
    for (const auto& [pi, gi] : assignment.pairs) {
      if (pi < 0 || static_cast<size_t>(pi) >= n || gi < 0 || static_cast<size_t>(gi) >= gts.size()) {
        throw std::invalid_argument("assignment index out of range");
      }
      BoxGrad g1, g2;
      out.reg += l1_box_loss(pred_boxes[pi], gts[gi], &g1) / m;
      out.iou += giou_loss(pred_boxes[pi], gts[gi], &g2) / m;
      for (int k = 0; k < 4; ++k) out.box_grad[pi][k] = (g1[k] + w.iou * g2[k]) / m;
    }
  }
  const double norm = std::max(1.0, m);
  for (size_t i = 0; i < n; ++i) {
    double g;
    out.focal += quality_focal_loss(conf_logits[i], targets[i], w.focal_gamma, &g) / norm;
    out.logit_grad[i] = w.focal * g / norm;
  }
  out.total = out.reg + w.iou * out.iou + w.focal * out.focal;
  if (!std::isfinite(out.total)) throw std::domain_error("non-finite composition loss");
  return out;
}

std::vector<double> make_soft_labels(const Assignment& assignment, size_t num_preds,
                                     const std::vector<double>& gt_scores, LabelMode mode,
                                     const std::vector<double>* teacher_confidences) {
  if (mode == LabelMode::SelfDistill) {
    if (!teacher_confidences) throw std::invalid_argument("self-distillation requires teacher confidences");
    if (teacher_confidences->size() != num_preds) throw std::invalid_argument("teacher confidence count mismatch");
    return *teacher_confidences;
  }
  std::vector<double> t(num_preds, 0.0);
  for (const auto& [pi, gi] : assignment.pairs) {
    const double s = gt_scores.at(static_cast<size_t>(gi));
    if (!(s >= 0.0 && s <= 5.0)) throw std::invalid_argument("aesthetic score outside [0, 5]: " + std::to_string(s));
    t.at(static_cast<size_t>(pi)) = s / 5.0;
  }
  return t;
}

}  // namespace unic::train
