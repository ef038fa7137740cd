// SPDX-License-Identifier: Apache-2.0
#include "eval/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace unic::eval {

using geom::Box;

std::string_view to_string(EvalMode m) { return m == EvalMode::View ? "view" : "crop"; }

EvalMode parse_eval_mode(std::string_view s) {
  if (s == "view") return EvalMode::View;
  if (s == "crop") return EvalMode::Crop;
  throw std::invalid_argument("unknown evaluation mode: " + std::string(s));
}

bool acc_k_n(const std::vector<Box>& preds, const std::vector<Box>& gts, int k, int n, double eps) {
  if (k < 1 || n < 1) throw std::invalid_argument("K and N must be at least 1");
  if (preds.size() < static_cast<size_t>(k)) throw std::invalid_argument("fewer predictions than K");
  if (gts.empty()) throw std::invalid_argument("no ground truth");
  const size_t nn = std::min(gts.size(), static_cast<size_t>(n));
  for (int i = 0; i < k; ++i) {
    for (size_t j = 0; j < nn; ++j) {
      if (geom::iou(preds[i], gts[j]) >= eps) return true;
    }
  }
  return false;
}

Box view_in_init_frame(const Box& crop, geom::Orientation o) {
  // The init frame itself has the camera ratio in pixels.
  return geom::derive_view(crop, o, geom::camera_ratio(o));
}

nlohmann::json MetricsReport::to_json(bool with_images) const {
  nlohmann::json j = {{"mode", std::string(eval::to_string(mode))},
                      {"count", per_image.size()},
                      {"acc_1_5_e90", acc_1_5_e90},
                      {"acc_1_5_e85", acc_1_5_e85},
                      {"acc_1_10_e90", acc_1_10_e90},
                      {"acc_1_10_e85", acc_1_10_e85},
                      {"mean_iou", mean_iou},
                      {"mean_disp", mean_disp}};
  if (with_images) {
    nlohmann::json imgs = nlohmann::json::array();
    for (const auto& r : per_image) {
      imgs.push_back({{"image", r.image},
                      {"pred", r.pred.to_array()},
                      {"gt", r.gt.to_array()},
                      {"iou", r.iou},
                      {"disp", r.disp},
                      {"out_of_border", r.out_of_border}});
    }
    j["per_image"] = imgs;
  }
  return j;
}

MetricsReport evaluate_predictions(const std::vector<data::Scene>& scenes,
                                   const std::vector<model::PredictionSet>& preds, EvalMode mode) {
  if (scenes.empty()) throw std::invalid_argument("evaluation set is empty");
  if (scenes.size() != preds.size()) throw std::invalid_argument("prediction count does not match the dataset");
  MetricsReport rep;
  rep.mode = mode;
  for (size_t s = 0; s < scenes.size(); ++s) {
    const data::Scene& sc = scenes[s];
    const model::PredictionSet& ps = preds[s];
    if (ps.size() == 0) throw std::invalid_argument("empty prediction set");
    auto space = [&](const Box& b) { return mode == EvalMode::View ? view_in_init_frame(b, sc.orientation) : b; };

    std::vector<Box> ranked_preds;
    for (size_t i : ps.ranking()) ranked_preds.push_back(space(ps.boxes[i]));
    std::vector<Box> ranked_gts;
    for (size_t i : data::score_order(sc.crops)) ranked_gts.push_back(space(sc.crops[i].box));

    ImageRecord r;
    r.image = sc.image;
    r.pred = ranked_preds.front();
    r.gt = ranked_gts.front();
    r.iou = geom::iou(r.pred, r.gt);
    r.disp = geom::disp(r.pred, r.gt);
    const geom::Corners c = sc.crops[sc.best_crop()].box.corners();
    r.out_of_border = c.x1 < 0 || c.y1 < 0 || c.x2 > 1 || c.y2 > 1;
    r.hit_1_5_e90 = acc_k_n(ranked_preds, ranked_gts, 1, 5, 0.90);
    r.hit_1_5_e85 = acc_k_n(ranked_preds, ranked_gts, 1, 5, 0.85);
    r.hit_1_10_e90 = acc_k_n(ranked_preds, ranked_gts, 1, 10, 0.90);
    r.hit_1_10_e85 = acc_k_n(ranked_preds, ranked_gts, 1, 10, 0.85);
    rep.mean_iou += r.iou;
    rep.mean_disp += r.disp;
    rep.acc_1_5_e90 += r.hit_1_5_e90;
    rep.acc_1_5_e85 += r.hit_1_5_e85;
    rep.acc_1_10_e90 += r.hit_1_10_e90;
    rep.acc_1_10_e85 += r.hit_1_10_e85;
    rep.per_image.push_back(std::move(r));
  }
  const double n = static_cast<double>(scenes.size());
  rep.mean_iou /= n;
  rep.mean_disp /= n;
  rep.acc_1_5_e90 *= 100.0 / n;
  rep.acc_1_5_e85 *= 100.0 / n;
  rep.acc_1_10_e90 *= 100.0 / n;
  rep.acc_1_10_e85 *= 100.0 / n;
  return rep;
}

std::vector<model::PredictionSet> predict_scenes(const model::UnicModel& model, const std::vector<data::Scene>& scenes,
                                                 const WorldLoader& loader) {
  std::vector<model::PredictionSet> out;
  out.reserve(scenes.size());
  for (const auto& sc : scenes) {
    const image::Raster world = loader ? loader(sc) : image::load_rgb(sc.image);
    if (world.cols != sc.width || world.rows != sc.height) {
      throw std::runtime_error("world image size does not match the record: " + sc.image);
    }
    out.push_back(model.predict(model.prepare_view(world, sc.init_view_world())));
  }
  return out;
}

MetricsReport evaluate(const model::UnicModel& model, const std::vector<data::Scene>& scenes, EvalMode mode,
                       const WorldLoader& loader) {
  if (scenes.empty()) throw std::invalid_argument("evaluation set is empty");
  return evaluate_predictions(scenes, predict_scenes(model, scenes, loader), mode);
}

}  // namespace unic::eval
