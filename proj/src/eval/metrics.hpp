// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dataset/scene.hpp"
#include "image/raster.hpp"
#include "model/unic_model.hpp"

namespace unic::eval {

enum class EvalMode { View, Crop };

std::string_view to_string(EvalMode m);
EvalMode parse_eval_mode(std::string_view s);

/// 1 when any of the first K predictions has IoU >= eps with any of the first
/// N ground truths (N is truncated to the available ground truths).
bool acc_k_n(const std::vector<geom::Box>& preds_ranked, const std::vector<geom::Box>& gts_ranked, int k, int n,
             double eps);

struct ImageRecord {
  std::string image;
  geom::Box pred;
  geom::Box gt;
  double iou = 0.0;
  double disp = 0.0;
  /// Best ground-truth crop extends beyond the init view.
  bool out_of_border = false;
  bool hit_1_5_e90 = false, hit_1_5_e85 = false, hit_1_10_e90 = false, hit_1_10_e85 = false;
};

struct MetricsReport {
  EvalMode mode = EvalMode::View;
  double acc_1_5_e90 = 0.0;
  double acc_1_5_e85 = 0.0;
  double acc_1_10_e90 = 0.0;
  double acc_1_10_e85 = 0.0;
  double mean_iou = 0.0;
  double mean_disp = 0.0;
  std::vector<ImageRecord> per_image;

  nlohmann::json to_json(bool with_images = true) const;
};

/// Scores ranked predictions (one set per scene, init-view frame) against each
/// scene's ground truth. View mode compares derived camera views, crop mode
/// compares crops directly.
MetricsReport evaluate_predictions(const std::vector<data::Scene>& scenes,
                                   const std::vector<model::PredictionSet>& preds, EvalMode mode);

using WorldLoader = std::function<image::Raster(const data::Scene&)>;

/// Runs the model on every scene's init view. Worlds are read from disk unless
/// a loader is given.
MetricsReport evaluate(const model::UnicModel& model, const std::vector<data::Scene>& scenes, EvalMode mode,
                       const WorldLoader& loader = {});

/// Predictions of the model on each scene's init view.
std::vector<model::PredictionSet> predict_scenes(const model::UnicModel& model, const std::vector<data::Scene>& scenes,
                                                 const WorldLoader& loader = {});

/// Camera view of a crop expressed in the init-view frame of the given orientation.
geom::Box view_in_init_frame(const geom::Box& crop, geom::Orientation o);

}  // namespace unic::eval
