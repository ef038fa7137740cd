// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dataset/scene.hpp"
#include "image/raster.hpp"
#include "model/unic_model.hpp"
#include "nn/optim.hpp"
#include "train/losses.hpp"
#include "train/matching.hpp"
#include "train/teacher.hpp"

namespace unic::train {

struct TrainConfig {
  model::ModelConfig model;
  int epochs = 50;
  int batch_size = 16;
  double lr = 1e-4;
  double backbone_lr = 1e-5;
  double weight_decay = 1e-4;
  /// 0-based epoch from which the learning rate is multiplied by lr_decay_factor.
  int lr_decay_epoch = 30;
  double lr_decay_factor = 0.1;
  /// 0-based epoch from which confidence targets come from the EMA teacher.
  int label_switch_epoch = 30;
  double ema_decay = 0.999;
  LossWeights loss;
  double grad_clip = 0.1;
  bool augment = true;
  /// Extra samples per scene framed around the best crop, as met after an adjustment step.
  int refine_views = 0;
  /// Maximum relative scale and shift of refinement views around the best crop.
  double refine_jitter = 0.15;
  image::JitterParams jitter;
  nn::AdamW::Options adam;
  uint64_t seed = 1;

  void validate() const;
};

/// Parses "key = value" lines ('#' starts a comment). Unknown keys are errors.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string format_train_config(const TrainConfig& cfg);

/// Pre-rendered training input for one scene.
struct TrainSample {
  /// Extended region (init view plus the extrapolation margin) at model resolution.
  image::Raster region;
  geom::Box init_view_world;
  std::vector<geom::Box> gts;
  std::vector<double> scores;
};

TrainSample make_train_sample(const model::ModelConfig& cfg, const data::Scene& scene, const image::Raster& world);

/// Sample framed by a camera view around the scene's best crop, scaled and
/// shifted by up to `jitter` and clamped inside the world.
TrainSample make_refine_sample(const model::ModelConfig& cfg, const data::Scene& scene, const image::Raster& world,
                               double jitter, std::mt19937_64& rng);

/// Init-view sample followed by cfg.refine_views refinement samples. `index`
/// seeds the refinement views together with cfg.seed.
std::vector<TrainSample> make_train_samples(const TrainConfig& cfg, const data::Scene& scene,
                                            const image::Raster& world, uint64_t index);

struct SampleLoss {
  CompLoss comp;
  double extra = 0.0;
  int extra_cells = 0;
  double total = 0.0;
};

/// Forward pass and losses for one sample. When grad_scale > 0 the gradients
/// of grad_scale * total are accumulated into the student's parameters.
SampleLoss sample_loss(const model::UnicModel& student, const EmaTeacher* teacher, const TrainSample& sample,
                       const TrainConfig& cfg, LabelMode mode, std::mt19937_64* aug_rng, double grad_scale);

struct EpochLog {
  int epoch = 0;
  double comp = 0.0;
  double reg = 0.0;
  double iou = 0.0;
  double focal = 0.0;
  double extra = 0.0;
  double lr_scale = 1.0;
  LabelMode label_mode = LabelMode::Quality;
  double seconds = 0.0;
  nlohmann::json eval;

  nlohmann::json to_json() const;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<TrainSample> samples);

  /// One pass over the data in a seeded random order.
  EpochLog run_epoch();
  int epoch() const { return epoch_; }
  const model::UnicModel& model() const { return *student_; }
  const EmaTeacher& teacher() const { return *teacher_; }
  const TrainConfig& config() const { return cfg_; }
  /// Total loss of the first batch of the first epoch.
  double first_batch_loss() const { return first_batch_loss_; }

 private:
  TrainConfig cfg_;
  std::vector<TrainSample> samples_;
  std::unique_ptr<model::UnicModel> student_;
  std::unique_ptr<EmaTeacher> teacher_;
  std::unique_ptr<nn::AdamW> opt_;
  std::vector<nn::Var> params_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  double first_batch_loss_ = 0.0;
};

struct TrainHooks {
  /// Per-epoch evaluation; its result is stored in the epoch log.
  std::function<nlohmann::json(const model::UnicModel&)> eval;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Full schedule. The checkpoint is rewritten after every epoch; on a
/// non-finite loss training stops, the last good checkpoint stays in place
/// and std::domain_error propagates.
model::UnicModel train(const TrainConfig& cfg, std::vector<TrainSample> samples, const TrainHooks& hooks,
                       const std::filesystem::path& checkpoint);

/// Loads every scene's world image from disk.
std::vector<TrainSample> load_train_samples(const TrainConfig& cfg, const std::vector<data::Scene>& scenes);

}  // namespace unic::train
