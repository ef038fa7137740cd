// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geometry/box.hpp"
#include "image/raster.hpp"
#include "model/unic_model.hpp"

namespace unic::advisor {

struct Operation {
  enum class Kind { MoveLeft, MoveRight, MoveUp, MoveDown, ZoomIn, ZoomOut };
  Kind kind = Kind::MoveLeft;
  /// Moves: offset in init-view widths/heights. Zooms: factor >= 1.
  double amount = 0.0;
};

std::string_view to_string(Operation::Kind k);
nlohmann::json to_json(const Operation& op);

struct AdvisorOptions {
  double move_threshold = 0.05;
  double zoom_threshold = 0.05;
  double tau_conv = 0.95;
  int max_steps = 3;
};

/// Camera operations turning the init view (the unit box of its own frame)
/// into `v_pred`. Zoom-in factors are 1 / w, zoom-out factors are w.
std::vector<Operation> derive_ops(const geom::Box& v_pred, geom::Orientation o, const AdvisorOptions& opt = {});

/// Result of applying `ops` to the unit view.
geom::Box apply_ops(const std::vector<Operation>& ops);

struct Recommendation {
  std::vector<Operation> operations;
  geom::Box view;  // init-view frame
  geom::Box crop;  // init-view frame
  double confidence = 0.0;
  bool converged = false;

  nlohmann::json to_json() const;
};

/// Top-confidence crop -> camera view -> operations.
Recommendation recommend_from(const model::PredictionSet& preds, geom::Orientation o, const AdvisorOptions& opt = {});
Recommendation recommend(const model::UnicModel& model, const image::Raster& view_image, geom::Orientation o,
                         const AdvisorOptions& opt = {});

struct Step {
  geom::Box viewport;       // world-normalized, input of the step
  Recommendation rec;
  geom::Box next_viewport;  // world-normalized, clamped
  double iou_to_previous = 0.0;

  nlohmann::json to_json() const;
};

/// One adjustment: render the viewport, recommend, map the view back to the
/// world and clamp it inside.
Step advise_step(const model::UnicModel& model, const image::Raster& world, const geom::Box& viewport,
                 geom::Orientation o, const AdvisorOptions& opt = {});

/// Iterates advise_step until convergence or opt.max_steps steps.
std::vector<Step> run_multistep(const model::UnicModel& model, const image::Raster& world, const geom::Box& init_viewport,
                                geom::Orientation o, const AdvisorOptions& opt = {});

class SessionError : public std::runtime_error {
 public:
  enum class Code { NotFound, InvalidArgument, StepLimit };
  SessionError(Code c, const std::string& msg) : std::runtime_error(msg), code_(c) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Interactive multi-step state over one world image. Requests on a session
/// are serialized by its mutex.
class Session {
 public:
  Session(std::string id, image::Raster world, AdvisorOptions opt);

  const std::string& id() const { return id_; }
  int world_w() const { return world_.cols; }
  int world_h() const { return world_.rows; }

  /// Throws SessionError on an invalid viewport or when max_steps is exhausted.
  Step step(const model::UnicModel& model, const geom::Box& viewport, geom::Orientation o);
  std::vector<Step> trajectory() const;
  nlohmann::json to_json() const;

 private:
  std::string id_;
  image::Raster world_;
  AdvisorOptions opt_;
  mutable std::mutex mu_;
  std::vector<Step> trajectory_;
};

}  // namespace unic::advisor
