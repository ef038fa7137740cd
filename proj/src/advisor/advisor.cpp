// SPDX-License-Identifier: Apache-2.0
#include "advisor/advisor.hpp"

#include <cmath>

namespace unic::advisor {

using geom::Box;

std::string_view to_string(Operation::Kind k) {
  switch (k) {
    case Operation::Kind::MoveLeft: return "move-left";
    case Operation::Kind::MoveRight: return "move-right";
    case Operation::Kind::MoveUp: return "move-up";
    case Operation::Kind::MoveDown: return "move-down";
    case Operation::Kind::ZoomIn: return "zoom-in";
    case Operation::Kind::ZoomOut: return "zoom-out";
  }
  return "move-left";
}

nlohmann::json to_json(const Operation& op) { return {{"op", std::string(to_string(op.kind))}, {"amount", op.amount}}; }

std::vector<Operation> derive_ops(const Box& v, geom::Orientation, const AdvisorOptions& opt) {
  geom::require_valid(v, "predicted view");
  std::vector<Operation> ops;
  const double dx = v.x - 0.5;
  const double dy = v.y - 0.5;
  if (std::abs(dx) > opt.move_threshold) {
    ops.push_back({dx < 0 ? Operation::Kind::MoveLeft : Operation::Kind::MoveRight, std::abs(dx)});
  }
  if (std::abs(dy) > opt.move_threshold) {
    ops.push_back({dy < 0 ? Operation::Kind::MoveUp : Operation::Kind::MoveDown, std::abs(dy)});
  }
  if (std::abs(v.w - 1.0) > opt.zoom_threshold) {
    if (v.w > 1.0) {
      ops.push_back({Operation::Kind::ZoomOut, v.w});
    } else {
      ops.push_back({Operation::Kind::ZoomIn, 1.0 / v.w});
    }
  }
  return ops;
}

Box apply_ops(const std::vector<Operation>& ops) {
  Box v = Box::unit();
  double scale = 1.0;
  for (const auto& op : ops) {
    switch (op.kind) {
      case Operation::Kind::MoveLeft: v.x -= op.amount; break;
      case Operation::Kind::MoveRight: v.x += op.amount; break;
      case Operation::Kind::MoveUp: v.y -= op.amount; break;
      case Operation::Kind::MoveDown: v.y += op.amount; break;
      case Operation::Kind::ZoomIn: scale /= op.amount; break;
      case Operation::Kind::ZoomOut: scale *= op.amount; break;
    }
  }
  v.w = scale;
  v.h = scale;
  return v;
}

nlohmann::json Recommendation::to_json() const {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : operations) ops.push_back(advisor::to_json(op));
  return {{"operations", ops},
          {"view", view.to_array()},
          {"crop", crop.to_array()},
          {"confidence", confidence},
          {"converged", converged}};
}

Recommendation recommend_from(const model::PredictionSet& preds, geom::Orientation o, const AdvisorOptions& opt) {
  const size_t top = preds.top();
  Recommendation r;
  r.crop = preds.boxes[top];
  r.confidence = preds.confidences[top];
  // The init frame has the camera ratio in pixels.
  r.view = geom::derive_view(r.crop, o, geom::camera_ratio(o));
  r.operations = derive_ops(r.view, o, opt);
  r.converged = geom::iou(r.view, Box::unit()) >= opt.tau_conv;
  return r;
}

Recommendation recommend(const model::UnicModel& model, const image::Raster& view_image, geom::Orientation o,
                         const AdvisorOptions& opt) {
  return recommend_from(model.predict(view_image), o, opt);
}

nlohmann::json Step::to_json() const {
  nlohmann::json j = rec.to_json();
  j["viewport"] = viewport.to_array();
  j["next_viewport"] = next_viewport.to_array();
  j["iou_to_previous"] = iou_to_previous;
  return j;
}

namespace {

void require_in_world(const Box& v) {
  geom::require_valid(v, "viewport");
  constexpr double tol = 1e-9;
  const geom::Corners c = v.corners();
  if (c.x1 < -tol || c.y1 < -tol || c.x2 > 1.0 + tol || c.y2 > 1.0 + tol) {
    throw std::invalid_argument("viewport " + geom::to_string(v) + " is not inside the world");
  }
}

}  // namespace

Step advise_step(const model::UnicModel& model, const image::Raster& world, const Box& viewport, geom::Orientation o,
                 const AdvisorOptions& opt) {
  require_in_world(viewport);
  Step s;
  s.viewport = viewport;
  s.rec = recommend_from(model.predict(model.prepare_view(world, viewport)), o, opt);
  s.next_viewport = s.rec.converged ? viewport : geom::clamp_to_world(geom::from_frame(s.rec.view, viewport), o);
  s.iou_to_previous = geom::iou(s.next_viewport, viewport);
  return s;
}

std::vector<Step> run_multistep(const model::UnicModel& model, const image::Raster& world, const Box& init_viewport,
                                geom::Orientation o, const AdvisorOptions& opt) {
  std::vector<Step> traj;
  Box current = init_viewport;
  for (int k = 0; k < opt.max_steps; ++k) {
    traj.push_back(advise_step(model, world, current, o, opt));
    if (traj.back().rec.converged) break;
    current = traj.back().next_viewport;
  }
  return traj;
}

Session::Session(std::string id, image::Raster world, AdvisorOptions opt)
    : id_(std::move(id)), world_(std::move(world)), opt_(opt) {
  if (world_.empty()) throw std::invalid_argument("session world image is empty");
}

Step Session::step(const model::UnicModel& model, const Box& viewport, geom::Orientation o) {
  std::lock_guard<std::mutex> lock(mu_);
  if (static_cast<int>(trajectory_.size()) >= opt_.max_steps) {
    throw SessionError(SessionError::Code::StepLimit,
                       "session " + id_ + " reached its step limit of " + std::to_string(opt_.max_steps));
  }
  Step s;
  try {
    s = advise_step(model, world_, viewport, o, opt_);
  } catch (const std::invalid_argument& e) {
    throw SessionError(SessionError::Code::InvalidArgument, e.what());
  }
  trajectory_.push_back(s);
  return s;
}

std::vector<Step> Session::trajectory() const {
  std::lock_guard<std::mutex> lock(mu_);
  return trajectory_;
}

nlohmann::json Session::to_json() const {
  std::lock_guard<std::mutex> lock(mu_);
  nlohmann::json steps = nlohmann::json::array();
  for (size_t i = 0; i < trajectory_.size(); ++i) {
    nlohmann::json j = trajectory_[i].to_json();
    j["step_index"] = i;
    steps.push_back(j);
  }
  return {{"session_id", id_}, {"world_w", world_.cols}, {"world_h", world_.rows}, {"trajectory", steps}};
}

}  // namespace unic::advisor
