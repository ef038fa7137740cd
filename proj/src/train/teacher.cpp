// SPDX-License-Identifier: Apache-2.0
#include "train/teacher.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace unic::train {

EmaTeacher::EmaTeacher(const model::UnicModel& student) : model_(student.clone()) {
  for (const auto& [name, p] : model_.params().items()) {
    shadow_.emplace_back(p.value().data.begin(), p.value().data.end());
  }
}

void ema_update(std::vector<double>& teacher, std::span<const float> student, double mu) {
  if (teacher.size() != student.size()) throw std::invalid_argument("EMA shape mismatch");
  const double a = 1.0 - mu;
  for (size_t i = 0; i < teacher.size(); ++i) teacher[i] = mu * teacher[i] + a * student[i];
}

void EmaTeacher::update(const model::UnicModel& student, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("EMA decay must lie in [0, 1]");
  const auto& src = student.params().items();
  auto& dst = model_.params().items();
  if (src.size() != dst.size()) throw std::invalid_argument("EMA parameter count mismatch");
  for (size_t i = 0; i < src.size(); ++i) {
    if (src[i].first != dst[i].first) throw std::invalid_argument("EMA parameter name mismatch: " + src[i].first);
    ema_update(shadow_[i], src[i].second.value().data, mu);
    auto& out = dst[i].second.mutable_value().data;
    std::transform(shadow_[i].begin(), shadow_[i].end(), out.begin(), [](double v) { return static_cast<float>(v); });
  }
}

int TeacherTargets::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), uint8_t{1}));
}

geom::Box extended_region(const geom::Box& init_view_world, int grid_rows, int grid_cols, int margin) {
  const geom::Box local{0.5, 0.5, static_cast<double>(grid_cols + 2 * margin) / grid_cols,
                        static_cast<double>(grid_rows + 2 * margin) / grid_rows};
  return geom::from_frame(local, init_view_world);
}

TeacherTargets teacher_targets(const model::UnicModel& teacher, const image::Planar& region_image,
                               const geom::Box& init_view_world, int margin) {
  const model::ModelConfig& cfg = teacher.config();
  const int gr = cfg.grid_rows();
  const int gc = cfg.grid_cols();
  const int rows = gr + 2 * margin;
  const int cols = gc + 2 * margin;
  if (region_image.height != rows * cfg.stride || region_image.width != cols * cfg.stride) {
    throw std::invalid_argument("teacher input " + std::to_string(region_image.height) + "x" +
                                std::to_string(region_image.width) + " does not align with a " +
                                std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  nn::NoGradGuard guard;
  const model::TokenGrid z = teacher.encode(region_image, model::GridFrame{gr, gc, margin});

  TeacherTargets out;
  out.rows = rows;
  out.cols = cols;
  out.tokens = z.tokens.value();
  out.valid.assign(static_cast<size_t>(rows) * cols, 0);
  constexpr double tol = 1e-9;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const bool inside_view = r >= margin && r < margin + gr && c >= margin && c < margin + gc;
      if (inside_view) continue;
      const geom::Box cell{(c - margin + 0.5) / gc, (r - margin + 0.5) / gr, 1.0 / gc, 1.0 / gr};
      const geom::Corners w = geom::from_frame(cell, init_view_world).corners();
      if (w.x1 >= -tol && w.y1 >= -tol && w.x2 <= 1.0 + tol && w.y2 <= 1.0 + tol) {
        out.valid[static_cast<size_t>(r) * cols + c] = 1;
      }
    }
  }
  return out;
}

}  // namespace unic::train
