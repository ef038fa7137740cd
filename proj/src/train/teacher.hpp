// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "image/raster.hpp"
#include "model/unic_model.hpp"

namespace unic::train {

/// Exponential moving average of a student model. The average is kept in
/// double precision and mirrored into a float model used for inference; the
/// mirror's parameters never take part in a student graph.
class EmaTeacher {
 public:
  explicit EmaTeacher(const model::UnicModel& student);

  /// theta_T <- mu * theta_T + (1 - mu) * theta_S
  void update(const model::UnicModel& student, double mu);

  const model::UnicModel& model() const { return model_; }
  model::UnicModel& model() { return model_; }
  /// Double-precision parameter values, in parameter-store order.
  const std::vector<std::vector<double>>& shadow() const { return shadow_; }

 private:
  model::UnicModel model_;
  std::vector<std::vector<double>> shadow_;
};

/// Elementwise EMA on raw buffers; throws on size mismatch.
void ema_update(std::vector<double>& teacher, std::span<const float> student, double mu);

/// Teacher tokens aligned with the student's extended grid.
struct TeacherTargets {
  nn::Tensor tokens;  // [rows * cols, dim]
  /// Cells outside the init view and fully inside the world.
  std::vector<uint8_t> valid;
  int rows = 0;
  int cols = 0;

  int valid_count() const;
};

/// Pixel region of the world covered by the student's extended grid: the init
/// view grown by `margin` cells per side (world-normalized).
geom::Box extended_region(const geom::Box& init_view_world, int grid_rows, int grid_cols, int margin);

/// Encodes `region_image` (the extended region rendered at
/// (rows + 2m) * stride x (cols + 2m) * stride pixels) with the teacher's
/// backbone and encoder on the student's grid frame, without recording a graph.
TeacherTargets teacher_targets(const model::UnicModel& teacher, const image::Planar& region_image,
                               const geom::Box& init_view_world, int margin);

}  // namespace unic::train
