// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <string_view>

namespace unic::geom {

/// Camera orientation. Landscape is 4:3 (w:h), portrait is 3:4.
enum class Orientation { Landscape, Portrait };

std::string_view to_string(Orientation o);
Orientation parse_orientation(std::string_view s);

/// Pixel aspect ratio (w/h) of a camera view with the given orientation.
double camera_ratio(Orientation o);

/// Corner form of a box: (x1, y1) top-left, (x2, y2) bottom-right.
struct Corners {
  double x1, y1, x2, y2;
};

/// Axis-aligned box in center form, normalized to a reference frame.
///
/// Coordinates may lie outside [0, 1]; a box is valid when w > 0 and h > 0.
/// Center form is the stored representation, corners() is derived from it.
struct Box {
  double x = 0.5;
  double y = 0.5;
  double w = 1.0;
  double h = 1.0;

  Corners corners() const { return {x - 0.5 * w, y - 0.5 * h, x + 0.5 * w, y + 0.5 * h}; }
  double area() const { return w * h; }
  bool valid() const;

  static Box from_corners(const Corners& c);
  static Box unit() { return {0.5, 0.5, 1.0, 1.0}; }

  std::array<double, 4> to_array() const { return {x, y, w, h}; }
  static Box from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

  bool operator==(const Box&) const = default;
};

std::string to_string(const Box& b);

/// Throws std::invalid_argument naming `what` unless the box is finite with w, h > 0.
void require_valid(const Box& b, std::string_view what = "box");

double iou(const Box& a, const Box& b);

/// Generalized IoU, in [-1, 1].
double giou(const Box& a, const Box& b);

/// Mean absolute displacement of the four edges (corner form), in frame units.
double disp(const Box& a, const Box& b);

bool contains(const Box& outer, const Box& inner, double tol = 0.0);

/// Minimal camera view sharing the crop's center and containing it.
///
/// `frame_aspect` is the pixel width/height of the frame the boxes are
/// normalized to; 1.0 means normalized units are isotropic. When the crop
/// already has the camera ratio the view equals the crop.
Box derive_view(const Box& crop, Orientation orientation, double frame_aspect = 1.0);

/// Re-express a box given in an outer frame relative to `frame` (also in the outer frame).
Box to_frame(const Box& box, const Box& frame);
/// Inverse of to_frame.
Box from_frame(const Box& box, const Box& frame);

/// Move a world-frame view inside the unit world box, translating first and
/// shrinking (ratio-preserving, centered on the oversized axis) only when the
/// view is larger than the world.
Box clamp_to_world(const Box& view, Orientation orientation);

}  // namespace unic::geom
