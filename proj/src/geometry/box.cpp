// SPDX-License-Identifier: Apache-2.0
#include "geometry/box.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace unic::geom {

std::string_view to_string(Orientation o) {
  return o == Orientation::Landscape ? "landscape" : "portrait";
}

Orientation parse_orientation(std::string_view s) {
  if (s == "landscape") return Orientation::Landscape;
  if (s == "portrait") return Orientation::Portrait;
  throw std::invalid_argument("unknown orientation: " + std::string(s));
}

double camera_ratio(Orientation o) { return o == Orientation::Landscape ? 4.0 / 3.0 : 3.0 / 4.0; }

bool Box::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
         h > 0.0;
}

Box Box::from_corners(const Corners& c) {
  return {0.5 * (c.x1 + c.x2), 0.5 * (c.y1 + c.y2), c.x2 - c.x1, c.y2 - c.y1};
}

std::string to_string(const Box& b) {
  std::ostringstream os;
  os.precision(17);
  os << '[' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << ']';
  return os.str();
}

void require_valid(const Box& b, std::string_view what) {
  if (!b.valid()) {
    throw std::invalid_argument(std::string(what) + " is degenerate: " + to_string(b));
  }
}

namespace {

double intersection_area(const Corners& a, const Corners& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

}  // namespace

double iou(const Box& a, const Box& b) {
  require_valid(a, "iou lhs");
  require_valid(b, "iou rhs");
  const double inter = intersection_area(a.corners(), b.corners());
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

double giou(const Box& a, const Box& b) {
  require_valid(a, "giou lhs");
  require_valid(b, "giou rhs");
  const Corners ca = a.corners();
  const Corners cb = b.corners();
  const double inter = intersection_area(ca, cb);
  const double uni = a.area() + b.area() - inter;
  const double hull = (std::max(ca.x2, cb.x2) - std::min(ca.x1, cb.x1)) *
                      (std::max(ca.y2, cb.y2) - std::min(ca.y1, cb.y1));
  return inter / uni - (hull - uni) / hull;
}

double disp(const Box& a, const Box& b) {
  require_valid(a, "disp lhs");
  require_valid(b, "disp rhs");
  const Corners ca = a.corners();
  const Corners cb = b.corners();
  return (std::abs(ca.x1 - cb.x1) + std::abs(ca.y1 - cb.y1) + std::abs(ca.x2 - cb.x2) +
          std::abs(ca.y2 - cb.y2)) /
         4.0;
}

bool contains(const Box& outer, const Box& inner, double tol) {
  const Corners o = outer.corners();
  const Corners i = inner.corners();
  return o.x1 <= i.x1 + tol && o.y1 <= i.y1 + tol && o.x2 >= i.x2 - tol && o.y2 >= i.y2 - tol;
}

Box derive_view(const Box& crop, Orientation orientation, double frame_aspect) {
  require_valid(crop, "crop");
  if (!(frame_aspect > 0.0) || !std::isfinite(frame_aspect)) {
    throw std::invalid_argument("frame aspect must be positive");
  }
  // Camera ratio expressed in normalized units of the frame.
  const double ratio = camera_ratio(orientation) / frame_aspect;
  Box v = crop;
  if (crop.w / crop.h >= ratio) {
    v.h = crop.w / ratio;
  } else {
    v.w = crop.h * ratio;
  }
  return v;
}

Box to_frame(const Box& box, const Box& frame) {
  require_valid(frame, "frame");
  const double left = frame.x - 0.5 * frame.w;
  const double top = frame.y - 0.5 * frame.h;
  return {(box.x - left) / frame.w, (box.y - top) / frame.h, box.w / frame.w, box.h / frame.h};
}

Box from_frame(const Box& box, const Box& frame) {
  require_valid(frame, "frame");
  const double left = frame.x - 0.5 * frame.w;
  const double top = frame.y - 0.5 * frame.h;
  return {left + box.x * frame.w, top + box.y * frame.h, box.w * frame.w, box.h * frame.h};
}

Box clamp_to_world(const Box& view, Orientation /*orientation*/) {
  require_valid(view, "view");
  Box v = view;
  const double oversize = std::max(v.w, v.h);
  if (oversize > 1.0) {
    v.w /= oversize;
    v.h /= oversize;
    if (view.w > 1.0) v.x = 0.5;
    if (view.h > 1.0) v.y = 0.5;
  }
  v.x = std::clamp(v.x, 0.5 * v.w, 1.0 - 0.5 * v.w);
  v.y = std::clamp(v.y, 0.5 * v.h, 1.0 - 0.5 * v.h);
  return v;
}

}  // namespace unic::geom
