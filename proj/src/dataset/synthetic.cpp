// SPDX-License-Identifier: Apache-2.0
#include "dataset/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <opencv2/imgproc.hpp>

namespace unic::data {

using geom::Box;

void to_json(nlohmann::json& j, const SyntheticDescriptor& d) {
  j = {{"world_w", d.world_w},
       {"world_h", d.world_h},
       {"shape", d.shape == SyntheticDescriptor::Shape::Ellipse ? "ellipse" : "rect"},
       {"cx", d.cx},
       {"cy", d.cy},
       {"ow", d.ow},
       {"oh", d.oh},
       {"color", d.color},
       {"tint", d.tint},
       {"blue", d.blue},
       {"tx", d.tx},
       {"ty", d.ty},
       {"oracle_crop", d.oracle_crop.to_array()}};
}

void from_json(const nlohmann::json& j, SyntheticDescriptor& d) {
  d.world_w = j.at("world_w").get<int>();
  d.world_h = j.at("world_h").get<int>();
  d.shape = j.at("shape").get<std::string>() == "rect" ? SyntheticDescriptor::Shape::Rect
                                                      : SyntheticDescriptor::Shape::Ellipse;
  d.cx = j.at("cx").get<double>();
  d.cy = j.at("cy").get<double>();
  d.ow = j.at("ow").get<double>();
  d.oh = j.at("oh").get<double>();
  d.color = j.at("color").get<std::array<int, 3>>();
  d.tint = j.at("tint").get<std::array<double, 3>>();
  d.blue = j.at("blue").get<double>();
  d.tx = j.at("tx").get<double>();
  d.ty = j.at("ty").get<double>();
  d.oracle_crop = Box::from_array(j.at("oracle_crop").get<std::array<double, 4>>());
}

Box oracle_crop(const SyntheticDescriptor& d) {
  const double tx = d.cx < 0.5 ? 1.0 / 3.0 : 2.0 / 3.0;
  const double ty = d.cy < 0.5 ? 1.0 / 3.0 : 2.0 / 3.0;
  const double h = 3.0 * d.oh;
  const double w = 4.0 * d.oh * d.world_h / d.world_w;
  return {d.cx - tx * w + 0.5 * w, d.cy - ty * h + 0.5 * h, w, h};
}

double oracle_score(const SyntheticDescriptor& d, const Box& box) {
  geom::require_valid(box, "scored box");
  const geom::Corners c = box.corners();
  // Thirds placement: object centroid relative to the crop vs the designated point.
  const double px = (d.cx - c.x1) / box.w;
  const double py = (d.cy - c.y1) / box.h;
  const double thirds =
      std::min(1.0, std::hypot(px - d.tx, py - d.ty) / OracleWeights::thirds_scale);
  // Scale: crop height should be 3 object heights, width 4 (4:3 in pixels).
  const double h_ref = 3.0 * d.oh;
  const double w_ref = 4.0 * d.oh * d.world_h / d.world_w;
  const double scale = std::min(1.0, 0.5 * (std::abs(box.h / h_ref - 1.0) + std::abs(box.w / w_ref - 1.0)));
  // Truncation: fraction of the object's bounding box outside the crop.
  const Box obj{d.cx, d.cy, d.ow, d.oh};
  const geom::Corners o = obj.corners();
  const double iw = std::max(0.0, std::min(o.x2, c.x2) - std::max(o.x1, c.x1));
  const double ih = std::max(0.0, std::min(o.y2, c.y2) - std::max(o.y1, c.y1));
  const double trunc = 1.0 - (iw * ih) / obj.area();
  const double s = 5.0 - OracleWeights::k1 * thirds - OracleWeights::k2 * scale - OracleWeights::k3 * trunc;
  return std::clamp(s, 0.0, 5.0);
}

std::vector<Box> grid_anchors(int world_w, int world_h) {
  std::vector<Box> out;
  const double step = 1.0 / 16.0;
  for (double aspect : {4.0 / 3.0, 1.0, 3.0 / 4.0}) {
    for (double h : {0.5, 0.6, 0.7, 0.8, 0.9}) {
      const double w = h * aspect * world_h / world_w;
      if (w > 1.0) continue;
      const int nx = static_cast<int>(std::floor((1.0 - w) / step + 1e-9));
      const int ny = static_cast<int>(std::floor((1.0 - h) / step + 1e-9));
      for (int iy = 0; iy <= ny; ++iy) {
        for (int ix = 0; ix <= nx; ++ix) {
          out.push_back({ix * step + 0.5 * w, iy * step + 0.5 * h, w, h});
        }
      }
    }
  }
  return out;
}

image::Raster render_world(const SyntheticDescriptor& d) {
  image::Raster img(d.world_h, d.world_w, CV_8UC3);
  for (int r = 0; r < d.world_h; ++r) {
    auto* row = img.ptr<cv::Vec3b>(r);
    const double y = (r + 0.5) / d.world_h;
    for (int c = 0; c < d.world_w; ++c) {
      const double x = (c + 0.5) / d.world_w;
      row[c] = cv::Vec3b(cv::saturate_cast<uchar>(30.0 + 170.0 * x + d.tint[0]),
                         cv::saturate_cast<uchar>(30.0 + 170.0 * y + d.tint[1]),
                         cv::saturate_cast<uchar>(d.blue + 40.0 * (x - y) + d.tint[2]));
    }
  }
  const cv::Scalar color(d.color[0], d.color[1], d.color[2]);
  const cv::Point2d center(d.cx * d.world_w, d.cy * d.world_h);
  const cv::Size2d size(d.ow * d.world_w, d.oh * d.world_h);
  if (d.shape == SyntheticDescriptor::Shape::Ellipse) {
    cv::ellipse(img, cv::RotatedRect(cv::Point2f(center), cv::Size2f(size), 0.0f), color, cv::FILLED, cv::LINE_AA);
  } else {
    const cv::Point tl(static_cast<int>(std::lround(center.x - 0.5 * size.width)),
                       static_cast<int>(std::lround(center.y - 0.5 * size.height)));
    const cv::Point br(static_cast<int>(std::lround(center.x + 0.5 * size.width)) - 1,
                       static_cast<int>(std::lround(center.y + 0.5 * size.height)) - 1);
    cv::rectangle(img, tl, br, color, cv::FILLED);
  }
  return img;
}

SyntheticScene make_synthetic_scene(uint64_t seed, const SamplerOptions& opt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  for (;;) {
    SyntheticDescriptor d;
    d.oh = uni(0.2, 0.25);
    const double h = 3.0 * d.oh;
    const double w = 4.0 * d.oh * d.world_h / d.world_w;
    d.tx = u01(rng) < 0.5 ? 1.0 / 3.0 : 2.0 / 3.0;
    d.ty = u01(rng) < 0.5 ? 1.0 / 3.0 : 2.0 / 3.0;
    const double x1 = uni(0.0, 1.0 - w);
    const double y1 = uni(0.0, 1.0 - h);
    d.cx = x1 + d.tx * w;
    d.cy = y1 + d.ty * h;
    d.ow = d.oh * d.world_h / d.world_w * uni(0.6, 1.6);
    d.shape = u01(rng) < 0.5 ? SyntheticDescriptor::Shape::Ellipse : SyntheticDescriptor::Shape::Rect;
    for (double& t : d.tint) t = uni(-20.0, 20.0);
    d.blue = uni(60.0, 160.0);
    // Object color well separated from the background under it.
    const std::array<double, 3> bg{30.0 + 170.0 * d.cx + d.tint[0], 30.0 + 170.0 * d.cy + d.tint[1],
                                   d.blue + 40.0 * (d.cx - d.cy) + d.tint[2]};
    double dist = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      d.color[ch] = static_cast<int>(uni(0.0, 255.999));
      dist += (d.color[ch] - bg[ch]) * (d.color[ch] - bg[ch]);
    }
    const uint64_t view_seed = rng();
    if (std::sqrt(dist) < 120.0) continue;
    // The sampled thirds point must be the nearest one.
    if ((d.cx < 0.5) != (d.tx < 0.5) || (d.cy < 0.5) != (d.ty < 0.5)) continue;
    d.oracle_crop = oracle_crop(d);

    const double W = d.world_w;
    const double H = d.world_h;
    auto to_px = [&](const Box& b) { return Box{b.x * W, b.y * H, b.w * W, b.h * H}; };
    std::vector<CropAnnotation> crops{{to_px(d.oracle_crop), oracle_score(d, d.oracle_crop)}};
    for (const Box& a : grid_anchors(d.world_w, d.world_h)) {
      crops.push_back({to_px(a), oracle_score(d, a)});
    }
    try {
      SyntheticScene s;
      s.scene = convert_sample("world.png", d.world_w, d.world_h, crops, SourceKind::Synthetic, view_seed, opt);
      s.scene.oracle = d;
      s.oracle = d;
      s.world = render_world(d);
      return s;
    } catch (const InfeasibleError&) {
      continue;
    }
  }
}

std::vector<Scene> write_synthetic_dataset(const std::filesystem::path& dir, int count, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("scene count must be positive");
  std::filesystem::create_directories(dir);
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) {
    SyntheticScene s = make_synthetic_scene(derive_seed(seed, static_cast<uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05d.png", i);
    image::save_rgb(s.world, dir / name);
    s.scene.image = name;
    scenes.push_back(std::move(s.scene));
  }
  write_jsonl(dir / "scenes.jsonl", scenes);
  return scenes;
}

}  // namespace unic::data
