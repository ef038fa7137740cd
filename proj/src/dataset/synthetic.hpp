// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "dataset/scene.hpp"
#include "image/raster.hpp"

namespace unic::data {

/// Generator parameters of a synthetic world: a gradient background and one
/// salient object. Geometry is world-normalized.
struct SyntheticDescriptor {
  enum class Shape { Ellipse, Rect };

  int world_w = 512;
  int world_h = 512;
  Shape shape = Shape::Ellipse;
  double cx = 0.5;  // object centroid
  double cy = 0.5;
  double ow = 0.2;  // object extent
  double oh = 0.2;
  std::array<int, 3> color{255, 255, 255};
  std::array<double, 3> tint{0.0, 0.0, 0.0};
  double blue = 110.0;
  /// Rule-of-thirds point (crop-relative) the object should sit on.
  double tx = 1.0 / 3.0;
  double ty = 1.0 / 3.0;
  geom::Box oracle_crop;
};

void to_json(nlohmann::json& j, const SyntheticDescriptor& d);
void from_json(const nlohmann::json& j, SyntheticDescriptor& d);

/// Oracle constants: score = 5 - k1 * thirds - k2 * scale - k3 * truncation.
struct OracleWeights {
  static constexpr double k1 = 3.0;
  static constexpr double k2 = 1.0;
  static constexpr double k3 = 2.0;
  /// Crop-relative distance at which the thirds error saturates.
  static constexpr double thirds_scale = 0.1;
};

/// Composition score of a world-normalized box, in [0, 5].
double oracle_score(const SyntheticDescriptor& d, const geom::Box& box);

/// Minimal 4:3 crop placing the object centroid on the thirds point nearest
/// to it (judged from the world center) with the object spanning a third of
/// the crop height.
geom::Box oracle_crop(const SyntheticDescriptor& d);

/// Dense candidate crops inside the world, world-normalized.
std::vector<geom::Box> grid_anchors(int world_w, int world_h);

image::Raster render_world(const SyntheticDescriptor& d);

struct SyntheticScene {
  Scene scene;
  SyntheticDescriptor oracle;
  image::Raster world;
};

/// Deterministic per seed. Ground truth is the oracle crop plus every grid
/// anchor scoring above the synthetic threshold.
SyntheticScene make_synthetic_scene(uint64_t seed, const SamplerOptions& opt = {});

/// Writes `count` worlds as PNG files and `scenes.jsonl` into `dir`.
std::vector<Scene> write_synthetic_dataset(const std::filesystem::path& dir, int count, uint64_t seed);

}  // namespace unic::data
