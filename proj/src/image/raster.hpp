// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "geometry/box.hpp"

namespace unic::image {

/// 8-bit RGB raster. Thin alias over cv::Mat (CV_8UC3, RGB channel order).
using Raster = cv::Mat;

Raster load_rgb(const std::filesystem::path& path);
void save_rgb(const Raster& img, const std::filesystem::path& path);
/// Decodes an encoded image (PNG, JPEG, ...) held in memory.
Raster decode_rgb(const std::string& bytes);

/// Resample the region `view` (normalized to the raster) into an out_w x out_h
/// raster. Pixels outside the source are filled with black.
Raster crop_resize(const Raster& src, const geom::Box& view, int out_w, int out_h);

/// Planar float tensor (C x H x W) with per-channel standardization.
struct Planar {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<float> data;
};

Planar to_planar(const Raster& img);

struct JitterParams {
  float brightness = 0.2f;
  float contrast = 0.2f;
  float saturation = 0.2f;
  /// Lower bound of the intermediate resampling scale; 1 disables resize jitter.
  float min_resize = 0.75f;
};

/// One draw of jitter factors.
struct Jitter {
  float brightness = 1.0f;
  float contrast = 1.0f;
  float saturation = 1.0f;
  float resize = 1.0f;
};

Jitter sample_jitter(const JitterParams& p, std::mt19937_64& rng);
/// Applies color factors, then the down/up resampling round trip when `with_resize`.
void apply_jitter(Raster& img, const Jitter& j, bool with_resize = true);

/// Color jitter plus a down/up resampling round trip, applied in place.
void augment(Raster& img, const JitterParams& p, std::mt19937_64& rng);

}  // namespace unic::image
