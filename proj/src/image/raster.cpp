// SPDX-License-Identifier: Apache-2.0
#include "image/raster.hpp"

#include <algorithm>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace unic::image {

namespace {
constexpr float kMean[3] = {0.485f, 0.456f, 0.406f};
constexpr float kStd[3] = {0.229f, 0.224f, 0.225f};
}  // namespace

Raster load_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot read image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

void save_rgb(const Raster& img, const std::filesystem::path& path) {
  cv::Mat bgr;
  cv::cvtColor(img, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) {
    throw std::runtime_error("cannot write image: " + path.string());
  }
}

Raster decode_rgb(const std::string& bytes) {
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::invalid_argument("cannot decode image data");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

Raster crop_resize(const Raster& src, const geom::Box& view, int out_w, int out_h) {
  geom::require_valid(view, "crop view");
  if (src.empty() || out_w <= 0 || out_h <= 0) throw std::invalid_argument("crop_resize: empty geometry");
  const geom::Corners c = view.corners();
  auto warp = [&](const cv::Mat& img) {
    const double sx = view.w * img.cols / out_w;
    const double sy = view.h * img.rows / out_h;
    // Maps destination pixel centers onto source pixel centers.
    cv::Mat m = (cv::Mat_<double>(2, 3) << sx, 0.0, c.x1 * img.cols + 0.5 * sx - 0.5, 0.0, sy,
                 c.y1 * img.rows + 0.5 * sy - 0.5);
    Raster out;
    cv::warpAffine(img, out, m, cv::Size(out_w, out_h), cv::INTER_LINEAR | cv::WARP_INVERSE_MAP,
                   cv::BORDER_CONSTANT, cv::Scalar(0, 0, 0));
    return out;
  };
  // warpAffine has no area filter; pre-shrink strongly minified sources.
  const double shrink = std::min(view.w * src.cols / out_w, view.h * src.rows / out_h);
  if (shrink > 1.5) {
    cv::Mat small;
    cv::resize(src, small, cv::Size(), 1.0 / shrink, 1.0 / shrink, cv::INTER_AREA);
    return warp(small);
  }
  return warp(src);
}

Planar to_planar(const Raster& img) {
  if (img.type() != CV_8UC3) throw std::invalid_argument("to_planar expects an 8-bit RGB raster");
  Planar p;
  p.height = img.rows;
  p.width = img.cols;
  p.data.resize(static_cast<size_t>(3) * p.height * p.width);
  const size_t plane = static_cast<size_t>(p.height) * p.width;
  for (int r = 0; r < img.rows; ++r) {
    const auto* row = img.ptr<cv::Vec3b>(r);
    for (int c = 0; c < img.cols; ++c) {
      const size_t idx = static_cast<size_t>(r) * p.width + c;
      for (int ch = 0; ch < 3; ++ch) {
        p.data[ch * plane + idx] = (row[c][ch] / 255.0f - kMean[ch]) / kStd[ch];
      }
    }
  }
  return p;
}

Jitter sample_jitter(const JitterParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Jitter j;
  j.brightness = 1.0f + p.brightness * u(rng);
  j.contrast = 1.0f + p.contrast * u(rng);
  j.saturation = 1.0f + p.saturation * u(rng);
  std::uniform_real_distribution<float> rs(p.min_resize, 1.0f);
  j.resize = rs(rng);
  return j;
}

void apply_jitter(Raster& img, const Jitter& j, bool with_resize) {
  cv::Mat f;
  img.convertTo(f, CV_32FC3, 1.0 / 255.0);
  const cv::Scalar mean = cv::mean(f);
  const float gray_mean = static_cast<float>((mean[0] + mean[1] + mean[2]) / 3.0);
  for (int r = 0; r < f.rows; ++r) {
    auto* row = f.ptr<cv::Vec3f>(r);
    for (int col = 0; col < f.cols; ++col) {
      cv::Vec3f& px = row[col];
      const float g = (px[0] + px[1] + px[2]) / 3.0f;
      for (int ch = 0; ch < 3; ++ch) {
        float v = g + j.saturation * (px[ch] - g);
        v = gray_mean + j.contrast * (v - gray_mean);
        px[ch] = v * j.brightness;
      }
    }
  }
  if (with_resize && j.resize < 0.999f) {
    cv::Mat small;
    cv::resize(f, small, cv::Size(), j.resize, j.resize, cv::INTER_AREA);
    cv::resize(small, f, img.size(), 0, 0, cv::INTER_LINEAR);
  }
  f.convertTo(img, CV_8UC3, 255.0);
}

void augment(Raster& img, const JitterParams& p, std::mt19937_64& rng) {
  apply_jitter(img, sample_jitter(p, rng), true);
}

}  // namespace unic::image
