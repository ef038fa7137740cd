// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geometry/box.hpp"

namespace unic::data {

enum class SourceKind { Gaicd, Cpc, Synthetic };

std::string_view to_string(SourceKind k);
/// Accepts "gaicd", "cpc", "synthetic"; throws std::invalid_argument otherwise.
SourceKind parse_source_kind(std::string_view s);
/// Crops must score strictly above this value to count as ground truth.
double score_threshold(SourceKind k);

struct CropAnnotation {
  geom::Box box;
  double score = 0.0;
};

/// Keeps crops scoring above the source threshold, in input order.
std::vector<CropAnnotation> filter_gt(const std::vector<CropAnnotation>& crops, SourceKind kind);
/// Indices by descending score; equal scores keep input order.
std::vector<size_t> score_order(const std::vector<CropAnnotation>& crops);

struct InitViewLimits {
  double alpha = 0.7;  // minimum view/world extent per axis
  double beta = 0.7;   // minimum IoU with the best ground truth
  double ratio_tol_px = 1.0;
};

/// Name of the first violated init-view constraint ("scale", "iou", "ratio",
/// "world"), or nullopt. Boxes are in world pixels.
std::optional<std::string> check_init_view(int world_w, int world_h, const geom::Box& view_px,
                                           geom::Orientation o, const geom::Box& gt_best_px,
                                           const InitViewLimits& lim = {});

/// One framed sample built from an annotated image.
struct Scene {
  std::string image;
  int width = 0;
  int height = 0;
  /// World pixels, center form.
  geom::Box init_view;
  geom::Orientation orientation = geom::Orientation::Landscape;
  /// Init-view frame.
  std::vector<CropAnnotation> crops;
  SourceKind source = SourceKind::Synthetic;
  /// Optional generator description carried through persistence (synthetic scenes).
  nlohmann::json oracle;

  /// init_view normalized by the world size.
  geom::Box init_view_world() const;
  /// Highest-scored crop, first in order on ties.
  size_t best_crop() const;
  /// Crop i in world-normalized coordinates.
  geom::Box crop_world(size_t i) const;

  /// Throws SceneError on any violated invariant.
  void validate(const InitViewLimits& lim = {}) const;
};

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(std::string constraint, long draws);
  const std::string& constraint() const { return constraint_; }
  long draws() const { return draws_; }

 private:
  std::string constraint_;
  long draws_;
};

struct SamplerOptions {
  InitViewLimits limits;
  /// Probability of matching the world orientation (square worlds count as landscape).
  double match_orientation = 0.8;
  long max_draws = 10000;
};

struct InitViewSample {
  geom::Box view;  // world pixels
  geom::Orientation orientation = geom::Orientation::Landscape;
  long rejections = 0;
};

InitViewSample sample_init_view(int world_w, int world_h, const geom::Box& gt_best_px, uint64_t seed,
                                const SamplerOptions& opt = {});

/// Samples an init view against the best crop (after filtering) and re-expresses
/// the retained crops in its frame. `world_crops` are in world pixels.
Scene convert_sample(const std::string& image, int world_w, int world_h,
                     const std::vector<CropAnnotation>& world_crops, SourceKind kind, uint64_t seed,
                     const SamplerOptions& opt = {});

/// Per-item seed for batch builders.
uint64_t derive_seed(uint64_t seed, uint64_t index);

nlohmann::json scene_to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);

void write_jsonl(const std::filesystem::path& path, const std::vector<Scene>& scenes);
/// Reads and re-validates every record. Relative image paths are resolved
/// against the file's directory.
std::vector<Scene> read_jsonl(const std::filesystem::path& path);

/// Converts a directory of images with `<stem>.txt` sidecars holding
/// "x1 y1 x2 y2 score" pixel rows. Infeasible images are skipped and counted.
struct BuildStats {
  size_t images = 0;
  size_t written = 0;
  size_t skipped = 0;
};
std::vector<Scene> build_dataset(const std::filesystem::path& dir, SourceKind kind, uint64_t seed,
                                 BuildStats* stats = nullptr);

}  // namespace unic::data
