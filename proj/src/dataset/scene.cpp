// SPDX-License-Identifier: Apache-2.0
#include "dataset/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "image/raster.hpp"

namespace unic::data {

using geom::Box;
using geom::Orientation;

std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::Gaicd: return "gaicd";
    case SourceKind::Cpc: return "cpc";
    case SourceKind::Synthetic: return "synthetic";
  }
  return "synthetic";
}

SourceKind parse_source_kind(std::string_view s) {
  if (s == "gaicd") return SourceKind::Gaicd;
  if (s == "cpc") return SourceKind::Cpc;
  if (s == "synthetic") return SourceKind::Synthetic;
  throw std::invalid_argument("unknown source kind: " + std::string(s));
}

double score_threshold(SourceKind k) { return k == SourceKind::Cpc ? 2.0 : 4.0; }

std::vector<CropAnnotation> filter_gt(const std::vector<CropAnnotation>& crops, SourceKind kind) {
  const double t = score_threshold(kind);
  std::vector<CropAnnotation> out;
  for (const auto& c : crops) {
    if (std::isfinite(c.score) && c.score > t) out.push_back(c);
  }
  return out;
}

std::vector<size_t> score_order(const std::vector<CropAnnotation>& crops) {
  std::vector<size_t> idx(crops.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return crops[a].score > crops[b].score; });
  return idx;
}

std::optional<std::string> check_init_view(int world_w, int world_h, const Box& v, Orientation o,
                                           const Box& gt_best_px, const InitViewLimits& lim) {
  constexpr double eps = 1e-6;
  const geom::Corners c = v.corners();
  if (!v.valid() || c.x1 < -eps || c.y1 < -eps || c.x2 > world_w + eps || c.y2 > world_h + eps) {
    return "world";
  }
  if (v.w < lim.alpha * world_w - eps || v.h < lim.alpha * world_h - eps) return "scale";
  if (std::abs(v.w - geom::camera_ratio(o) * v.h) > lim.ratio_tol_px) return "ratio";
  if (geom::iou(v, gt_best_px) < lim.beta) return "iou";
  return std::nullopt;
}

Box Scene::init_view_world() const {
  return {init_view.x / width, init_view.y / height, init_view.w / width, init_view.h / height};
}

size_t Scene::best_crop() const {
  if (crops.empty()) throw SceneError("scene has no crops");
  return score_order(crops).front();
}

Box Scene::crop_world(size_t i) const { return geom::from_frame(crops.at(i).box, init_view_world()); }

void Scene::validate(const InitViewLimits& lim) const {
  if (image.empty()) throw SceneError("scene image reference is empty");
  if (width <= 0 || height <= 0) throw SceneError("scene world size must be positive");
  if (!init_view.valid()) throw SceneError("init view is degenerate");
  if (crops.empty()) throw SceneError("scene has no ground-truth crops");
  const double t = score_threshold(source);
  for (const auto& c : crops) {
    if (!c.box.valid()) throw SceneError("crop box is degenerate: " + geom::to_string(c.box));
    if (!std::isfinite(c.score) || c.score <= t) {
      throw SceneError("crop score " + std::to_string(c.score) + " not above threshold " +
                       std::to_string(t));
    }
  }
  Box best = crop_world(best_crop());
  best = {best.x * width, best.y * height, best.w * width, best.h * height};
  if (auto bad = check_init_view(width, height, init_view, orientation, best, lim)) {
    throw SceneError("init view violates the " + *bad + " constraint");
  }
}

InfeasibleError::InfeasibleError(std::string constraint, long draws)
    : std::runtime_error("no admissible init view after " + std::to_string(draws) +
                         " draws; most frequent failure: " + constraint),
      constraint_(std::move(constraint)),
      draws_(draws) {}

InitViewSample sample_init_view(int world_w, int world_h, const Box& gt_best_px, uint64_t seed,
                                const SamplerOptions& opt) {
  if (world_w <= 0 || world_h <= 0) throw std::invalid_argument("world size must be positive");
  geom::require_valid(gt_best_px, "best ground truth");
  const Orientation native = world_w >= world_h ? Orientation::Landscape : Orientation::Portrait;
  const Orientation flipped = native == Orientation::Landscape ? Orientation::Portrait : Orientation::Landscape;
  const InitViewLimits& lim = opt.limits;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::map<std::string, long> failures;
  for (long draw = 0; draw < opt.max_draws; ++draw) {
    const Orientation o = u01(rng) < opt.match_orientation ? native : flipped;
    const double r = geom::camera_ratio(o);
    const double h_lo = std::max(lim.alpha * world_h, lim.alpha * world_w / r);
    const double h_hi = std::min(static_cast<double>(world_h), world_w / r);
    const double a = u01(rng);
    const double px = u01(rng);
    const double py = u01(rng);
    if (h_lo > h_hi) {
      ++failures["scale"];
      continue;
    }
    const double h = h_lo + a * (h_hi - h_lo);
    const double w = r * h;
    const Box v{0.5 * w + px * (world_w - w), 0.5 * h + py * (world_h - h), w, h};
    if (auto bad = check_init_view(world_w, world_h, v, o, gt_best_px, lim)) {
      ++failures[*bad];
      continue;
    }
    return {v, o, draw};
  }
  auto worst = std::max_element(failures.begin(), failures.end(),
                                [](const auto& a, const auto& b) { return a.second < b.second; });
  throw InfeasibleError(worst == failures.end() ? "none" : worst->first, opt.max_draws);
}

Scene convert_sample(const std::string& image, int world_w, int world_h,
                     const std::vector<CropAnnotation>& world_crops, SourceKind kind, uint64_t seed,
                     const SamplerOptions& opt) {
  if (image.empty()) throw std::invalid_argument("missing image reference");
  std::vector<CropAnnotation> kept = filter_gt(world_crops, kind);
  if (kept.empty()) throw std::invalid_argument("no crop above the score threshold");
  const Box best = kept[score_order(kept).front()].box;
  const InitViewSample s = sample_init_view(world_w, world_h, best, seed, opt);

  Scene scene;
  scene.image = image;
  scene.width = world_w;
  scene.height = world_h;
  scene.init_view = s.view;
  scene.orientation = s.orientation;
  scene.source = kind;
  for (const auto& c : kept) scene.crops.push_back({geom::to_frame(c.box, s.view), c.score});
  return scene;
}

uint64_t derive_seed(uint64_t seed, uint64_t index) {
  // splitmix64 finalizer over seed xor index
  uint64_t z = (seed ^ index) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

nlohmann::json box_json(const Box& b) { return nlohmann::json::array({b.x, b.y, b.w, b.h}); }

Box json_box(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw SceneError("box must be an array of 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json crops = nlohmann::json::array();
  for (const auto& c : s.crops) crops.push_back({{"box", box_json(c.box)}, {"score", c.score}});
  nlohmann::json j = {{"image", s.image},
                      {"width", s.width},
                      {"height", s.height},
                      {"init_view", box_json(s.init_view)},
                      {"orientation", std::string(geom::to_string(s.orientation))},
                      {"crops", crops},
                      {"source", std::string(to_string(s.source))}};
  if (!s.oracle.is_null()) j["oracle"] = s.oracle;
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  try {
    s.image = j.at("image").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.init_view = json_box(j.at("init_view"));
    s.orientation = geom::parse_orientation(j.at("orientation").get<std::string>());
    for (const auto& c : j.at("crops")) s.crops.push_back({json_box(c.at("box")), c.at("score").get<double>()});
    s.source = parse_source_kind(j.at("source").get<std::string>());
    if (j.contains("oracle")) s.oracle = j.at("oracle");
  } catch (const nlohmann::json::exception& e) {
    throw SceneError(std::string("malformed scene record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SceneError(std::string("malformed scene record: ") + e.what());
  }
  return s;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const auto& s : scenes) out << scene_to_json(s).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Scene> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<Scene> scenes;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Scene s = scene_from_json(nlohmann::json::parse(line));
      s.validate();
      if (std::filesystem::path(s.image).is_relative()) s.image = (base / s.image).string();
      scenes.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw SceneError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return scenes;
}

std::vector<Scene> build_dataset(const std::filesystem::path& dir, SourceKind kind, uint64_t seed,
                                 BuildStats* stats) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (e.is_regular_file() && (ext == ".jpg" || ext == ".jpeg" || ext == ".png")) images.push_back(e.path());
  }
  std::sort(images.begin(), images.end());

  BuildStats st;
  std::vector<Scene> out;
  for (size_t i = 0; i < images.size(); ++i) {
    const fs::path& img = images[i];
    fs::path ann = img;
    ann.replace_extension(".txt");
    if (!fs::exists(ann)) continue;
    ++st.images;
    std::ifstream in(ann);
    std::vector<CropAnnotation> crops;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      double x1, y1, x2, y2, score;
      if (!(ls >> x1 >> y1 >> x2 >> y2 >> score)) {
        throw std::runtime_error("malformed annotation row in " + ann.string() + ": " + line);
      }
      crops.push_back({Box::from_corners({x1, y1, x2, y2}), score});
    }
    try {
      const image::Raster raster = image::load_rgb(img);
      Scene s = convert_sample(img.filename().string(), raster.cols, raster.rows, crops, kind,
                               derive_seed(seed, i));
      out.push_back(std::move(s));
    } catch (const InfeasibleError&) {
      ++st.skipped;
    } catch (const std::invalid_argument&) {
      ++st.skipped;
    }
  }
  st.written = out.size();
  if (stats) *stats = st;
  return out;
}

}  // namespace unic::data
