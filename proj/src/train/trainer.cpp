// SPDX-License-Identifier: Apache-2.0
#include "train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nn/ops.hpp"

namespace unic::train {

using geom::Box;

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch_size must be positive");
  if (!(lr > 0 && backbone_lr >= 0 && weight_decay >= 0)) throw std::invalid_argument("invalid learning rates");
  if (!(ema_decay >= 0 && ema_decay <= 1)) throw std::invalid_argument("ema_decay must lie in [0, 1]");
  if (!(grad_clip >= 0)) throw std::invalid_argument("grad_clip must be non-negative");
  if (refine_views < 0) throw std::invalid_argument("refine_views must be non-negative");
  if (!(refine_jitter >= 0 && refine_jitter < 0.5)) throw std::invalid_argument("refine_jitter must lie in [0, 0.5)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument("config key " + key + ": not a number: " + v);
  return d;
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw std::invalid_argument("config key " + key + ": not an integer: " + v);
  return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config key " + key + ": not a boolean: " + v);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto i = [](int& f) -> Setter { return [&f](const std::string& k, const std::string& v) { f = to_int(k, v); }; };
  auto d = [](double& f) -> Setter { return [&f](const std::string& k, const std::string& v) { f = to_double(k, v); }; };
  auto fl = [](float& f) -> Setter {
    return [&f](const std::string& k, const std::string& v) { f = static_cast<float>(to_double(k, v)); };
  };
  auto b = [](bool& f) -> Setter { return [&f](const std::string& k, const std::string& v) { f = to_bool(k, v); }; };
  auto u = [](uint64_t& f) -> Setter {
    return [&f](const std::string& k, const std::string& v) {
      size_t pos = 0;
      try {
        f = std::stoull(v, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != v.size()) throw std::invalid_argument("config key " + k + ": not an unsigned integer: " + v);
    };
  };
  const std::map<std::string, Setter> keys = {
      {"model.input_h", i(c.model.input_h)},
      {"model.input_w", i(c.model.input_w)},
      {"model.stride", i(c.model.stride)},
      {"model.dim", i(c.model.dim)},
      {"model.heads", i(c.model.heads)},
      {"model.ffn_dim", i(c.model.ffn_dim)},
      {"model.encoder_layers", i(c.model.encoder_layers)},
      {"model.decoder_layers", i(c.model.decoder_layers)},
      {"model.fem_blocks", i(c.model.fem_blocks)},
      {"model.num_anchors", i(c.model.num_anchors)},
      {"model.margin", i(c.model.margin)},
      {"model.use_fem", b(c.model.use_fem)},
      {"model.seed", u(c.model.seed)},
      {"epochs", i(c.epochs)},
      {"batch_size", i(c.batch_size)},
      {"lr", d(c.lr)},
      {"backbone_lr", d(c.backbone_lr)},
      {"weight_decay", d(c.weight_decay)},
      {"lr_decay_epoch", i(c.lr_decay_epoch)},
      {"lr_decay_factor", d(c.lr_decay_factor)},
      {"label_switch_epoch", i(c.label_switch_epoch)},
      {"ema_decay", d(c.ema_decay)},
      {"lambda_iou", d(c.loss.iou)},
      {"lambda_focal", d(c.loss.focal)},
      {"lambda_extra", d(c.loss.extra)},
      {"extra_loss", [&c](const std::string&, const std::string& v) { c.loss.extra_type = parse_extra_loss(v); }},
      {"smooth_l1_delta", d(c.loss.smooth_l1_delta)},
      {"focal_gamma", d(c.loss.focal_gamma)},
      {"grad_clip", d(c.grad_clip)},
      {"augment", b(c.augment)},
      {"refine_views", i(c.refine_views)},
      {"refine_jitter", d(c.refine_jitter)},
      {"jitter_brightness", fl(c.jitter.brightness)},
      {"jitter_contrast", fl(c.jitter.contrast)},
      {"jitter_saturation", fl(c.jitter.saturation)},
      {"jitter_min_resize", fl(c.jitter.min_resize)},
      {"adam_beta1", d(c.adam.beta1)},
      {"adam_beta2", d(c.adam.beta2)},
      {"adam_eps", d(c.adam.eps)},
      {"seed", u(c.seed)},
  };
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key " + key);
    it->second(key, value);
  }
  c.adam.weight_decay = c.weight_decay;
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  const auto& m = c.model;
  o << "model.input_h = " << m.input_h << "\nmodel.input_w = " << m.input_w << "\nmodel.stride = " << m.stride
    << "\nmodel.dim = " << m.dim << "\nmodel.heads = " << m.heads << "\nmodel.ffn_dim = " << m.ffn_dim
    << "\nmodel.encoder_layers = " << m.encoder_layers << "\nmodel.decoder_layers = " << m.decoder_layers
    << "\nmodel.fem_blocks = " << m.fem_blocks << "\nmodel.num_anchors = " << m.num_anchors
    << "\nmodel.margin = " << m.margin << "\nmodel.use_fem = " << (m.use_fem ? "true" : "false")
    << "\nmodel.seed = " << m.seed << "\nepochs = " << c.epochs << "\nbatch_size = " << c.batch_size
    << "\nlr = " << c.lr << "\nbackbone_lr = " << c.backbone_lr << "\nweight_decay = " << c.weight_decay
    << "\nlr_decay_epoch = " << c.lr_decay_epoch << "\nlr_decay_factor = " << c.lr_decay_factor
    << "\nlabel_switch_epoch = " << c.label_switch_epoch << "\nema_decay = " << c.ema_decay
    << "\nlambda_iou = " << c.loss.iou << "\nlambda_focal = " << c.loss.focal << "\nlambda_extra = " << c.loss.extra
    << "\nextra_loss = " << to_string(c.loss.extra_type) << "\nsmooth_l1_delta = " << c.loss.smooth_l1_delta
    << "\nfocal_gamma = " << c.loss.focal_gamma << "\ngrad_clip = " << c.grad_clip
    << "\naugment = " << (c.augment ? "true" : "false") << "\nrefine_views = " << c.refine_views
    << "\nrefine_jitter = " << c.refine_jitter << "\njitter_brightness = " << c.jitter.brightness
    << "\njitter_contrast = " << c.jitter.contrast << "\njitter_saturation = " << c.jitter.saturation
    << "\njitter_min_resize = " << c.jitter.min_resize << "\nadam_beta1 = " << c.adam.beta1
    << "\nadam_beta2 = " << c.adam.beta2 << "\nadam_eps = " << c.adam.eps << "\nseed = " << c.seed << "\n";
  return o.str();
}

namespace {

TrainSample render_sample(const model::ModelConfig& cfg, const Box& viewport, const image::Raster& world) {
  const int m = cfg.effective_margin();
  const int s = cfg.stride;
  TrainSample t;
  t.init_view_world = viewport;
  const Box region = extended_region(viewport, cfg.grid_rows(), cfg.grid_cols(), m);
  t.region = image::crop_resize(world, region, (cfg.grid_cols() + 2 * m) * s, (cfg.grid_rows() + 2 * m) * s);
  return t;
}

}  // namespace

TrainSample make_train_sample(const model::ModelConfig& cfg, const data::Scene& scene, const image::Raster& world) {
  TrainSample t = render_sample(cfg, scene.init_view_world(), world);
  for (const auto& c : scene.crops) {
    t.gts.push_back(c.box);
    t.scores.push_back(c.score);
  }
  return t;
}

TrainSample make_refine_sample(const model::ModelConfig& cfg, const data::Scene& scene, const image::Raster& world,
                               double jitter, std::mt19937_64& rng) {
  if (scene.crops.empty()) throw std::invalid_argument("scene " + scene.image + " has no crops");
  std::uniform_real_distribution<double> u(-jitter, jitter);
  const Box best = scene.crop_world(scene.best_crop());
  const double scale = std::exp(u(rng));
  const Box around{best.x + u(rng) * best.w, best.y + u(rng) * best.h, best.w * scale, best.h * scale};
  const double aspect = static_cast<double>(scene.width) / scene.height;
  const Box viewport = geom::clamp_to_world(geom::derive_view(around, scene.orientation, aspect), scene.orientation);
  TrainSample t = render_sample(cfg, viewport, world);
  for (size_t i = 0; i < scene.crops.size(); ++i) {
    t.gts.push_back(geom::to_frame(scene.crop_world(i), viewport));
    t.scores.push_back(scene.crops[i].score);
  }
  return t;
}

std::vector<TrainSample> make_train_samples(const TrainConfig& cfg, const data::Scene& scene,
                                            const image::Raster& world, uint64_t index) {
  std::vector<TrainSample> out{make_train_sample(cfg.model, scene, world)};
  std::mt19937_64 rng(data::derive_seed(cfg.seed, index));
  for (int k = 0; k < cfg.refine_views; ++k) out.push_back(make_refine_sample(cfg.model, scene, world, cfg.refine_jitter, rng));
  return out;
}

std::vector<TrainSample> load_train_samples(const TrainConfig& cfg, const std::vector<data::Scene>& scenes) {
  std::vector<TrainSample> out;
  out.reserve(scenes.size() * static_cast<size_t>(1 + cfg.refine_views));
  for (size_t i = 0; i < scenes.size(); ++i) {
    for (auto& t : make_train_samples(cfg, scenes[i], image::load_rgb(scenes[i].image), i)) out.push_back(std::move(t));
  }
  return out;
}

SampleLoss sample_loss(const model::UnicModel& student, const EmaTeacher* teacher, const TrainSample& sample,
                       const TrainConfig& cfg, LabelMode mode, std::mt19937_64* aug_rng, double grad_scale) {
  const model::ModelConfig& mc = student.config();
  const int m = mc.effective_margin();
  const int s = mc.stride;
  const int gr = mc.grid_rows();
  const int gc = mc.grid_cols();
  if (sample.region.rows != (gr + 2 * m) * s || sample.region.cols != (gc + 2 * m) * s) {
    throw std::invalid_argument("training sample was rendered for a different model geometry");
  }

  image::Raster region = sample.region;
  image::Jitter jit;
  const bool aug = aug_rng != nullptr && cfg.augment;
  if (aug) {
    region = sample.region.clone();
    jit = image::sample_jitter(cfg.jitter, *aug_rng);
    image::apply_jitter(region, jit, false);
  }
  image::Raster view = region(cv::Rect(m * s, m * s, gc * s, gr * s)).clone();
  if (aug && jit.resize < 0.999f) image::apply_jitter(view, image::Jitter{1.0f, 1.0f, 1.0f, jit.resize}, true);
  const image::Planar input = image::to_planar(view);

  const model::TokenGrid z = student.encode(input);
  const model::TokenGrid ext = m > 0 ? student.extrapolate(z, m) : z;
  const model::RawPrediction raw = student.decode(ext);
  const model::PredictionSet preds = raw.to_set();
  const size_t n = preds.size();
  std::vector<double> logits(n);
  for (size_t i = 0; i < n; ++i) logits[i] = raw.conf_logits.value().data[i];

  SampleLoss out;
  const Assignment a = match(preds, sample.gts, cfg.loss);
  std::vector<double> targets;
  if (mode == LabelMode::SelfDistill) {
    if (!teacher) throw std::invalid_argument("self-distillation requires a teacher");
    const std::vector<double> tc = teacher->model().predict(input).confidences;
    targets = make_soft_labels(a, n, sample.scores, mode, &tc);
  } else {
    targets = make_soft_labels(a, n, sample.scores, mode);
  }
  out.comp = comp_loss(preds.boxes, logits, sample.gts, a, targets, cfg.loss);

  nn::Var padded;
  Eigen::MatrixXd extra_grad;
  if (m > 0 && teacher && cfg.loss.extra > 0) {
    const TeacherTargets tt = teacher_targets(teacher->model(), image::to_planar(region), sample.init_view_world, m);
    std::vector<int> idx;
    for (int c = 0; c < static_cast<int>(tt.valid.size()); ++c) {
      if (tt.valid[c]) idx.push_back(c);
    }
    if (!idx.empty()) {
      padded = nn::gather_rows(ext.tokens, idx);
      const int d = padded.cols();
      Eigen::MatrixXd pred(idx.size(), d), tgt(idx.size(), d);
      for (size_t r = 0; r < idx.size(); ++r) {
        for (int k = 0; k < d; ++k) {
          pred(r, k) = padded.value()(static_cast<int>(r), k);
          tgt(r, k) = tt.tokens(idx[r], k);
        }
      }
      out.extra = extra_loss(pred, tgt, cfg.loss.extra_type, cfg.loss.smooth_l1_delta, &extra_grad);
      out.extra_cells = static_cast<int>(idx.size());
    }
  }
  out.total = out.comp.total + cfg.loss.extra * out.extra;
  if (!std::isfinite(out.total)) throw std::domain_error("non-finite training loss");
  if (grad_scale <= 0) return out;

  // Chain box-space gradients through box = (2 s_x - 0.5, 2 s_y - 0.5, 2 s_w, 2 s_h).
  const nn::Tensor& sig = raw.box_sigmoid.value();
  nn::Tensor gbox({static_cast<int>(n), 4});
  nn::Tensor glogit({static_cast<int>(n), 1});
  for (size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 4; ++k) {
      const float sv = sig.data[i * 4 + k];
      const bool clamped = k >= 2 && (sv <= 1e-6f || sv >= 1.0f - 1e-6f);
      gbox.data[i * 4 + k] = clamped ? 0.0f : static_cast<float>(grad_scale * 2.0 * out.comp.box_grad[i][k]);
    }
    glogit.data[i] = static_cast<float>(grad_scale * out.comp.logit_grad[i]);
  }
  nn::Var root = nn::add(nn::dot_const(raw.box_sigmoid, gbox), nn::dot_const(raw.conf_logits, glogit));
  if (padded.defined()) {
    nn::Tensor ge(padded.shape());
    for (int r = 0; r < padded.rows(); ++r) {
      for (int k = 0; k < padded.cols(); ++k) {
        ge(r, k) = static_cast<float>(grad_scale * cfg.loss.extra * extra_grad(r, k));
      }
    }
    root = nn::add(root, nn::dot_const(padded, ge));
  }
  nn::backward(root);
  return out;
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j = {{"epoch", epoch},     {"L_comp", comp},     {"L_reg", reg},
                      {"L_IoU", iou},       {"L_focal", focal},   {"L_extra", extra},
                      {"lr_scale", lr_scale}, {"label_mode", std::string(to_string(label_mode))},
                      {"seconds", seconds}};
  j["eval"] = eval.is_null() ? nlohmann::json::object() : eval;
  return j;
}

Trainer::Trainer(TrainConfig cfg, std::vector<TrainSample> samples)
    : cfg_(std::move(cfg)), samples_(std::move(samples)), rng_(cfg_.seed) {
  cfg_.validate();
  if (samples_.empty()) throw std::invalid_argument("training set is empty");
  student_ = std::make_unique<model::UnicModel>(cfg_.model);
  teacher_ = std::make_unique<EmaTeacher>(*student_);
  nn::ParamGroup backbone{{}, cfg_.backbone_lr};
  nn::ParamGroup rest{{}, cfg_.lr};
  for (const auto& [name, p] : student_->params().items()) {
    (student_->is_backbone_param(name) ? backbone : rest).params.push_back(p);
    params_.push_back(p);
  }
  nn::AdamW::Options o = cfg_.adam;
  o.weight_decay = cfg_.weight_decay;
  opt_ = std::make_unique<nn::AdamW>(std::vector<nn::ParamGroup>{backbone, rest}, o);
}

EpochLog Trainer::run_epoch() {
  const auto t0 = std::chrono::steady_clock::now();
  EpochLog log;
  log.epoch = epoch_ + 1;
  log.label_mode = epoch_ >= cfg_.label_switch_epoch ? LabelMode::SelfDistill : LabelMode::Quality;
  log.lr_scale = epoch_ >= cfg_.lr_decay_epoch ? cfg_.lr_decay_factor : 1.0;
  opt_->set_lr_scale(log.lr_scale);

  std::vector<size_t> order(samples_.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  const size_t bs = static_cast<size_t>(cfg_.batch_size);
  for (size_t start = 0; start < order.size(); start += bs) {
    const size_t end = std::min(order.size(), start + bs);
    const double scale = 1.0 / static_cast<double>(end - start);
    student_->params().zero_grad();
    double batch_total = 0.0;
    for (size_t k = start; k < end; ++k) {
      const SampleLoss sl = sample_loss(*student_, teacher_.get(), samples_[order[k]], cfg_, log.label_mode, &rng_, scale);
      batch_total += sl.total * scale;
      log.comp += sl.comp.total;
      log.reg += sl.comp.reg;
      log.iou += sl.comp.iou;
      log.focal += sl.comp.focal;
      log.extra += sl.extra;
    }
    if (epoch_ == 0 && start == 0) first_batch_loss_ = batch_total;
    if (cfg_.grad_clip > 0) nn::clip_grad_norm(params_, cfg_.grad_clip);
    opt_->step();
    teacher_->update(*student_, cfg_.ema_decay);
  }
  const double inv = 1.0 / static_cast<double>(samples_.size());
  log.comp *= inv;
  log.reg *= inv;
  log.iou *= inv;
  log.focal *= inv;
  log.extra *= inv;
  ++epoch_;
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

model::UnicModel train(const TrainConfig& cfg, std::vector<TrainSample> samples, const TrainHooks& hooks,
                       const std::filesystem::path& checkpoint) {
  Trainer t(cfg, std::move(samples));
  for (int e = 0; e < cfg.epochs; ++e) {
    EpochLog log = t.run_epoch();
    if (hooks.eval) log.eval = hooks.eval(t.model());
    if (!checkpoint.empty()) {
      std::filesystem::path tmp = checkpoint;
      tmp += ".tmp";
      t.model().save(tmp);
      std::filesystem::rename(tmp, checkpoint);
    }
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  return t.model().clone();
}

}  // namespace unic::train
