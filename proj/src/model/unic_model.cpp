// SPDX-License-Identifier: Apache-2.0
#include "model/unic_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nn/checkpoint.hpp"

namespace unic::model {

using nn::Tensor;
using nn::Var;

int ModelConfig::effective_margin() const {
  if (!use_fem) return 0;
  if (margin >= 0) return margin;
  return static_cast<int>(std::ceil(0.25 * std::min(grid_rows(), grid_cols())));
}

void ModelConfig::validate() const {
  if (stride != 8 && stride != 16) throw std::invalid_argument("stride must be 8 or 16");
  if (input_h <= 0 || input_w <= 0 || input_h % stride || input_w % stride) {
    throw std::invalid_argument("input size must be a positive multiple of the stride");
  }
  if (dim <= 0 || dim % 4 || heads <= 0 || dim % heads) {
    throw std::invalid_argument("dim must be divisible by 4 and by heads");
  }
  if (encoder_layers < 0 || decoder_layers < 1 || fem_blocks < 0 || num_anchors < 1 || ffn_dim < 1) {
    throw std::invalid_argument("invalid layer counts");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"input_h", c.input_h},         {"input_w", c.input_w},
       {"stride", c.stride},           {"dim", c.dim},
       {"heads", c.heads},             {"ffn_dim", c.ffn_dim},
       {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
       {"fem_blocks", c.fem_blocks},   {"num_anchors", c.num_anchors},
       {"margin", c.margin},           {"use_fem", c.use_fem},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.input_h = j.value("input_h", d.input_h);
  c.input_w = j.value("input_w", d.input_w);
  c.stride = j.value("stride", d.stride);
  c.dim = j.value("dim", d.dim);
  c.heads = j.value("heads", d.heads);
  c.ffn_dim = j.value("ffn_dim", d.ffn_dim);
  c.encoder_layers = j.value("encoder_layers", d.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.fem_blocks = j.value("fem_blocks", d.fem_blocks);
  c.num_anchors = j.value("num_anchors", d.num_anchors);
  c.margin = j.value("margin", d.margin);
  c.use_fem = j.value("use_fem", d.use_fem);
  c.seed = j.value("seed", d.seed);
}

int TokenGrid::visible_count() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), uint8_t{1}));
}

Tensor grid_coords(int rows, int cols, const GridFrame& frame) {
  Tensor t({rows * cols, 2});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      t(r * cols + c, 0) = static_cast<float>((c - frame.offset + 0.5) / frame.ref_cols);
      t(r * cols + c, 1) = static_cast<float>((r - frame.offset + 0.5) / frame.ref_rows);
    }
  }
  return t;
}

size_t PredictionSet::top() const {
  if (confidences.empty()) throw std::logic_error("empty prediction set");
  return static_cast<size_t>(std::max_element(confidences.begin(), confidences.end()) -
                             confidences.begin());
}

std::vector<size_t> PredictionSet::ranking() const {
  std::vector<size_t> idx(confidences.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return confidences[a] > confidences[b]; });
  return idx;
}

geom::Box box_from_sigmoid(const float* s) {
  // Keep sizes strictly positive when the sigmoid saturates in float.
  auto sz = [](float v) { return 2.0 * std::clamp(static_cast<double>(v), 1e-6, 1.0 - 1e-6); };
  return {2.0 * s[0] - 0.5, 2.0 * s[1] - 0.5, sz(s[2]), sz(s[3])};
}

PredictionSet RawPrediction::to_set() const {
  PredictionSet set;
  const Tensor& b = box_sigmoid.value();
  const Tensor& c = conf_logits.value();
  for (int i = 0; i < b.rows(); ++i) {
    set.boxes.push_back(box_from_sigmoid(&b.data[static_cast<size_t>(i) * 4]));
    set.confidences.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(c.data[i]))));
  }
  return set;
}

namespace {

Tensor normal_tensor(std::vector<int> shape, float stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> nd(0.0f, stddev);
  for (float& v : t.data) v = nd(rng);
  return t;
}

}  // namespace

UnicModel::UnicModel(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const int d = cfg_.dim;

  const int widths[4] = {std::max(8, d / 4), std::max(8, d / 2), d, d};
  int in_ch = 3;
  for (int i = 0; i < 4; ++i) {
    const int s = (cfg_.stride == 8 && i == 3) ? 1 : 2;
    backbone_.emplace_back(params_, "backbone.conv" + std::to_string(i), in_ch, widths[i], 3, s, 1, rng);
    in_ch = widths[i];
  }
  token_norm_ = nn::LayerNorm(params_, "encoder.token_norm", d);
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    const std::string p = "encoder.layer" + std::to_string(i);
    encoder_.push_back({nn::LayerNorm(params_, p + ".ln1", d), nn::LayerNorm(params_, p + ".ln2", d),
                        nn::MultiHeadAttention(params_, p + ".attn", d, cfg_.heads, rng),
                        nn::FeedForward(params_, p + ".ffn", d, cfg_.ffn_dim, rng)});
  }
  encoder_norm_ = nn::LayerNorm(params_, "encoder.norm", d);

  if (cfg_.use_fem) {
    mask_token_ = params_.add("fem.mask_token", normal_tensor({1, d}, 0.02f, rng));
    for (int i = 0; i < cfg_.fem_blocks; ++i) {
      const std::string p = "fem.block" + std::to_string(i);
      fem_.push_back({nn::LayerNorm(params_, p + ".ln1", d), nn::LayerNorm(params_, p + ".ln2", d),
                      nn::LayerNorm(params_, p + ".ln3", d),
                      nn::MultiHeadAttention(params_, p + ".self_attn", d, cfg_.heads, rng),
                      nn::MultiHeadAttention(params_, p + ".cross_attn", d, cfg_.heads, rng),
                      nn::FeedForward(params_, p + ".ffn", d, cfg_.ffn_dim, rng)});
    }
    fem_norm_ = nn::LayerNorm(params_, "fem.norm", d);
  }

  anchors_ = params_.add("decoder.anchors", normal_tensor({cfg_.num_anchors, d}, 1.0f, rng));
  ref_point_ = nn::Linear(params_, "decoder.ref_point", d, 2, rng);
  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    const std::string p = "decoder.layer" + std::to_string(i);
    decoder_.push_back({nn::LayerNorm(params_, p + ".ln1", d), nn::LayerNorm(params_, p + ".ln2", d),
                        nn::LayerNorm(params_, p + ".ln3", d),
                        nn::MultiHeadAttention(params_, p + ".self_attn", d, cfg_.heads, rng),
                        nn::MultiHeadAttention(params_, p + ".cross_attn", d, cfg_.heads, rng),
                        nn::Linear(params_, p + ".spatial_scale", d, d, rng),
                        nn::FeedForward(params_, p + ".ffn", d, cfg_.ffn_dim, rng)});
  }
  decoder_norm_ = nn::LayerNorm(params_, "decoder.norm", d);
  box_mlp1_ = nn::Linear(params_, "head.box.fc1", d, d, rng);
  box_mlp2_ = nn::Linear(params_, "head.box.fc2", d, d, rng);
  box_out_ = nn::Linear(params_, "head.box.out", d, 4, rng);
  for (float& v : box_out_.weight.mutable_value().data) v *= 0.1f;
  conf_head_ = nn::Linear(params_, "head.conf", d, 1, rng);
  conf_head_.bias.mutable_value().data[0] = -2.0f;
}

UnicModel UnicModel::clone() const {
  UnicModel m(cfg_);
  for (size_t i = 0; i < params_.size(); ++i) {
    m.params_.items()[i].second.mutable_value().data = params_.items()[i].second.value().data;
  }
  return m;
}

bool UnicModel::is_backbone_param(const std::string& name) const {
  return name.rfind("backbone.", 0) == 0;
}

void UnicModel::check_input(const image::Planar& img) const {
  if (img.channels != 3) throw std::invalid_argument("model input must have 3 channels");
  if (img.height <= 0 || img.width <= 0 || img.height % cfg_.stride || img.width % cfg_.stride) {
    throw std::invalid_argument("input " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                " is not a multiple of stride " + std::to_string(cfg_.stride));
  }
  if (img.data.size() != static_cast<size_t>(3) * img.height * img.width) {
    throw std::invalid_argument("input buffer size mismatch");
  }
}

TokenGrid UnicModel::encode(const image::Planar& img) const {
  return encode(img, GridFrame{img.height / cfg_.stride, img.width / cfg_.stride, 0});
}

TokenGrid UnicModel::encode(const image::Planar& img, const GridFrame& frame) const {
  check_input(img);
  Var x = nn::constant(Tensor({3, img.height, img.width}, img.data));
  for (const auto& conv : backbone_) x = nn::relu(conv(x));
  const int rows = x.shape()[1];
  const int cols = x.shape()[2];
  Var tokens = nn::transpose(nn::reshape(x, {cfg_.dim, rows * cols}));
  tokens = token_norm_(tokens);

  TokenGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.margin = 0;
  grid.coords = grid_coords(rows, cols, frame);
  grid.visible.assign(static_cast<size_t>(rows) * cols, 1);

  const Var pos = nn::constant(nn::sine_embedding(grid.coords, cfg_.dim));
  for (const auto& layer : encoder_) {
    Var h = layer.ln1(tokens);
    Var qk = nn::add(h, pos);
    tokens = nn::add(tokens, layer.attn(qk, qk, h));
    tokens = nn::add(tokens, layer.ffn(layer.ln2(tokens)));
  }
  grid.tokens = encoder_norm_(tokens);
  return grid;
}

TokenGrid UnicModel::extrapolate(const TokenGrid& z, int margin) const {
  if (margin < 0) throw std::invalid_argument("negative extrapolation margin");
  if (z.margin != 0 || z.visible_count() != z.size()) {
    throw std::invalid_argument("extrapolate expects an all-visible grid");
  }
  if (margin == 0) return z;
  if (!cfg_.use_fem) throw std::logic_error("model was built without the extrapolation module");

  const int rows = z.rows + 2 * margin;
  const int cols = z.cols + 2 * margin;
  TokenGrid out;
  out.rows = rows;
  out.cols = cols;
  out.margin = margin;
  out.coords = grid_coords(rows, cols, GridFrame{z.rows, z.cols, margin});
  out.visible.assign(static_cast<size_t>(rows) * cols, 0);

  // Extended cell -> row of concat(visible, padded).
  std::vector<int> index(static_cast<size_t>(rows) * cols);
  std::vector<int> padded_cells;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int cell = r * cols + c;
      const int vr = r - margin;
      const int vc = c - margin;
      if (vr >= 0 && vr < z.rows && vc >= 0 && vc < z.cols) {
        out.visible[cell] = 1;
        index[cell] = vr * z.cols + vc;
      } else {
        index[cell] = z.size() + static_cast<int>(padded_cells.size());
        padded_cells.push_back(cell);
      }
    }
  }
  const int npad = static_cast<int>(padded_cells.size());
  Tensor pad_coords({npad, 2});
  for (int i = 0; i < npad; ++i) {
    pad_coords(i, 0) = out.coords(padded_cells[i], 0);
    pad_coords(i, 1) = out.coords(padded_cells[i], 1);
  }
  const Var pad_pos = nn::constant(nn::sine_embedding(pad_coords, cfg_.dim));
  const Var vis_pos = nn::constant(nn::sine_embedding(z.coords, cfg_.dim));
  const Var vis_keys = nn::add(z.tokens, vis_pos);

  Var pad = nn::add(nn::repeat_rows(mask_token_, npad), pad_pos);
  for (const auto& blk : fem_) {
    Var h = blk.ln1(pad);
    Var qk = nn::add(h, pad_pos);
    pad = nn::add(pad, blk.self_attn(qk, qk, h));
    h = blk.ln2(pad);
    pad = nn::add(pad, blk.cross_attn(nn::add(h, pad_pos), vis_keys, z.tokens));
    pad = nn::add(pad, blk.ffn(blk.ln3(pad)));
  }
  pad = fem_norm_(pad);
  out.tokens = nn::gather_rows(nn::concat_rows({z.tokens, pad}), index);
  return out;
}

RawPrediction UnicModel::decode(const TokenGrid& z) const { return decode(z, anchors_); }

RawPrediction UnicModel::decode(const TokenGrid& z, const Var& anchors) const {
  const int d = cfg_.dim;
  if (anchors.cols() != d) {
    throw std::invalid_argument("anchor dimension " + std::to_string(anchors.cols()) +
                                " does not match model dimension " + std::to_string(d));
  }
  if (z.dim() != d) throw std::invalid_argument("token dimension mismatch");
  const int n = anchors.rows();
  const Var mem = z.tokens;
  const Var mem_keys = nn::add(mem, nn::constant(nn::sine_embedding(z.coords, d)));

  const Var ref_logits = ref_point_(anchors);
  const Var ref = nn::add_rowvec(nn::scale(nn::sigmoid(ref_logits), 2.0f),
                                 nn::constant(Tensor({2}, -0.5f)));
  const Var ref_pos = nn::sine_embed(ref, d);

  Var tgt = nn::constant(Tensor({n, d}, 0.0f));
  for (const auto& layer : decoder_) {
    Var h = layer.ln1(tgt);
    Var qk = nn::add(h, anchors);
    tgt = nn::add(tgt, layer.self_attn(qk, qk, h));
    h = layer.ln2(tgt);
    // Conditional spatial query: content-dependent scaling of the reference embedding.
    Var query = nn::add(h, nn::mul(layer.spatial_scale(h), ref_pos));
    tgt = nn::add(tgt, layer.cross_attn(query, mem_keys, mem));
    tgt = nn::add(tgt, layer.ffn(layer.ln3(tgt)));
  }
  const Var out = decoder_norm_(tgt);

  const Var box_logits = box_out_(nn::relu(box_mlp2_(nn::relu(box_mlp1_(out)))));
  const Var center = nn::add(nn::slice_cols(box_logits, 0, 2), ref_logits);
  const Var size = nn::slice_cols(box_logits, 2, 4);

  RawPrediction pred;
  pred.box_sigmoid = nn::sigmoid(nn::concat_cols(center, size));
  pred.conf_logits = conf_head_(out);
  pred.memory = z;
  return pred;
}

RawPrediction UnicModel::forward(const image::Planar& img) const {
  TokenGrid z = encode(img);
  const int m = cfg_.effective_margin();
  if (m > 0) z = extrapolate(z, m);
  return decode(z);
}

PredictionSet UnicModel::predict(const image::Planar& img) const {
  nn::NoGradGuard guard;
  return forward(img).to_set();
}

image::Planar UnicModel::prepare(const image::Raster& img) const {
  return image::to_planar(image::crop_resize(img, geom::Box::unit(), cfg_.input_w, cfg_.input_h));
}

image::Planar UnicModel::prepare_view(const image::Raster& world, const geom::Box& view) const {
  return image::to_planar(image::crop_resize(world, view, cfg_.input_w, cfg_.input_h));
}

PredictionSet UnicModel::predict(const image::Raster& img) const { return predict(prepare(img)); }

void UnicModel::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, nlohmann::json(cfg_), params_);
}

UnicModel UnicModel::load(const std::filesystem::path& path) {
  const nn::CheckpointData data = nn::read_checkpoint(path);
  UnicModel m(data.config.get<ModelConfig>());
  nn::load_into(data, m.params_);
  return m;
}

}  // namespace unic::model
