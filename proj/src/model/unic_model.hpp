// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "geometry/box.hpp"
#include "image/raster.hpp"
#include "model/config.hpp"
#include "model/token_grid.hpp"
#include "nn/layers.hpp"

namespace unic::model {

/// Candidate crops in the init-view frame with their confidences.
struct PredictionSet {
  std::vector<geom::Box> boxes;
  std::vector<double> confidences;

  size_t size() const { return boxes.size(); }
  /// Index of the most confident candidate (first on ties).
  size_t top() const;
  /// Indices sorted by descending confidence (stable).
  std::vector<size_t> ranking() const;
};

/// Differentiable decoder output.
struct RawPrediction {
  /// [n,4] sigmoid outputs s; box = (2 s_x - 0.5, 2 s_y - 0.5, 2 s_w, 2 s_h).
  nn::Var box_sigmoid;
  /// [n,1] confidence logits; confidence = sigmoid(logit).
  nn::Var conf_logits;
  /// Token grid the decoder attended to.
  TokenGrid memory;

  PredictionSet to_set() const;
};

geom::Box box_from_sigmoid(const float* s);

/// Image -> candidate crops network: strided conv backbone, transformer
/// encoder, feature extrapolation module and a conditional decoder with
/// learnable anchors.
class UnicModel {
 public:
  explicit UnicModel(ModelConfig cfg);
  // Layers hold shared parameter handles; copies would alias them.
  UnicModel(const UnicModel&) = delete;
  UnicModel& operator=(const UnicModel&) = delete;
  UnicModel(UnicModel&&) = default;
  UnicModel& operator=(UnicModel&&) = default;

  /// Independent model with identical configuration and parameter values.
  UnicModel clone() const;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  /// Anchor embeddings [n, dim].
  const nn::Var& anchors() const { return anchors_; }
  /// Names of parameters that belong to the convolutional backbone.
  bool is_backbone_param(const std::string& name) const;

  /// Backbone + encoder. The image height and width must be multiples of the
  /// stride; `frame` places the grid (default: the grid is the init view).
  TokenGrid encode(const image::Planar& img) const;
  TokenGrid encode(const image::Planar& img, const GridFrame& frame) const;

  /// Extends an all-visible grid by `margin` cells per side, filling the new
  /// cells from the mask token; visible tokens pass through unchanged.
  TokenGrid extrapolate(const TokenGrid& z, int margin) const;

  RawPrediction decode(const TokenGrid& z) const;
  RawPrediction decode(const TokenGrid& z, const nn::Var& anchors) const;

  /// encode -> extrapolate(configured margin, skipped when the module is off) -> decode.
  RawPrediction forward(const image::Planar& img) const;
  /// Inference without graph recording.
  PredictionSet predict(const image::Planar& img) const;
  PredictionSet predict(const image::Raster& img) const;

  /// Resizes an RGB raster to the model input resolution.
  image::Planar prepare(const image::Raster& img) const;
  /// Renders the normalized region `view` of `world` at the model input resolution.
  image::Planar prepare_view(const image::Raster& world, const geom::Box& view) const;

  void save(const std::filesystem::path& path) const;
  static UnicModel load(const std::filesystem::path& path);

 private:
  struct EncoderLayer {
    nn::LayerNorm ln1, ln2;
    nn::MultiHeadAttention attn;
    nn::FeedForward ffn;
  };
  struct FemBlock {
    nn::LayerNorm ln1, ln2, ln3;
    nn::MultiHeadAttention self_attn, cross_attn;
    nn::FeedForward ffn;
  };
  struct DecoderLayer {
    nn::LayerNorm ln1, ln2, ln3;
    nn::MultiHeadAttention self_attn, cross_attn;
    nn::Linear spatial_scale;
    nn::FeedForward ffn;
  };

  void check_input(const image::Planar& img) const;

  ModelConfig cfg_;
  nn::ParamStore params_;
  std::vector<nn::Conv2d> backbone_;
  nn::LayerNorm token_norm_;
  std::vector<EncoderLayer> encoder_;
  nn::LayerNorm encoder_norm_;
  nn::Var mask_token_;
  std::vector<FemBlock> fem_;
  nn::LayerNorm fem_norm_;
  nn::Var anchors_;
  nn::Linear ref_point_;
  std::vector<DecoderLayer> decoder_;
  nn::LayerNorm decoder_norm_;
  nn::Linear box_mlp1_, box_mlp2_, box_out_;
  nn::Linear conf_head_;
};

}  // namespace unic::model
