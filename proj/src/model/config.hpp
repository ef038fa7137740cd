// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace unic::model {

struct ModelConfig {
  int input_h = 192;
  int input_w = 256;
  /// Total backbone stride; 16 (four stride-2 blocks) or 8 (last block stride 1).
  int stride = 16;
  int dim = 128;
  int heads = 4;
  int ffn_dim = 256;
  int encoder_layers = 4;
  int decoder_layers = 4;
  int fem_blocks = 6;
  int num_anchors = 16;
  /// Extrapolation margin in cells per side; negative selects ceil(0.25 * min(rows, cols)).
  int margin = -1;
  /// When false the extrapolation module is bypassed (bounded cropper).
  bool use_fem = true;
  uint64_t seed = 7;

  int grid_rows() const { return input_h / stride; }
  int grid_cols() const { return input_w / stride; }
  int effective_margin() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace unic::model
