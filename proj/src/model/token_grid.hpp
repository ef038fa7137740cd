// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "nn/autograd.hpp"

namespace unic::model {

/// Placement of a token grid relative to the init-view grid of
/// ref_rows x ref_cols cells. `offset` cells of the grid lie before the
/// init view on each axis, so cell (r, c) is centered at
/// u = (c - offset + 0.5) / ref_cols, v = (r - offset + 0.5) / ref_rows.
struct GridFrame {
  int ref_rows = 0;
  int ref_cols = 0;
  int offset = 0;
};

/// Row-major grid of latent tokens with per-cell coordinates and visibility.
struct TokenGrid {
  nn::Var tokens;  // [rows * cols, dim]
  nn::Tensor coords;  // [rows * cols, 2] as (u, v)
  std::vector<uint8_t> visible;
  int rows = 0;
  int cols = 0;
  int margin = 0;

  int size() const { return rows * cols; }
  int dim() const { return tokens.cols(); }
  int visible_count() const;
  int padded_count() const { return size() - visible_count(); }
};

/// Cell-center coordinates for a rows x cols grid placed by `frame`.
nn::Tensor grid_coords(int rows, int cols, const GridFrame& frame);

}  // namespace unic::model
