// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "nn/layers.hpp"

namespace unic::nn {

inline constexpr const char* kCheckpointVersion = "unic-v1";

/// Checkpoint container layout:
///   8-byte magic "UNICCKPT"
///   uint64 little-endian header length
///   UTF-8 JSON header {"version", "config", "tensors":[{"name","shape","offset"}]}
///   float32 little-endian payload, tensors in header order
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const ParamStore& params);

struct CheckpointData {
  nlohmann::json config;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Copies tensors into a store with matching names and shapes; throws on any mismatch.
void load_into(const CheckpointData& ckpt, ParamStore& params);

}  // namespace unic::nn
