// SPDX-License-Identifier: Apache-2.0
#include "nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace unic::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian host");

namespace {
constexpr char kMagic[8] = {'U', 'N', 'I', 'C', 'C', 'K', 'P', 'T'};
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const ParamStore& params) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["config"] = config;
  header["tensors"] = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, v] : params.items()) {
    header["tensors"].push_back({{"name", name}, {"shape", v.shape()}, {"offset", offset}});
    offset += v.value().numel();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  const uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [_, v] : params.items()) {
    out.write(reinterpret_cast<const char*>(v.value().data.data()),
              static_cast<std::streamsize>(v.value().numel() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 30)) throw std::runtime_error("corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const nlohmann::json header = nlohmann::json::parse(text);
  if (header.value("version", "") != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version: " + header.value("version", "?"));
  }
  CheckpointData data;
  data.config = header.at("config");
  for (const auto& t : header.at("tensors")) {
    Tensor tensor(t.at("shape").get<std::vector<int>>());
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint payload");
    data.tensors.emplace_back(t.at("name").get<std::string>(), std::move(tensor));
  }
  return data;
}

void load_into(const CheckpointData& ckpt, ParamStore& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                             " tensors, model expects " + std::to_string(params.size()));
  }
  for (const auto& [name, tensor] : ckpt.tensors) {
    Var v = params.get(name);
    if (v.shape() != tensor.shape) {
      throw std::runtime_error("shape mismatch for " + name + ": " + tensor.shape_str() + " vs " +
                               v.value().shape_str());
    }
    v.mutable_value().data = tensor.data;
  }
}

}  // namespace unic::nn
