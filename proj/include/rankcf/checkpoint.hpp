#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "rankcf/embedding.hpp"
#include "rankcf/model.hpp"

namespace rankcf {

struct CheckpointMeta {
  ModelConfig model;
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::uint64_t seed = 0;
  nlohmann::json extra;  // free-form (training metrics, epoch, ...)
};

// Layer-0 parameters as one JSON header line followed by raw little-endian
// float32 rows: items first, then users when the user block is trainable.
// Weights are quantized to float on save; a load therefore reproduces the
// exact float values byte for byte.
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const EmbeddingTable& e0);

struct Checkpoint {
  CheckpointMeta meta;
  EmbeddingTable e0;
};

Checkpoint load_checkpoint(const std::string& path);

// float32 roundtrip of every entry; the value a checkpoint would store
EmbeddingTable quantize_f32(const EmbeddingTable& t);

}  // namespace rankcf
