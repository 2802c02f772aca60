#pragma once

#include <string>

#include "model.hpp"

namespace wswm {

// Self-describing binary container:
//   "NVCK", u16 version=1, u32 section count, then per section:
//   u16 name length, name bytes, u8 dtype (0: f32 tensor, 1: utf-8 text),
//   u8 rank, u32 dims..., little-endian payload.
// The "config" text section holds the architecture and training metadata;
// parameter sections are named after the Param they fill. Writes are atomic.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

// Serialized key=value form of spec + meta (the "config" section payload).
std::string encode_model_config(const ModelState& state);

}  // namespace wswm
