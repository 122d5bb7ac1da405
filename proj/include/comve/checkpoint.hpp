#pragma once

#include "comve/model.hpp"

#include <filesystem>

namespace comve {

// Binary layout:
//   8 bytes   magic "CMVCKPT1"
//   8 bytes   header length H, little-endian uint64
//   H bytes   UTF-8 JSON: {"encoder": {...}, "task", "head", "template",
//             "params": [{"name", "shape"}, ...]}
//   then, per entry of "params" in order, its values as little-endian float64.
// The vocabulary is written next to the checkpoint as <path>.vocab.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

// Throws FormatError on a malformed file or a parameter/config mismatch.
Model load_checkpoint(const std::filesystem::path& path);

std::filesystem::path vocab_path_for(const std::filesystem::path& checkpoint);

// Copies parameter values (not gradients) between structurally equal models.
void copy_parameters(const Model& from, Model& to);

// FNV-1a over the raw parameter bytes; equal iff values are bit-identical
// (up to hash collisions).
std::uint64_t parameter_checksum(const Model& model);

} // namespace comve
