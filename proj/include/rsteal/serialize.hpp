#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsteal/nn/models.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

// Named-tensor checkpoint container ("RSTM" format): magic, version, then a
// table of {name, shape, f32 data} records. Endianness is native (the
// artifact targets a single host, not an interchange format).
void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path);

// Model checkpoints: every parameter and buffer by collected name.
void save_model(const std::string& path, nn::Model& model);
// Loads values into an already-built model; names and shapes must match.
void load_model(const std::string& path, nn::Model& model);

// zlib round-trip helpers for shard payloads
std::vector<uint8_t> zlib_compress(const uint8_t* data, size_t n);
std::vector<uint8_t> zlib_decompress(const uint8_t* data, size_t n, size_t raw_size);

// Minimal 8-bit RGB PNG writer (zlib stored via compress2).
void write_png(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb);

// Whole-file text IO; writes go through a temp file + rename so checkpoint
// readers never observe partial content.
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

} // namespace rsteal
