#pragma once

#include <string>

#include "sclab/invert.hpp"
#include "sclab/nn.hpp"

namespace sclab::checkpoint {

// Model checkpoint container, version byte first:
//   u8  version (1)
//   u32 config-block length, then that many bytes of key=value lines
//   u32 tensor count
//   per tensor: u16 name length + bytes, u8 dtype (4=f32, 8=f64),
//               u8 ndim, u32 dims..., raw little-endian payload
// All integers little-endian.
inline constexpr uint8_t kVersion = 1;

void save_model(const nn::TrainedModel<float>& model, const std::string& path);
void save_model(const nn::TrainedModel<double>& model, const std::string& path);
nn::TrainedModel<float> load_model(const std::string& path);

void save_generator(const invert::Generator<float>& gen, const std::string& path);
invert::Generator<float> load_generator(const std::string& path);

}  // namespace sclab::checkpoint
