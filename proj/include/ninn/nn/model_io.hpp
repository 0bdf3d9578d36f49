#pragma once

#include "ninn/nn/resnet.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ninn::nn {

// Binary container, all integers and floats little-endian:
//
//   magic "NINNMODL" | u32 version | u64 state_dim | f64 dt_step | u64 net_count
//   per net: u64 input_dim, output_dim, depth, width | f64 tau, epsilon
//            u64 stencil_len | i64 stencil[...] | f64 params[parameter_count]
//   trailer: 32-byte SHA-256 of everything before it
inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ModelVersionError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};
class ModelDimensionError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};
class CorruptModelError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

[[nodiscard]] std::vector<std::uint8_t> encode_model(const ResNetSystem& system);
[[nodiscard]] ResNetSystem decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, const ResNetSystem& system);
[[nodiscard]] ResNetSystem load_model(const std::filesystem::path& path);

}  // namespace ninn::nn
