#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <torch/nn/module.h>

namespace semcodec {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// SHA-256 over every named parameter and buffer (name, dtype, shape, raw
// bytes) in name order.
std::string parameter_digest(const torch::nn::Module& module);

}  // namespace semcodec
