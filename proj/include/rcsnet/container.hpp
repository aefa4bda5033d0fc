#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rcsnet/tensor.hpp"

namespace rcsnet {

inline constexpr std::array<char, 8> kGtcMagic{'G', 'T', 'C', '1', '\0', '\0', '\0', '\0'};
inline constexpr int kGtcVersion = 1;

struct NormStats {
  std::array<double, 8> mean{};
  std::array<double, 8> std{};
};

// One tensor plus its descriptive header.
struct GtcFile {
  Tensor tensor;
  std::vector<std::string> axes;      // one name per dimension, may be empty
  std::vector<std::string> channels;  // channel semantics, may be empty
  std::optional<NormStats> norm;
};

// Layout: magic, u32 LE header length, JSON header, LE f32 payload.
// Header keys: version, dtype ("f32le"), shape, axes, channels, norm.
std::vector<std::uint8_t> encode_gtc(const GtcFile& file);
GtcFile decode_gtc(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

void write_gtc(const std::filesystem::path& path, const GtcFile& file);
GtcFile read_gtc(const std::filesystem::path& path);

// Convenience: bare tensor with axis names.
void write_tensor(const std::filesystem::path& path, const Tensor& t, std::vector<std::string> axes = {},
                  std::vector<std::string> channels = {});
Tensor read_tensor(const std::filesystem::path& path);

// Writes text atomically enough for our purposes (truncate + write).
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace rcsnet
