#include "rcsnet/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace rcsnet {

namespace {

using nlohmann::json;

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

void put_f32le(std::vector<std::uint8_t>& out, float v) { put_u32le(out, std::bit_cast<std::uint32_t>(v)); }

}  // namespace

std::vector<std::uint8_t> encode_gtc(const GtcFile& file) {
  if (!file.tensor.defined()) throw FormatError("GTC1: cannot encode an undefined tensor");
  const Shape& shape = file.tensor.shape();
  if (!file.axes.empty() && file.axes.size() != shape.size()) {
    throw FormatError("GTC1: " + std::to_string(file.axes.size()) + " axis names for rank " +
                      std::to_string(shape.size()));
  }
  json header;
  header["version"] = kGtcVersion;
  header["dtype"] = "f32le";
  header["shape"] = shape;
  header["axes"] = file.axes;
  header["channels"] = file.channels;
  if (file.norm) {
    header["norm"] = {{"mean", file.norm->mean}, {"std", file.norm->std}};
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kGtcMagic.begin(), kGtcMagic.end());
  put_u32le(out, std::uint32_t(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 4 * file.tensor.numel());
  for (float v : file.tensor.data()) put_f32le(out, v);
  return out;
}

GtcFile decode_gtc(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kGtcMagic.data(), kGtcMagic.size()) != 0) {
    throw FormatError(source + ": not a GTC1 container (bad magic)");
  }
  const std::uint32_t hlen = get_u32le(bytes.data() + 8);
  if (bytes.size() < 12 + std::size_t(hlen)) throw FormatError(source + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed header: " + e.what());
  }
  GtcFile file;
  Shape shape;
  try {
    if (header.at("version").get<int>() != kGtcVersion) {
      throw FormatError(source + ": unsupported GTC version " + header.at("version").dump());
    }
    if (header.at("dtype").get<std::string>() != "f32le") {
      throw FormatError(source + ": unsupported dtype " + header.at("dtype").dump());
    }
    shape = header.at("shape").get<Shape>();
    if (header.contains("axes")) file.axes = header["axes"].get<std::vector<std::string>>();
    if (header.contains("channels")) file.channels = header["channels"].get<std::vector<std::string>>();
    if (header.contains("norm")) {
      NormStats n;
      n.mean = header["norm"].at("mean").get<std::array<double, 8>>();
      n.std = header["norm"].at("std").get<std::array<double, 8>>();
      file.norm = n;
    }
  } catch (const json::exception& e) {
    throw FormatError(source + ": invalid header: " + e.what());
  }
  const std::size_t n = numel_of(shape);
  const std::size_t payload = bytes.size() - 12 - hlen;
  if (payload != 4 * n) {
    throw FormatError(source + ": payload has " + std::to_string(payload) + " bytes, shape " + shape_str(shape) +
                      " needs " + std::to_string(4 * n));
  }
  std::vector<float> data(n);
  const std::uint8_t* p = bytes.data() + 12 + hlen;
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_u32le(p + 4 * i));
  file.tensor = Tensor(std::move(shape), std::move(data));
  return file;
}

void write_gtc(const std::filesystem::path& path, const GtcFile& file) {
  const auto bytes = encode_gtc(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

GtcFile read_gtc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_gtc(bytes, path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, std::vector<std::string> axes,
                  std::vector<std::string> channels) {
  GtcFile f;
  f.tensor = t;
  f.axes = std::move(axes);
  f.channels = std::move(channels);
  write_gtc(path, f);
}

Tensor read_tensor(const std::filesystem::path& path) { return read_gtc(path).tensor; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FormatError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace rcsnet
