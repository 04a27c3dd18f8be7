#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "oam/errors.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Per-video feature file, binary little-endian:
//   magic "OADF" | u32 version (=1) | u32 T | u32 D | T*D float32 row-major
// The video id is the file stem.

constexpr std::uint32_t kOadfVersion = 1;

namespace detail {

inline void put_u32_le(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

// Writes a [T x D] float32 feature matrix.
inline void write_oadf(const std::string& path, const Tensor<float>& features) {
  if (features.rank() != 2)
    throw DimensionError("write_oadf: features must be [T x D], got " + features.shape_str());
  std::string buf;
  buf.reserve(12 + 4 + features.numel() * 4);
  buf += "OADF";
  detail::put_u32_le(buf, kOadfVersion);
  detail::put_u32_le(buf, static_cast<std::uint32_t>(features.rows()));
  detail::put_u32_le(buf, static_cast<std::uint32_t>(features.cols()));
  for (std::size_t i = 0; i < features.numel(); ++i)
    detail::put_u32_le(buf, std::bit_cast<std::uint32_t>(features[i]));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write feature file '" + path + "'");
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Tensor<float> read_oadf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open feature file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16)
    throw FormatError("feature file '" + path + "' truncated: " +
                      std::to_string(bytes.size()) + " bytes, header needs 16");
  if (std::memcmp(bytes.data(), "OADF", 4) != 0)
    throw FormatError("feature file '" + path + "' has bad magic (want \"OADF\")");
  const std::uint32_t version = detail::get_u32_le(bytes.data() + 4);
  if (version != kOadfVersion)
    throw FormatError("feature file '" + path + "' has unsupported version " +
                      std::to_string(version));
  const std::uint32_t t = detail::get_u32_le(bytes.data() + 8);
  const std::uint32_t d = detail::get_u32_le(bytes.data() + 12);
  const std::size_t expected = 16 + static_cast<std::size_t>(t) * d * 4;
  if (bytes.size() != expected)
    throw FormatError("feature file '" + path + "' truncated: expected " +
                      std::to_string(expected) + " bytes for T=" + std::to_string(t) +
                      " D=" + std::to_string(d) + ", found " + std::to_string(bytes.size()));
  Tensor<float> out = Tensor<float>::zeros({t, d});
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = std::bit_cast<float>(detail::get_u32_le(bytes.data() + 16 + i * 4));
  return out;
}

}  // namespace oam
