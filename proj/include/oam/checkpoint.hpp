#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oam/autograd.hpp"
#include "oam/errors.hpp"
#include "oam/tensor.hpp"

namespace oam {

// CRC-32 (reflected, polynomial 0xEDB88320, init/xorout 0xFFFFFFFF), the
// variant used by zip and PNG. Check value: crc32("123456789") = 0xCBF43926.
inline std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

// Checkpoint layout:
//   u32 LE header length | header JSON | payload | u32 LE crc32(payload)
// The header carries the format version, the resolved run config, and a
// manifest of {name, shape, offset} entries; offsets are byte positions into
// the payload, contiguous and exhaustive. The payload is every parameter's
// data as little-endian float32 in manifest order.

constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void append_u32_le(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v & 0xFF));
  buf.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

inline std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<Parameter<T>*>& params,
                     const nlohmann::ordered_json& run_config) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = run_config;
  auto manifest = nlohmann::ordered_json::array();
  std::vector<unsigned char> payload;
  for (const Parameter<T>* p : params) {
    nlohmann::ordered_json entry;
    entry["name"] = p->name;
    entry["shape"] = p->value.shape();
    entry["offset"] = payload.size();
    manifest.push_back(std::move(entry));
    for (std::size_t i = 0; i < p->value.numel(); ++i)
      detail::append_u32_le(payload,
                            std::bit_cast<std::uint32_t>(static_cast<float>(p->value[i])));
  }
  header["manifest"] = std::move(manifest);

  const std::string header_str = header.dump();
  std::vector<unsigned char> out;
  out.reserve(4 + header_str.size() + payload.size() + 4);
  detail::append_u32_le(out, static_cast<std::uint32_t>(header_str.size()));
  out.insert(out.end(), header_str.begin(), header_str.end());
  out.insert(out.end(), payload.begin(), payload.end());
  detail::append_u32_le(out, crc32(payload.data(), payload.size()));

  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint '" + path + "'");
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

// Parsed but not yet applied checkpoint.
struct CheckpointFile {
  nlohmann::json header;
  std::vector<unsigned char> payload;
};

inline CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw CheckpointError("checkpoint '" + path + "' is truncated");
  const std::uint32_t hlen = detail::read_u32_le(bytes.data());
  if (bytes.size() < 8 + static_cast<std::size_t>(hlen))
    throw CheckpointError("checkpoint '" + path + "' is truncated (header)");
  CheckpointFile ck;
  ck.header = nlohmann::json::parse(bytes.begin() + 4, bytes.begin() + 4 + hlen, nullptr, false);
  if (ck.header.is_discarded())
    throw CheckpointError("checkpoint '" + path + "' has a corrupt header");
  if (!ck.header.contains("format_version") ||
      ck.header["format_version"].get<std::uint32_t>() != kCheckpointVersion)
    throw CheckpointError("checkpoint '" + path + "' has an unsupported format version");
  const std::size_t payload_len = bytes.size() - 4 - hlen - 4;
  const unsigned char* payload_begin = bytes.data() + 4 + hlen;
  const std::uint32_t stored_crc = detail::read_u32_le(bytes.data() + bytes.size() - 4);
  if (crc32(payload_begin, payload_len) != stored_crc)
    throw CheckpointError("checkpoint '" + path + "' failed its payload CRC check");
  ck.payload.assign(payload_begin, payload_begin + payload_len);
  return ck;
}

// Copies the payload into the given parameters, validating the manifest
// covers them exactly (same names, shapes and order, contiguous offsets).
template <typename T>
void apply_checkpoint(const CheckpointFile& ck, const std::vector<Parameter<T>*>& params) {
  const auto& manifest = ck.header.at("manifest");
  if (manifest.size() != params.size())
    throw CheckpointError("checkpoint manifest has " + std::to_string(manifest.size()) +
                          " entries, model has " + std::to_string(params.size()));
  std::size_t expect_offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = manifest[i];
    Parameter<T>& p = *params[i];
    if (entry.at("name").get<std::string>() != p.name)
      throw CheckpointError("checkpoint entry " + std::to_string(i) + " is '" +
                            entry.at("name").get<std::string>() + "', model expects '" +
                            p.name + "'");
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != p.value.shape())
      throw CheckpointError("checkpoint parameter '" + p.name + "' has shape " +
                            Tensor<T>::shape_str(shape) + ", model expects " +
                            p.value.shape_str());
    if (entry.at("offset").get<std::size_t>() != expect_offset)
      throw CheckpointError("checkpoint parameter '" + p.name + "' offset is not contiguous");
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      const std::uint32_t bits = detail::read_u32_le(ck.payload.data() + expect_offset + k * 4);
      p.value[k] = static_cast<T>(std::bit_cast<float>(bits));
    }
    expect_offset += p.value.numel() * 4;
  }
  if (expect_offset != ck.payload.size())
    throw CheckpointError("checkpoint payload has " + std::to_string(ck.payload.size()) +
                          " bytes, manifest covers " + std::to_string(expect_offset));
}

}  // namespace oam
