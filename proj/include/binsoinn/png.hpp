// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string_view>
#include <vector>

#include "binsoinn/binviz.hpp"
#include "binsoinn/error.hpp"

namespace binsoinn {

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, std::string_view type,
                      const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_from = out.size();
  out.insert(out.end(), type.begin(), type.end());
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc = ::crc32(0L, out.data() + crc_from, static_cast<uInt>(out.size() - crc_from));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// 8-bit RGB, non-interlaced, filter 0 on every scanline, zlib level 9.
inline std::vector<std::uint8_t> encode_png(const ByteImage& img) {
  if (img.pixels.size() != std::size_t{img.side} * img.side || img.side == 0) {
    throw RangeError("image pixel count does not match side");
  }
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

  std::vector<std::uint8_t> ihdr;
  detail::put_u32_be(ihdr, img.side);
  detail::put_u32_be(ihdr, img.side);
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // depth, truecolor, deflate, filter, no interlace
  detail::put_chunk(out, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve(std::size_t{img.side} * (1 + 3 * std::size_t{img.side}));
  for (std::uint32_t y = 0; y < img.side; ++y) {
    raw.push_back(0);
    for (std::uint32_t x = 0; x < img.side; ++x) {
      const Rgb& p = img.at(x, y);
      raw.insert(raw.end(), {p.r, p.g, p.b});
    }
  }
  uLongf packed_len = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> idat(packed_len);
  if (::compress2(idat.data(), &packed_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error("zlib compression failed");
  }
  idat.resize(packed_len);
  detail::put_chunk(out, "IDAT", idat);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline void write_png(const ByteImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace binsoinn
