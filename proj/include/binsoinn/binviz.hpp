// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "binsoinn/error.hpp"
#include "binsoinn/hilbert.hpp"

namespace binsoinn {

enum class ColorClass : std::uint8_t { Printable, Control, Extended, Null, NonBreaking };

inline constexpr std::array<ColorClass, 5> kColorClasses = {
    ColorClass::Printable, ColorClass::Control, ColorClass::Extended, ColorClass::Null,
    ColorClass::NonBreaking};

constexpr const char* to_string(ColorClass c) noexcept {
  switch (c) {
    case ColorClass::Printable: return "printable";
    case ColorClass::Control: return "control";
    case ColorClass::Extended: return "extended";
    case ColorClass::Null: return "null";
    case ColorClass::NonBreaking: return "non-breaking";
  }
  return "?";
}

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;
};

/// 0x00 is null, 0xFF non-breaking, 0x20-0x7E printable, the remaining low
/// ASCII (including DEL) control, everything else extended.
constexpr ColorClass classify_byte(std::uint8_t b) noexcept {
  if (b == 0x00) return ColorClass::Null;
  if (b == 0xFF) return ColorClass::NonBreaking;
  if (b >= 0x20 && b <= 0x7E) return ColorClass::Printable;
  if (b < 0x20 || b == 0x7F) return ColorClass::Control;
  return ColorClass::Extended;
}

constexpr Rgb class_to_rgb(ColorClass c) noexcept {
  switch (c) {
    case ColorClass::Printable: return {0, 0, 255};
    case ColorClass::Control: return {0, 255, 0};
    case ColorClass::Extended: return {255, 0, 0};
    case ColorClass::Null: return {0, 0, 0};
    case ColorClass::NonBreaking: return {255, 255, 255};
  }
  return {};
}

/// Stable identifier of the palette, bound into saved models so features
/// computed under a different color mapping are never mixed.
inline std::string palette_hash() {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (ColorClass c : kColorClasses) {
    const Rgb p = class_to_rgb(c);
    for (std::uint8_t v : {static_cast<std::uint8_t>(c), p.r, p.g, p.b}) {
      h ^= v;
      h *= 0x100000001b3ULL;
    }
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

/// Square image of palette pixels laid out along a Hilbert curve.
struct ByteImage {
  std::uint32_t side = 0;
  std::vector<Rgb> pixels;           // row-major, side * side
  std::vector<std::uint8_t> samples; // source byte drawn at each pixel, row-major
  std::uint64_t source_len = 0;
  std::optional<std::string> file_ext;

  const Rgb& at(std::uint32_t x, std::uint32_t y) const { return pixels[std::size_t{y} * side + x]; }
};

struct RenderOptions {
  std::uint32_t max_side = hilbert::kDefaultMaxSide;
  /// Lower bound on the side; the feature extractor needs at least 4.
  std::uint32_t min_side = 2;
};

/// Source offset shown at curve position d: uniform stride when the input is
/// larger than the image, identity otherwise (nullopt means padding).
constexpr std::optional<std::uint64_t> source_offset(std::uint64_t d, std::uint64_t cells,
                                                     std::uint64_t len) noexcept {
  if (len > cells) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(d) * len) / cells);
  }
  if (d < len) return d;
  return std::nullopt;
}

inline ByteImage render(std::span<const std::uint8_t> bytes, RenderOptions opts = {},
                        std::optional<std::string> file_ext = std::nullopt) {
  if (opts.min_side < 2 || !std::has_single_bit(opts.min_side) || opts.min_side > opts.max_side) {
    throw RangeError("min_side must be a power of two in [2, max_side]");
  }
  auto order = hilbert::order_for_length(bytes.size(), opts.max_side);
  if (order.side() < opts.min_side) {
    order = hilbert::CurveOrder(static_cast<unsigned>(std::countr_zero(opts.min_side)));
  }

  ByteImage img;
  img.side = order.side();
  img.source_len = bytes.size();
  img.file_ext = std::move(file_ext);
  const std::uint64_t cells = order.cells();
  img.pixels.resize(cells);
  img.samples.resize(cells);
  for (std::uint64_t d = 0; d < cells; ++d) {
    const auto off = source_offset(d, cells, bytes.size());
    const std::uint8_t b = off ? bytes[*off] : std::uint8_t{0x00};
    const auto p = hilbert::index_to_point(order, d);
    const std::size_t idx = std::size_t{p.y} * img.side + p.x;
    img.pixels[idx] = class_to_rgb(classify_byte(b));
    img.samples[idx] = b;
  }
  return img;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path.string(), "read failed");
  return data;
}

/// Lowercase filename suffix without the dot, or "none".
inline std::string extension_of(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  if (ext.size() <= 1) return "none";
  ext.erase(0, 1);
  for (char& c : ext) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return ext;
}

inline ByteImage render_file(const std::filesystem::path& path, RenderOptions opts = {}) {
  const auto data = read_file(path);
  return render(data, opts, extension_of(path));
}

}  // namespace binsoinn
