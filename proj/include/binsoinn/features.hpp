// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "binsoinn/binviz.hpp"
#include "binsoinn/error.hpp"

namespace binsoinn {

enum class StripeId : std::uint8_t { Top, UpperMiddle, LowerMiddle, Bottom };

inline constexpr std::array<StripeId, 4> kStripes = {StripeId::Top, StripeId::UpperMiddle,
                                                     StripeId::LowerMiddle, StripeId::Bottom};
inline constexpr std::size_t kBinsPerStripe = 256;
inline constexpr std::size_t kFeatureLength = kStripes.size() * kBinsPerStripe;

/// How a stripe's pixels are binned into 256 buckets.
enum class ExtractorVariant : std::uint8_t {
  Rgb332,     // quantized pixel color (default)
  ByteValue,  // raw source byte drawn at each pixel
};

constexpr std::string_view to_string(ExtractorVariant v) noexcept {
  return v == ExtractorVariant::Rgb332 ? "rgb332" : "byte-value";
}

inline ExtractorVariant parse_extractor_variant(std::string_view s) {
  if (s == "rgb332") return ExtractorVariant::Rgb332;
  if (s == "byte-value") return ExtractorVariant::ByteValue;
  throw ParseError("unknown extractor variant '" + std::string(s) + "'");
}

struct FeatureVector {
  std::vector<double> values;
  std::optional<std::string> source_ext;
};

/// RGB-332: three bits red, three green, two blue.
constexpr std::uint8_t quantize_color(Rgb p) noexcept {
  return static_cast<std::uint8_t>(((p.r >> 5) << 5) | ((p.g >> 5) << 2) | (p.b >> 6));
}

/// Rows [begin, end) covered by a stripe; every stripe is side/4 rows tall.
constexpr std::pair<std::uint32_t, std::uint32_t> stripe_rows(std::uint32_t side, StripeId s) noexcept {
  const std::uint32_t h = side / 4;
  const auto i = static_cast<std::uint32_t>(s);
  return {i * h, (i + 1) * h};
}

inline std::array<double, kBinsPerStripe> stripe_histogram(
    const ByteImage& img, StripeId s, ExtractorVariant variant = ExtractorVariant::Rgb332) {
  if (img.side < 4) {
    throw RangeError("feature extraction needs an image side >= 4, got " + std::to_string(img.side));
  }
  if (variant == ExtractorVariant::ByteValue && img.samples.size() != img.pixels.size()) {
    throw StateError("byte-value extraction needs the sampled source bytes");
  }
  std::array<std::uint64_t, kBinsPerStripe> counts{};
  const auto [row0, row1] = stripe_rows(img.side, s);
  for (std::uint32_t y = row0; y < row1; ++y) {
    const std::size_t base = std::size_t{y} * img.side;
    for (std::uint32_t x = 0; x < img.side; ++x) {
      const std::uint8_t bin = variant == ExtractorVariant::Rgb332
                                   ? quantize_color(img.pixels[base + x])
                                   : img.samples[base + x];
      ++counts[bin];
    }
  }
  const auto total = static_cast<double>(std::uint64_t{row1 - row0} * img.side);
  std::array<double, kBinsPerStripe> hist{};
  for (std::size_t i = 0; i < kBinsPerStripe; ++i) {
    hist[i] = static_cast<double>(counts[i]) / total;
  }
  return hist;
}

/// Concatenated Top, UpperMiddle, LowerMiddle, Bottom histograms.
inline FeatureVector extract(const ByteImage& img, ExtractorVariant variant = ExtractorVariant::Rgb332) {
  FeatureVector fv;
  fv.values.reserve(kFeatureLength);
  for (StripeId s : kStripes) {
    const auto h = stripe_histogram(img, s, variant);
    fv.values.insert(fv.values.end(), h.begin(), h.end());
  }
  fv.source_ext = img.file_ext;
  return fv;
}

}  // namespace binsoinn
