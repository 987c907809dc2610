// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <set>

#include "binsoinn/binviz.hpp"
#include "binsoinn/png.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace binsoinn;

namespace {

const std::filesystem::path kData = BINSOINN_TEST_DATA;

bool is_palette(const Rgb& p) {
  for (ColorClass c : kColorClasses) {
    if (class_to_rgb(c) == p) return true;
  }
  return false;
}

}  // namespace

TEST(ClassifyByte, Anchors) {
  EXPECT_EQ(classify_byte(0x00), ColorClass::Null);
  EXPECT_EQ(classify_byte(0x41), ColorClass::Printable);
  EXPECT_EQ(classify_byte(0xFF), ColorClass::NonBreaking);
  EXPECT_EQ(classify_byte(0x20), ColorClass::Printable);
  EXPECT_EQ(classify_byte(0x7E), ColorClass::Printable);
  EXPECT_EQ(classify_byte(0x7F), ColorClass::Control);
  EXPECT_EQ(classify_byte(0x1F), ColorClass::Control);
  EXPECT_EQ(classify_byte(0x01), ColorClass::Control);
  EXPECT_EQ(classify_byte(0x80), ColorClass::Extended);
  EXPECT_EQ(classify_byte(0xFE), ColorClass::Extended);
}

TEST(ClassifyByte, PartitionsAllByteValues) {
  std::map<ColorClass, int> sizes;
  for (int b = 0; b < 256; ++b) {
    const auto c = classify_byte(static_cast<std::uint8_t>(b));
    ++sizes[c];
    const auto o = oracle::byte_color(static_cast<std::uint8_t>(b));
    const auto p = class_to_rgb(c);
    EXPECT_EQ((oracle::Color{p.r, p.g, p.b}), o) << "byte " << b;
  }
  EXPECT_EQ(sizes.size(), 5u);
  EXPECT_EQ(sizes[ColorClass::Null], 1);
  EXPECT_EQ(sizes[ColorClass::NonBreaking], 1);
  EXPECT_EQ(sizes[ColorClass::Printable], 95);
  EXPECT_EQ(sizes[ColorClass::Control], 32);
  EXPECT_EQ(sizes[ColorClass::Extended], 127);
}

TEST(ClassToRgb, Palette) {
  EXPECT_EQ(class_to_rgb(ColorClass::Null), (Rgb{0, 0, 0}));
  EXPECT_EQ(class_to_rgb(ColorClass::Printable), (Rgb{0, 0, 255}));
  EXPECT_EQ(class_to_rgb(ColorClass::Control), (Rgb{0, 255, 0}));
  EXPECT_EQ(class_to_rgb(ColorClass::Extended), (Rgb{255, 0, 0}));
  EXPECT_EQ(class_to_rgb(ColorClass::NonBreaking), (Rgb{255, 255, 255}));
  std::set<std::tuple<int, int, int>> distinct;
  for (ColorClass c : kColorClasses) {
    const auto p = class_to_rgb(c);
    distinct.emplace(p.r, p.g, p.b);
  }
  EXPECT_EQ(distinct.size(), 5u);
}

TEST(PaletteHash, StableValue) {
  EXPECT_EQ(palette_hash().size(), 16u);
  EXPECT_EQ(palette_hash(), palette_hash());
}

TEST(Render, UniformPrintableInput) {
  const std::vector<std::uint8_t> bytes(1024, 0x41);
  const auto img = render(bytes);
  EXPECT_EQ(img.side, 32u);
  EXPECT_EQ(img.source_len, 1024u);
  for (const auto& p : img.pixels) ASSERT_EQ(p, (Rgb{0, 0, 255}));
}

TEST(Render, EmptyInputIsTwoByTwoBlack) {
  const auto img = render({});
  EXPECT_EQ(img.side, 2u);
  ASSERT_EQ(img.pixels.size(), 4u);
  for (const auto& p : img.pixels) EXPECT_EQ(p, (Rgb{0, 0, 0}));
}

TEST(Render, MinSideRaisesSmallImages) {
  RenderOptions opts;
  opts.min_side = 4;
  const auto img = render(std::vector<std::uint8_t>{0x41}, opts);
  EXPECT_EQ(img.side, 4u);
  EXPECT_EQ(img.at(0, 0), (Rgb{0, 0, 255}));
  EXPECT_EQ(img.at(0, 1), (Rgb{0, 0, 0}));
}

TEST(Render, RejectsBadSides) {
  RenderOptions opts;
  opts.max_side = 48;
  EXPECT_THROW(render({}, opts), RangeError);
  opts.max_side = 8;
  opts.min_side = 16;
  EXPECT_THROW(render({}, opts), RangeError);
}

TEST(Render, MatchesNaiveOracle) {
  std::mt19937_64 rng(7);
  for (std::size_t len : {0u, 1u, 3u, 4u, 5u, 17u, 256u, 1000u, 4096u, 4097u, 65536u, 70000u, 200000u}) {
    std::vector<std::uint8_t> bytes(len);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    for (std::uint32_t max_side : {16u, 256u}) {
      RenderOptions opts;
      opts.max_side = max_side;
      const auto img = render(bytes, opts);
      const auto ref = oracle::render(bytes, max_side, 2);
      ASSERT_EQ(img.side, ref.side) << "len " << len;
      for (std::size_t i = 0; i < ref.pixels.size(); ++i) {
        const auto& p = img.pixels[i];
        ASSERT_EQ((oracle::Color{p.r, p.g, p.b}), ref.pixels[i]) << "len " << len << " pixel " << i;
      }
    }
  }
}

TEST(Render, DeterministicAndPaletteOnly) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> bytes(rng() % 20000);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    const auto a = render(bytes);
    const auto b = render(bytes);
    EXPECT_EQ(a.pixels, b.pixels);
    EXPECT_EQ(a.samples, b.samples);
    for (const auto& p : a.pixels) ASSERT_TRUE(is_palette(p));
  }
}

TEST(Render, NonPaddingPixelCountIsConserved) {
  // 0x41 never renders black, so black pixels are exactly the padding.
  for (std::size_t len : {0u, 1u, 5u, 100u, 1024u, 5000u, 100000u}) {
    const std::vector<std::uint8_t> bytes(len, 0x41);
    const auto img = render(bytes);
    const auto cells = img.pixels.size();
    const auto lit = std::count(img.pixels.begin(), img.pixels.end(), Rgb{0, 0, 255});
    EXPECT_EQ(static_cast<std::size_t>(lit), std::min(len, cells)) << "len " << len;
  }
}

TEST(Render, SamplesRecordSourceBytes) {
  std::vector<std::uint8_t> bytes(16);
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i * 13);
  const auto img = render(bytes);
  ASSERT_EQ(img.side, 4u);
  for (std::uint64_t d = 0; d < 16; ++d) {
    const auto p = hilbert::index_to_point(hilbert::CurveOrder(2), d);
    EXPECT_EQ(img.samples[p.y * 4 + p.x], bytes[d]);
  }
}

TEST(Render, FileCarriesLowercaseExtension) {
  testing_support::TempDir dir("render");
  testing_support::write_bytes(dir / "Report.PDF", {0x25, 0x50, 0x44, 0x46});
  const auto img = render_file(dir / "Report.PDF");
  ASSERT_TRUE(img.file_ext.has_value());
  EXPECT_EQ(*img.file_ext, "pdf");
  EXPECT_EQ(extension_of("noext"), "none");
  EXPECT_THROW(render_file(dir / "missing.bin"), IoError);
}

TEST(Png, UniformImageRoundTrips) {
  const auto img = render(std::vector<std::uint8_t>(1024, 0x41));
  const auto png = oracle::decode_png(encode_png(img));
  EXPECT_EQ(png.width, 32u);
  EXPECT_EQ(png.height, 32u);
  for (const auto& p : png.pixels) ASSERT_EQ(p, (oracle::Color{0, 0, 255}));
}

TEST(Png, CornerPlacement) {
  // Order 1 visits (0,0), (0,1), (1,1), (1,0).
  const auto img = render(std::vector<std::uint8_t>{0x00, 0x01, 0x41, 0xFF});
  const auto png = oracle::decode_png(encode_png(img));
  ASSERT_EQ(png.width, 2u);
  EXPECT_EQ(png.pixels[0], (oracle::Color{0, 0, 0}));        // (0,0) 0x00
  EXPECT_EQ(png.pixels[2], (oracle::Color{0, 255, 0}));      // (0,1) 0x01
  EXPECT_EQ(png.pixels[3], (oracle::Color{0, 0, 255}));      // (1,1) 0x41
  EXPECT_EQ(png.pixels[1], (oracle::Color{255, 255, 255}));  // (1,0) 0xFF
}

TEST(Png, RandomImageRoundTrips) {
  std::mt19937_64 rng(3);
  std::vector<std::uint8_t> bytes(70000);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
  const auto img = render(bytes);
  const auto png = oracle::decode_png(encode_png(img));
  ASSERT_EQ(png.width, img.side);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    ASSERT_EQ(png.pixels[i], (oracle::Color{img.pixels[i].r, img.pixels[i].g, img.pixels[i].b}));
  }
}

TEST(Png, GoldenFixture) {
  const auto bytes = testing_support::read_bytes(kData / "fixture256.bin");
  ASSERT_EQ(bytes.size(), 256u);
  const auto img = render(bytes);
  testing_support::TempDir dir("png");
  write_png(img, dir / "out.png");
  const auto written = testing_support::read_bytes(dir / "out.png");
  if (std::getenv("BINSOINN_UPDATE_GOLDEN") != nullptr) {
    testing_support::write_bytes(kData / "fixture256.png", written);
  }
  const auto golden = testing_support::read_bytes(kData / "fixture256.png");
  EXPECT_EQ(written, golden);
}

TEST(Png, WriteFailureReportsPath) {
  const auto img = render({});
  try {
    write_png(img, "/nonexistent-dir/x.png");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), "/nonexistent-dir/x.png");
  }
}
