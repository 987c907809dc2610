// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include "binsoinn/error.hpp"

namespace binsoinn::hilbert {

/// Order n of a Hilbert curve: the grid is 2^n x 2^n and holds 4^n cells.
class CurveOrder {
 public:
  static constexpr unsigned kMin = 1;
  static constexpr unsigned kMax = 16;

  constexpr explicit CurveOrder(unsigned n) : n_(n) {
    if (n < kMin || n > kMax) {
      throw RangeError("curve order " + std::to_string(n) + " outside [1, 16]");
    }
  }

  constexpr unsigned value() const noexcept { return n_; }
  constexpr std::uint32_t side() const noexcept { return std::uint32_t{1} << n_; }
  constexpr std::uint64_t cells() const noexcept { return std::uint64_t{1} << (2 * n_); }

  friend constexpr bool operator==(CurveOrder, CurveOrder) = default;

 private:
  unsigned n_;
};

using CurveIndex = std::uint64_t;

struct GridPoint {
  std::uint32_t x = 0;  // column
  std::uint32_t y = 0;  // row

  friend constexpr bool operator==(const GridPoint&, const GridPoint&) = default;
};

namespace detail {

// Reflect/transpose a sub-square so every quadrant is visited in the
// canonical orientation.
constexpr void rotate(std::uint32_t span, std::uint32_t& x, std::uint32_t& y,
                      std::uint32_t rx, std::uint32_t ry) noexcept {
  if (ry == 0) {
    if (rx == 1) {
      x = span - 1 - x;
      y = span - 1 - y;
    }
    const std::uint32_t t = x;
    x = y;
    y = t;
  }
}

}  // namespace detail

/// Coordinates of the d-th cell along the curve. Order 1 visits
/// (0,0), (0,1), (1,1), (1,0).
constexpr GridPoint index_to_point(CurveOrder order, CurveIndex d) {
  if (d >= order.cells()) {
    throw RangeError("curve index " + std::to_string(d) + " out of range for order " +
                     std::to_string(order.value()));
  }
  const std::uint32_t side = order.side();
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  CurveIndex t = d;
  for (std::uint32_t s = 1; s < side; s <<= 1) {
    const auto rx = static_cast<std::uint32_t>(1 & (t / 2));
    const auto ry = static_cast<std::uint32_t>(1 & (t ^ rx));
    detail::rotate(s, x, y, rx, ry);
    x += s * rx;
    y += s * ry;
    t /= 4;
  }
  return {x, y};
}

/// Inverse of index_to_point for the same order.
constexpr CurveIndex point_to_index(CurveOrder order, GridPoint p) {
  const std::uint32_t side = order.side();
  if (p.x >= side || p.y >= side) {
    throw RangeError("grid point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                     ") outside " + std::to_string(side) + "x" + std::to_string(side) + " grid");
  }
  std::uint32_t x = p.x;
  std::uint32_t y = p.y;
  CurveIndex d = 0;
  for (std::uint32_t s = side / 2; s > 0; s /= 2) {
    const std::uint32_t rx = (x & s) > 0 ? 1 : 0;
    const std::uint32_t ry = (y & s) > 0 ? 1 : 0;
    d += CurveIndex{s} * s * ((3 * rx) ^ ry);
    detail::rotate(side, x, y, rx, ry);
  }
  return d;
}

inline constexpr std::uint32_t kDefaultMaxSide = 256;

/// Smallest order whose grid holds byte_count cells, capped so the side never
/// exceeds max_side. An empty input still gets order 1.
constexpr CurveOrder order_for_length(std::uint64_t byte_count,
                                      std::uint32_t max_side = kDefaultMaxSide) {
  if (max_side < 2 || !std::has_single_bit(max_side)) {
    throw RangeError("max_side must be a power of two >= 2, got " + std::to_string(max_side));
  }
  const auto cap = static_cast<unsigned>(std::countr_zero(max_side));
  unsigned n = 1;
  while (n < cap && (std::uint64_t{1} << (2 * n)) < byte_count) {
    ++n;
  }
  return CurveOrder(n < CurveOrder::kMax ? n : CurveOrder::kMax);
}

}  // namespace binsoinn::hilbert
