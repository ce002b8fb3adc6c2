#pragma once

#include <cstddef>
#include <vector>

#include "slt/tensor.hpp"

namespace slt {

// Fixed 2D sinusoidal positional encoding, table[c, x, y] with x the row
// index in [0, H) and y the column index in [0, W). For i in [0, D/4):
//
//   table[2i,           x, y] = sin(x / 10000^(4i/D))
//   table[2i + 1,       x, y] = cos(x / 10000^(4i/D))
//   table[2i + D/2,     x, y] = sin(y / 10000^(4i/D))
//   table[2i + 1 + D/2, x, y] = cos(y / 10000^(4i/D))
//
// Channels below D/2 therefore depend only on the row and the rest only on
// the column. The table is a constant: it never receives gradients.
class PosEnc2D {
 public:
  PosEnc2D(std::size_t channels, std::size_t height, std::size_t width);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double at(std::size_t c, std::size_t x, std::size_t y) const {
    return table_[(c * height_ + x) * width_ + y];
  }
  const std::vector<double>& table() const { return table_; }
  // [D, H, W] constant tensor.
  Tensor as_tensor() const;

 private:
  std::size_t channels_, height_, width_;
  std::vector<double> table_;
};

PosEnc2D build_pe2d(std::size_t channels, std::size_t height, std::size_t width);

// fmaps: [T, C, h, w]; broadcasts the table over T.
Tensor add_pe2d(const Tensor& fmaps, const PosEnc2D& pe);

}  // namespace slt
