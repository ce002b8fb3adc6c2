#include "slt/posenc2d.hpp"

#include <cmath>

#include "slt/error.hpp"
#include "slt/ops.hpp"

namespace slt {

PosEnc2D::PosEnc2D(std::size_t channels, std::size_t height, std::size_t width)
    : channels_(channels), height_(height), width_(width) {
  if (channels == 0 || channels % 4 != 0) {
    throw ConfigError("PE2D channel count must be a positive multiple of 4, got " + std::to_string(channels));
  }
  if (height == 0 || width == 0) throw ConfigError("PE2D spatial extents must be positive");
  table_.assign(channels * height * width, 0.0);
  const std::size_t half = channels / 2;
  const double d = static_cast<double>(channels);
  for (std::size_t i = 0; i < channels / 4; ++i) {
    const double denom = std::pow(10000.0, 4.0 * static_cast<double>(i) / d);
    for (std::size_t x = 0; x < height; ++x) {
      for (std::size_t y = 0; y < width; ++y) {
        const double ax = static_cast<double>(x) / denom;
        const double ay = static_cast<double>(y) / denom;
        auto cell = [&](std::size_t c) -> double& { return table_[(c * height + x) * width + y]; };
        cell(2 * i) = std::sin(ax);
        cell(2 * i + 1) = std::cos(ax);
        cell(2 * i + half) = std::sin(ay);
        cell(2 * i + 1 + half) = std::cos(ay);
      }
    }
  }
}

Tensor PosEnc2D::as_tensor() const { return Tensor::from({channels_, height_, width_}, table_, false); }

PosEnc2D build_pe2d(std::size_t channels, std::size_t height, std::size_t width) {
  return PosEnc2D(channels, height, width);
}

Tensor add_pe2d(const Tensor& fmaps, const PosEnc2D& pe) {
  const Shape want{pe.channels(), pe.height(), pe.width()};
  if (fmaps.rank() != 4 || Shape(fmaps.shape().begin() + 1, fmaps.shape().end()) != want) {
    throw ConfigError("PE2D table " + shape_str(want) + " does not match feature maps " + shape_str(fmaps.shape()));
  }
  return ops::add(fmaps, pe.as_tensor());
}

}  // namespace slt
