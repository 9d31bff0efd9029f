#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalematch/core/model.hpp"

namespace scalematch {

/// 8-bit interleaved RGB image.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  RasterImage(int width, int height, std::uint8_t fill = 0);
  RasterImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  bool operator==(const RasterImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel coverage in [0,1].
class AlphaMask {
 public:
  AlphaMask() = default;
  AlphaMask(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }

  float& at(int x, int y) { return alpha_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return alpha_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const float> values() const { return alpha_; }
  std::span<float> values() { return alpha_; }

  /// Number of pixels with alpha above `threshold`.
  std::size_t count_above(float threshold = 0.0f) const;

  bool operator==(const AlphaMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> alpha_;
};

/// Integer pixel rectangle, half-open: [x0,x1) x [y0,y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

/// Tight bounds of pixels whose alpha exceeds `threshold`; empty if none.
PixelRect support_bounds(const AlphaMask& mask, float threshold = 0.0f);

/// Even-odd fill of one polygon, sampled at pixel centers, OR-ed into `mask`.
/// Returns false when the polygon has fewer than three distinct vertices.
bool fill_polygon(const Polygon& polygon, AlphaMask& mask);

/// Binary mask of the instance's segmentation on a width x height frame.
/// Polygons with fewer than three distinct vertices are skipped; throws
/// Error(kEmptyMask) when nothing is covered.
AlphaMask rasterize_mask(const InstanceRecord& inst, int width, int height);

AlphaMask rle_decode(const RleMask& rle);
/// Run-length encodes pixels with alpha >= threshold.
RleMask rle_encode(const AlphaMask& mask, float threshold = 0.5f);
std::string rle_counts_to_string(std::span<const std::uint32_t> counts);
std::vector<std::uint32_t> rle_counts_from_string(std::string_view text);

}  // namespace scalematch
