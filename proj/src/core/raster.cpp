#include "scalematch/core/raster.hpp"

#include <algorithm>
#include <cmath>

#include "scalematch/core/error.hpp"

namespace scalematch {

RasterImage::RasterImage(int width, int height, std::uint8_t fill)
    : width_(width),
      height_(height),
      data_(static_cast<std::size_t>(width) * height * kChannels, fill) {
  if (width < 0 || height < 0) {
    throw Error(ErrorKind::kPrecondition, "negative raster dimensions");
  }
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw Error(ErrorKind::kPrecondition, "raster buffer length does not match dimensions");
  }
}

AlphaMask::AlphaMask(int width, int height, float fill)
    : width_(width), height_(height), alpha_(static_cast<std::size_t>(width) * height, fill) {
  if (width < 0 || height < 0) {
    throw Error(ErrorKind::kPrecondition, "negative mask dimensions");
  }
}

std::size_t AlphaMask::count_above(float threshold) const {
  return static_cast<std::size_t>(
      std::count_if(alpha_.begin(), alpha_.end(), [&](float a) { return a > threshold; }));
}

PixelRect support_bounds(const AlphaMask& mask, float threshold) {
  PixelRect r{mask.width(), mask.height(), 0, 0};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) > threshold) {
        r.x0 = std::min(r.x0, x);
        r.y0 = std::min(r.y0, y);
        r.x1 = std::max(r.x1, x + 1);
        r.y1 = std::max(r.y1, y + 1);
      }
    }
  }
  if (r.empty()) return {};
  return r;
}

namespace {

std::size_t distinct_vertices(const Polygon& polygon) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(polygon.size());
  for (const auto& p : polygon) pts.emplace_back(p.x, p.y);
  std::sort(pts.begin(), pts.end());
  return static_cast<std::size_t>(std::unique(pts.begin(), pts.end()) - pts.begin());
}

}  // namespace

bool fill_polygon(const Polygon& polygon, AlphaMask& mask) {
  if (distinct_vertices(polygon) < 3) return false;

  double min_y = polygon.front().y;
  double max_y = polygon.front().y;
  for (const auto& p : polygon) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int row_begin = std::max(0, static_cast<int>(std::ceil(min_y - 0.5)));
  const int row_end = std::min(mask.height(), static_cast<int>(std::ceil(max_y - 0.5)));

  std::vector<double> crossings;
  const std::size_t n = polygon.size();
  for (int row = row_begin; row < row_end; ++row) {
    const double yc = row + 0.5;
    crossings.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = polygon[i];
      const Point2& b = polygon[(i + 1) % n];
      // Half-open in y so a vertex on the scanline is counted once.
      if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y)) {
        crossings.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Pixel centers x+0.5 in [left, right).
      const int x0 = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int x1 = std::min(mask.width(), static_cast<int>(std::ceil(crossings[k + 1] - 0.5)));
      for (int x = x0; x < x1; ++x) mask.at(x, row) = 1.0f;
    }
  }
  return true;
}

AlphaMask rasterize_mask(const InstanceRecord& inst, int width, int height) {
  AlphaMask mask;
  if (const auto* polygons = std::get_if<std::vector<Polygon>>(&inst.segmentation)) {
    mask = AlphaMask(width, height);
    for (const auto& polygon : *polygons) fill_polygon(polygon, mask);
  } else if (const auto* rle = std::get_if<RleMask>(&inst.segmentation)) {
    if (rle->width != width || rle->height != height) {
      throw Error(ErrorKind::kPrecondition,
                  "annotation " + std::to_string(inst.id) +
                      ": RLE size does not match the image dimensions");
    }
    mask = rle_decode(*rle);
  } else {
    throw Error(ErrorKind::kPrecondition,
                "annotation " + std::to_string(inst.id) + " has no segmentation");
  }
  if (mask.count_above(0.0f) == 0) {
    throw Error(ErrorKind::kEmptyMask,
                "annotation " + std::to_string(inst.id) + " rasterizes to an empty mask");
  }
  return mask;
}

AlphaMask rle_decode(const RleMask& rle) {
  AlphaMask mask(rle.width, rle.height);
  const std::size_t total = static_cast<std::size_t>(rle.width) * rle.height;
  std::size_t pos = 0;
  bool value = false;
  for (std::uint32_t run : rle.counts) {
    if (pos + run > total) {
      throw Error(ErrorKind::kIntegrity, "RLE counts exceed mask size");
    }
    if (value) {
      for (std::size_t i = pos; i < pos + run; ++i) {
        // Column-major walk.
        const int x = static_cast<int>(i / rle.height);
        const int y = static_cast<int>(i % rle.height);
        mask.at(x, y) = 1.0f;
      }
    }
    pos += run;
    value = !value;
  }
  return mask;
}

RleMask rle_encode(const AlphaMask& mask, float threshold) {
  RleMask rle{mask.width(), mask.height(), {}};
  bool current = false;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const bool on = mask.at(x, y) >= threshold;
      if (on != current) {
        rle.counts.push_back(run);
        run = 0;
        current = on;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

// COCO compressed counts: each count (delta-coded against the count two
// places back after the first three) is split into 5-bit groups, with bit 5
// as a continuation flag and bit 4 as the sign of the final group.
std::string rle_counts_to_string(std::span<const std::uint32_t> counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    long long x = counts[i];
    if (i > 2) x -= static_cast<long long>(counts[i - 2]);
    bool more = true;
    while (more) {
      long long c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      out.push_back(static_cast<char>(c + 48));
    }
  }
  return out;
}

std::vector<std::uint32_t> rle_counts_from_string(std::string_view text) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < text.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= text.size()) {
        throw Error(ErrorKind::kIntegrity, "truncated RLE counts string");
      }
      const long long c = static_cast<long long>(text[p]) - 48;
      if (c < 0 || c > 63) throw Error(ErrorKind::kIntegrity, "invalid RLE counts string");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0) throw Error(ErrorKind::kIntegrity, "negative RLE count");
    counts.push_back(static_cast<std::uint32_t>(x));
  }
  return counts;
}

}  // namespace scalematch
