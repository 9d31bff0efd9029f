#include <algorithm>
#include <array>
#include <cmath>

#include "scalematch/core/error.hpp"
#include "scalematch/imageops/imageops.hpp"

namespace scalematch::imageops {
namespace {

constexpr int kMaxSupersample = 64;
constexpr float kSupportEpsilon = 1e-6f;
constexpr double kBelowHalf = 0.49;

int supersample_factor(double scale) {
  if (scale >= 1.0) return 1;
  return std::min(kMaxSupersample, static_cast<int>(std::ceil(1.0 / scale - 1e-9)));
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Bilinear tap of an RGB raster at continuous pixel coordinates (pixel
// centres at integer + 0.5), clamping to the edge.
std::array<double, 3> sample_clamped(const RasterImage& img, double sx, double sy) {
  const double fx = std::clamp(sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
  const double fy = std::clamp(sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = img.at(x0, y0, c) * (1 - ax) + img.at(x1, y0, c) * ax;
    const double bottom = img.at(x0, y1, c) * (1 - ax) + img.at(x1, y1, c) * ax;
    out[c] = top * (1 - ay) + bottom * ay;
  }
  return out;
}

// Tap of a matte in crop coordinates: premultiplied RGB, alpha, and the
// half-opacity core as a 0/1 channel. Outside the crop is transparent.
std::array<double, 5> sample_matte(const Matte& m, double sx, double sy) {
  const double fx = sx - 0.5;
  const double fy = sy - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0;
  const double ay = fy - y0;
  std::array<double, 5> out{};
  const std::array<std::pair<int, int>, 4> taps{{{x0, y0}, {x0 + 1, y0}, {x0, y0 + 1}, {x0 + 1, y0 + 1}}};
  const std::array<double, 4> weights{(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  for (std::size_t t = 0; t < 4; ++t) {
    const auto [x, y] = taps[t];
    if (weights[t] == 0.0 || x < 0 || y < 0 || x >= m.alpha.width() || y >= m.alpha.height()) {
      continue;
    }
    const float alpha = m.alpha.at(x, y);
    if (alpha >= 0.5f) out[4] += weights[t];
    const double a = alpha * weights[t];
    if (a == 0.0) continue;
    for (int c = 0; c < 3; ++c) out[c] += a * m.raster.at(x, y, c);
    out[3] += a;
  }
  return out;
}

// dest point p maps to source point (p + offset) / scale.
RasterImage resample_scaled(const RasterImage& src, double scale, double offset_x,
                            double offset_y, int width, int height) {
  RasterImage out(width, height);
  const int n = supersample_factor(scale);
  const double inv = 1.0 / (n * n);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::array<double, 3> acc{};
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const double dx = x + (i + 0.5) / n;
          const double dy = y + (j + 0.5) / n;
          const auto v = sample_clamped(src, (dx + offset_x) / scale, (dy + offset_y) / scale);
          for (int c = 0; c < 3; ++c) acc[c] += v[c];
        }
      }
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = to_u8(acc[c] * inv);
    }
  }
  return out;
}

}  // namespace

std::optional<Matte> warp_matte(const Matte& matte, const match::AffineTransform& transform) {
  const double r = transform.r;
  if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(transform.tx) ||
      !std::isfinite(transform.ty)) {
    throw Error(ErrorKind::kPrecondition, "affine transform needs a finite positive scale");
  }
  const PixelRect core = support_bounds(matte.alpha, 0.5f);
  if (core.empty() || r * core.width() < 1.0 || r * core.height() < 1.0) return std::nullopt;

  const Point2 lo = transform.apply(Point2{static_cast<double>(matte.x), static_cast<double>(matte.y)});
  const Point2 hi = transform.apply(Point2{static_cast<double>(matte.x + matte.alpha.width()),
                                           static_cast<double>(matte.y + matte.alpha.height())});
  const int ox = static_cast<int>(std::floor(lo.x)) - 1;
  const int oy = static_cast<int>(std::floor(lo.y)) - 1;
  const int w = static_cast<int>(std::ceil(hi.x)) + 1 - ox;
  const int h = static_cast<int>(std::ceil(hi.y)) + 1 - oy;

  const int n = supersample_factor(r);
  const double inv = 1.0 / (n * n);
  AlphaMask alpha(w, h);
  std::vector<std::array<double, 3>> color(static_cast<std::size_t>(w) * h);
  bool any_core = false;
  double best_core = 0.0;
  std::pair<int, int> best_pixel{0, 0};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, 5> acc{};
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const Point2 src = transform.invert({ox + x + (i + 0.5) / n, oy + y + (j + 0.5) / n});
          const auto v = sample_matte(matte, src.x - matte.x, src.y - matte.y);
          for (int c = 0; c < 5; ++c) acc[c] += v[c];
        }
      }
      // The resampled core decides which side of 0.5 the soft alpha lands on.
      const bool core_pixel = acc[4] * inv >= 0.5;
      any_core = any_core || core_pixel;
      if (acc[4] * inv > best_core) {
        best_core = acc[4] * inv;
        best_pixel = {x, y};
      }
      const double a = std::clamp(acc[3] * inv, core_pixel ? 0.5 : 0.0, core_pixel ? 1.0 : kBelowHalf);
      alpha.at(x, y) = static_cast<float>(a);
      auto& px = color[static_cast<std::size_t>(y) * w + x];
      for (int c = 0; c < 3; ++c) px[c] = acc[3] > 0.0 ? acc[c] / acc[3] : 0.0;
    }
  }

  // An instance of at least one pixel keeps at least one half-opaque pixel.
  if (!any_core && best_core > 0.0) {
    float& a = alpha.at(best_pixel.first, best_pixel.second);
    a = std::max(a, 0.5f);
  }

  const PixelRect tight = support_bounds(alpha, kSupportEpsilon);
  if (tight.empty()) return std::nullopt;
  Matte out;
  out.x = ox + tight.x0;
  out.y = oy + tight.y0;
  out.alpha = AlphaMask(tight.width(), tight.height());
  out.raster = RasterImage(tight.width(), tight.height());
  for (int y = 0; y < tight.height(); ++y) {
    for (int x = 0; x < tight.width(); ++x) {
      const int sx = tight.x0 + x;
      const int sy = tight.y0 + y;
      const float a = alpha.at(sx, sy);
      out.alpha.at(x, y) = a > kSupportEpsilon ? a : 0.0f;
      const auto& px = color[static_cast<std::size_t>(sy) * w + sx];
      for (int c = 0; c < 3; ++c) out.raster.at(x, y, c) = to_u8(px[c]);
    }
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& image, int width, int height) {
  if (image.empty() || width < 1 || height < 1) {
    throw Error(ErrorKind::kPrecondition, "resize needs non-empty input and output");
  }
  if (width == image.width() && height == image.height()) return image;
  // Uniform scale takes one 2-D pass; otherwise each axis is resampled in turn.
  const double sx = static_cast<double>(width) / image.width();
  const double sy = static_cast<double>(height) / image.height();
  if (std::abs(sx - sy) < 1e-12) return resample_scaled(image, sx, 0.0, 0.0, width, height);
  const RasterImage wide = [&] {
    RasterImage tmp(width, image.height());
    const int n = supersample_factor(sx);
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < width; ++x) {
        std::array<double, 3> acc{};
        for (int i = 0; i < n; ++i) {
          const auto v = sample_clamped(image, (x + (i + 0.5) / n) / sx, y + 0.5);
          for (int c = 0; c < 3; ++c) acc[c] += v[c];
        }
        for (int c = 0; c < 3; ++c) tmp.at(x, y, c) = to_u8(acc[c] / n);
      }
    }
    return tmp;
  }();
  RasterImage out(width, height);
  const int n = supersample_factor(sy);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::array<double, 3> acc{};
      for (int j = 0; j < n; ++j) {
        const auto v = sample_clamped(wide, x + 0.5, (y + (j + 0.5) / n) / sy);
        for (int c = 0; c < 3; ++c) acc[c] += v[c];
      }
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = to_u8(acc[c] / n);
    }
  }
  return out;
}

RasterImage prepare_new_background(const RasterImage& candidate, int width, int height) {
  if (candidate.width() < 1 || candidate.height() < 1) {
    throw Error(ErrorKind::kPrecondition, "background candidate is empty");
  }
  if (width < 1 || height < 1) throw Error(ErrorKind::kPrecondition, "target dims must be >= 1");
  if (candidate.width() == width && candidate.height() == height) return candidate;
  const auto fit = background_fit_transform(candidate.width(), candidate.height(), width, height);
  return resample_scaled(candidate, fit.r, -fit.tx, -fit.ty, width, height);
}

match::AffineTransform background_fit_transform(int candidate_width, int candidate_height,
                                                int width, int height) {
  const double scale = std::max(static_cast<double>(width) / candidate_width,
                                static_cast<double>(height) / candidate_height);
  return {scale, -0.5 * (candidate_width * scale - width),
          -0.5 * (candidate_height * scale - height)};
}

Segmentation transform_segmentation(const Segmentation& seg,
                                    const match::AffineTransform& transform, int dst_width,
                                    int dst_height) {
  if (const auto* polygons = std::get_if<std::vector<Polygon>>(&seg)) {
    std::vector<Polygon> out;
    out.reserve(polygons->size());
    for (const auto& poly : *polygons) {
      Polygon mapped;
      mapped.reserve(poly.size());
      for (const auto& p : poly) mapped.push_back(transform.apply(p));
      out.push_back(std::move(mapped));
    }
    return out;
  }
  if (const auto* rle = std::get_if<RleMask>(&seg)) {
    const AlphaMask src = rle_decode(*rle);
    AlphaMask dst(dst_width, dst_height);
    for (int y = 0; y < dst_height; ++y) {
      for (int x = 0; x < dst_width; ++x) {
        const Point2 p = transform.invert({x + 0.5, y + 0.5});
        const int sx = static_cast<int>(std::floor(p.x));
        const int sy = static_cast<int>(std::floor(p.y));
        if (sx >= 0 && sy >= 0 && sx < src.width() && sy < src.height()) {
          dst.at(x, y) = src.at(sx, sy);
        }
      }
    }
    return rle_encode(dst);
  }
  return std::monostate{};
}

CompositeResult composite(const RasterImage& background, std::span<const Matte> mattes) {
  CompositeResult result{background, {}};
  RasterImage& out = result.image;
  for (std::size_t m = 0; m < mattes.size(); ++m) {
    const Matte& matte = mattes[m];
    const PixelRect r = matte.frame_rect();
    const int x0 = std::max(0, r.x0);
    const int y0 = std::max(0, r.y0);
    const int x1 = std::min(out.width(), r.x1);
    const int y1 = std::min(out.height(), r.y1);
    if (x0 >= x1 || y0 >= y1) {
      result.skipped.push_back(m);
      continue;
    }
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const double a = matte.alpha.at(x - matte.x, y - matte.y);
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          const double fg = matte.raster.at(x - matte.x, y - matte.y, c);
          out.at(x, y, c) = a >= 1.0 ? matte.raster.at(x - matte.x, y - matte.y, c)
                                     : to_u8(a * fg + (1.0 - a) * out.at(x, y, c));
        }
      }
    }
  }
  return result;
}

}  // namespace scalematch::imageops
