#include <algorithm>
#include <cmath>

#include "scalematch/core/error.hpp"
#include "scalematch/imageops/imageops.hpp"

namespace scalematch::imageops {
namespace {

constexpr double kBelowHalf = 0.49;

/// Row-major double plane.
struct Plane {
  int w = 0;
  int h = 0;
  std::vector<double> v;

  Plane(int width, int height) : w(width), h(height), v(static_cast<std::size_t>(width) * height) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Mean over the (2r+1)^2 window clipped to the plane.
Plane box_mean(const Plane& in, int r) {
  std::vector<double> sat(static_cast<std::size_t>(in.w + 1) * (in.h + 1), 0.0);
  auto s = [&](int x, int y) -> double& { return sat[static_cast<std::size_t>(y) * (in.w + 1) + x]; };
  for (int y = 0; y < in.h; ++y) {
    double row = 0.0;
    for (int x = 0; x < in.w; ++x) {
      row += in.at(x, y);
      s(x + 1, y + 1) = s(x + 1, y) + row;
    }
  }
  Plane out(in.w, in.h);
  for (int y = 0; y < in.h; ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(in.h, y + r + 1);
    for (int x = 0; x < in.w; ++x) {
      const int x0 = std::max(0, x - r);
      const int x1 = std::min(in.w, x + r + 1);
      const double sum = s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0);
      out.at(x, y) = sum / static_cast<double>((x1 - x0) * (y1 - y0));
    }
  }
  return out;
}

// True when a pixel of the opposite label lies within Euclidean distance r.
bool near_boundary(const AlphaMask& mask, int x, int y, int r) {
  const bool inside = mask.at(x, y) > 0.5f;
  const int r2 = r * r;
  for (int dy = -r; dy <= r; ++dy) {
    const int yy = y + dy;
    if (yy < 0 || yy >= mask.height()) continue;
    for (int dx = -r; dx <= r; ++dx) {
      const int xx = x + dx;
      if (xx < 0 || xx >= mask.width() || dx * dx + dy * dy > r2) continue;
      if ((mask.at(xx, yy) > 0.5f) != inside) return true;
    }
  }
  return false;
}

}  // namespace

Matte extract_matte(const RasterImage& image, const AlphaMask& mask, const MattingParams& params) {
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw Error(ErrorKind::kPrecondition, "mask and image dimensions differ");
  }
  if (params.radius < 0 || !(params.regularization > 0.0)) {
    throw Error(ErrorKind::kConfig, "matting radius must be >= 0 and regularization > 0");
  }
  const PixelRect support = support_bounds(mask, 0.5f);
  if (support.empty()) throw Error(ErrorKind::kEmptyMask, "cannot extract a matte from an empty mask");

  // Small instances get a narrower band so they keep an opaque core.
  const int r = std::min(params.radius, std::min(support.width(), support.height()) / 4);
  const int margin = r > 0 ? r + 1 : 0;
  const PixelRect crop{std::max(0, support.x0 - margin), std::max(0, support.y0 - margin),
                       std::min(image.width(), support.x1 + margin),
                       std::min(image.height(), support.y1 + margin)};

  Matte matte;
  matte.x = crop.x0;
  matte.y = crop.y0;
  matte.raster = RasterImage(crop.width(), crop.height());
  matte.alpha = AlphaMask(crop.width(), crop.height());
  for (int y = 0; y < crop.height(); ++y) {
    for (int x = 0; x < crop.width(); ++x) {
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        matte.raster.at(x, y, c) = image.at(crop.x0 + x, crop.y0 + y, c);
      }
      matte.alpha.at(x, y) = mask.at(crop.x0 + x, crop.y0 + y) > 0.5f ? 1.0f : 0.0f;
    }
  }
  if (r == 0) return matte;

  const int w = crop.width();
  const int h = crop.height();
  Plane guide(w, h);
  Plane p(w, h);
  Plane guide_sq(w, h);
  Plane guide_p(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double lum = (0.299 * matte.raster.at(x, y, 0) + 0.587 * matte.raster.at(x, y, 1) +
                          0.114 * matte.raster.at(x, y, 2)) / 255.0;
      guide.at(x, y) = lum;
      p.at(x, y) = matte.alpha.at(x, y);
      guide_sq.at(x, y) = lum * lum;
      guide_p.at(x, y) = lum * p.at(x, y);
    }
  }
  const Plane mean_i = box_mean(guide, r);
  const Plane mean_p = box_mean(p, r);
  const Plane corr_ii = box_mean(guide_sq, r);
  const Plane corr_ip = box_mean(guide_p, r);
  Plane a(w, h);
  Plane b(w, h);
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double var = std::max(0.0, corr_ii.v[i] - mean_i.v[i] * mean_i.v[i]);
    const double cov = corr_ip.v[i] - mean_i.v[i] * mean_p.v[i];
    a.v[i] = cov / (var + params.regularization);
    b.v[i] = mean_p.v[i] - a.v[i] * mean_i.v[i];
  }
  const Plane mean_a = box_mean(a, r);
  const Plane mean_b = box_mean(b, r);

  AlphaMask binary = matte.alpha;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!near_boundary(binary, x, y, r)) continue;
      const double q = mean_a.at(x, y) * guide.at(x, y) + mean_b.at(x, y);
      // Keep the half-opacity contour on the mask outline.
      const double lo = binary.at(x, y) > 0.5f ? 0.5 : 0.0;
      const double hi = binary.at(x, y) > 0.5f ? 1.0 : kBelowHalf;
      matte.alpha.at(x, y) = static_cast<float>(std::clamp(q, lo, hi));
    }
  }
  return matte;
}

}  // namespace scalematch::imageops
