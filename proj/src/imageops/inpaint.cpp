#include <algorithm>
#include <array>
#include <cmath>

#include "scalematch/core/error.hpp"
#include "scalematch/imageops/imageops.hpp"

namespace scalematch::imageops {
namespace {

constexpr std::array<std::pair<int, int>, 4> kNeighbours{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

}  // namespace

RasterImage DiffusionInpainter::fill(const Background& background) const {
  const RasterImage& src = background.raster;
  const AlphaMask& hole = background.hole;
  if (hole.width() != src.width() || hole.height() != src.height()) {
    throw Error(ErrorKind::kPrecondition, "hole mask and background dimensions differ");
  }
  const int w = src.width();
  const int h = src.height();
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  std::vector<std::size_t> holes;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (hole.at(x, y) > 0.5f) holes.push_back(idx(x, y));
    }
  }
  if (holes.empty()) return src;
  if (holes.size() == static_cast<std::size_t>(w) * h) {
    throw Error(ErrorKind::kPrecondition, "hole covers the whole image; nothing to diffuse from");
  }

  std::vector<float> value(static_cast<std::size_t>(w) * h * 3);
  std::vector<std::uint8_t> known(static_cast<std::size_t>(w) * h, 1);
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = src.data()[i];
  for (std::size_t p : holes) known[p] = 0;

  // Seed: peel the hole from its rim inwards, each layer taking the mean of
  // already-known 4-neighbours. Values of a layer are committed together so
  // the result does not depend on scan order.
  std::vector<std::size_t> pending = holes;
  std::vector<std::pair<std::size_t, std::array<float, 3>>> layer;
  while (!pending.empty()) {
    layer.clear();
    std::vector<std::size_t> rest;
    for (std::size_t p : pending) {
      const int x = static_cast<int>(p % w);
      const int y = static_cast<int>(p / w);
      std::array<float, 3> sum{};
      int count = 0;
      for (const auto& [dx, dy] : kNeighbours) {
        const int xx = x + dx;
        const int yy = y + dy;
        if (xx < 0 || yy < 0 || xx >= w || yy >= h || !known[idx(xx, yy)]) continue;
        for (int c = 0; c < 3; ++c) sum[c] += value[idx(xx, yy) * 3 + c];
        ++count;
      }
      if (count == 0) {
        rest.push_back(p);
        continue;
      }
      for (auto& s : sum) s /= static_cast<float>(count);
      layer.emplace_back(p, sum);
    }
    for (const auto& [p, v] : layer) {
      for (int c = 0; c < 3; ++c) value[p * 3 + c] = v[c];
      known[p] = 1;
    }
    pending.swap(rest);
  }

  for (int iter = 0; iter < params_.max_iters; ++iter) {
    double max_change = 0.0;
    for (std::size_t p : holes) {
      const int x = static_cast<int>(p % w);
      const int y = static_cast<int>(p / w);
      std::array<float, 3> sum{};
      int count = 0;
      for (const auto& [dx, dy] : kNeighbours) {
        const int xx = x + dx;
        const int yy = y + dy;
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        for (int c = 0; c < 3; ++c) sum[c] += value[idx(xx, yy) * 3 + c];
        ++count;
      }
      for (int c = 0; c < 3; ++c) {
        const float next = sum[c] / static_cast<float>(count);
        max_change = std::max(max_change, static_cast<double>(std::abs(next - value[p * 3 + c])));
        value[p * 3 + c] = next;
      }
    }
    if (max_change < params_.tol) break;
  }

  RasterImage out = src;
  for (std::size_t p : holes) {
    for (int c = 0; c < 3; ++c) {
      out.data()[p * 3 + c] =
          static_cast<std::uint8_t>(std::clamp(std::lround(value[p * 3 + c]), 0L, 255L));
    }
  }
  return out;
}

RasterImage inpaint(const Background& background, const InpaintParams& params) {
  return DiffusionInpainter(params).fill(background);
}

}  // namespace scalematch::imageops
