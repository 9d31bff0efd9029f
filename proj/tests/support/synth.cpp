#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scalematch::testing {

RasterImage textured_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double a = phase(rng), b = phase(rng), c = phase(rng);
  RasterImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / std::max(1, width - 1);
      const double v = static_cast<double>(y) / std::max(1, height - 1);
      const int checker = ((x / 4 + y / 4) % 2) * 12;
      const double r = 90 + 60 * std::sin(3 * u + a) + checker;
      const double g = 100 + 50 * std::sin(2 * v + b) + checker;
      const double bl = 110 + 40 * std::sin(2 * (u + v) + c);
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(g, 0.0, 255.0));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(bl, 0.0, 255.0));
    }
  }
  return img;
}

Polygon rect_polygon(double x, double y, double w, double h) {
  return {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}};
}

Polygon ellipse_polygon(double cx, double cy, double rx, double ry, int vertices) {
  Polygon poly;
  for (int i = 0; i < vertices; ++i) {
    const double t = 2.0 * std::numbers::pi * i / vertices;
    poly.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return poly;
}

Corpus make_corpus(const CorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<ImageRecord> images;
  std::vector<InstanceRecord> instances;
  std::map<Id, RasterImage> rasters;
  Id next_instance = 1;
  for (int i = 1; i <= spec.images; ++i) {
    RasterImage img = textured_image(spec.width, spec.height, spec.seed * 7919 + i);
    images.push_back({i, "img_" + std::to_string(i) + ".png", spec.width, spec.height});
    for (double size : spec.sizes(rng)) {
      // Sides stay fractional so continuous size laws keep distinct values.
      const double s = std::clamp(size, 2.0, std::min(spec.width, spec.height) - 2.0);
      std::uniform_int_distribution<int> px(0, static_cast<int>(spec.width - s));
      std::uniform_int_distribution<int> py(0, static_cast<int>(spec.height - s));
      const int x = px(rng);
      const int y = py(rng);
      std::uniform_int_distribution<int> colour(0, 255);
      const std::uint8_t rgb[3] = {static_cast<std::uint8_t>(colour(rng)),
                                   static_cast<std::uint8_t>(colour(rng)),
                                   static_cast<std::uint8_t>(colour(rng))};
      InstanceRecord inst;
      inst.id = next_instance++;
      inst.image_id = i;
      inst.bbox = {static_cast<double>(x), static_cast<double>(y), s, s};
      inst.category = 1;
      const Polygon poly = spec.ellipses
                               ? ellipse_polygon(x + s / 2.0, y + s / 2.0, s / 2.0, s / 2.0)
                               : rect_polygon(x, y, s, s);
      inst.segmentation = std::vector<Polygon>{poly};
      AlphaMask mask(spec.width, spec.height);
      fill_polygon(poly, mask);
      for (int yy = 0; yy < spec.height; ++yy) {
        for (int xx = 0; xx < spec.width; ++xx) {
          if (mask.at(xx, yy) < 0.5f) continue;
          for (int c = 0; c < 3; ++c) img.at(xx, yy, c) = rgb[c];
        }
      }
      instances.push_back(std::move(inst));
    }
    rasters.emplace(i, std::move(img));
  }
  return {DatasetIndex(IndexRole::kSourceWithMasks, std::move(images), std::move(instances),
                       {{1, "object", ""}}),
          std::move(rasters)};
}

DatasetIndex boxes_index(std::span<const double> sizes, int per_image) {
  std::vector<ImageRecord> images;
  std::vector<InstanceRecord> instances;
  const double biggest = sizes.empty() ? 1.0 : *std::max_element(sizes.begin(), sizes.end());
  const int frame = static_cast<int>(std::ceil(biggest)) + 1;
  Id image_id = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (k % per_image == 0) {
      ++image_id;
      images.push_back({image_id, "t_" + std::to_string(image_id) + ".png", frame, frame});
    }
    InstanceRecord inst;
    inst.id = static_cast<Id>(k + 1);
    inst.image_id = image_id;
    inst.bbox = {0.0, 0.0, sizes[k], sizes[k]};
    inst.category = 1;
    instances.push_back(inst);
  }
  return DatasetIndex(IndexRole::kBoxesOnly, std::move(images), std::move(instances),
                      {{1, "object", ""}});
}

std::vector<double> uniform_sizes(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, bool sparse) {
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution drop(0.3);
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) {
    x = (sparse && drop(rng)) ? 0.0 : expo(rng);
    sum += x;
  }
  if (sum == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= sum;
  return v;
}

double oracle_kl(std::span<const double> p, std::span<const double> q) {
  // Apply the documented smoothing to q, then sum term by term.
  std::vector<double> qs(q.begin(), q.end());
  bool lifted = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && qs[i] == 0.0) {
      qs[i] = 1e-12;
      lifted = true;
    }
  }
  if (lifted) {
    long double total = 0.0L;
    for (double v : qs) total += v;
    for (auto& v : qs) v = static_cast<double>(v / total);
  }
  long double acc = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    acc += static_cast<long double>(p[i]) * std::log(static_cast<long double>(p[i]) / qs[i]);
  }
  return static_cast<double>(acc);
}

double oracle_js(std::span<const double> p, std::span<const double> q) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double m = 0.5L * (static_cast<long double>(p[i]) + q[i]);
    if (p[i] > 0.0) acc += 0.5L * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) acc += 0.5L * q[i] * std::log(q[i] / m);
  }
  return static_cast<double>(acc);
}

std::size_t oracle_polygon_pixels(const Polygon& poly, int width, int height) {
  std::size_t count = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) {
          inside = !inside;
        }
      }
      if (inside) ++count;
    }
  }
  return count;
}

std::vector<double> oracle_boundary_distance(const AlphaMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<double> dist(static_cast<std::size_t>(w) * h, 1e18);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in = mask.at(x, y) > 0.5f;
      double best = 1e18;
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          if ((mask.at(xx, yy) > 0.5f) == in) continue;
          best = std::min(best, std::hypot(xx - x, yy - y));
        }
      }
      dist[static_cast<std::size_t>(y) * w + x] = best;
    }
  }
  return dist;
}

PixelRect tight_box(const AlphaMask& alpha, float threshold) {
  PixelRect r{alpha.width(), alpha.height(), 0, 0};
  for (int y = 0; y < alpha.height(); ++y) {
    for (int x = 0; x < alpha.width(); ++x) {
      if (alpha.at(x, y) < threshold) continue;
      r.x0 = std::min(r.x0, x);
      r.y0 = std::min(r.y0, y);
      r.x1 = std::max(r.x1, x + 1);
      r.y1 = std::max(r.y1, y + 1);
    }
  }
  if (r.x1 <= r.x0) return {};
  return r;
}

}  // namespace scalematch::testing
