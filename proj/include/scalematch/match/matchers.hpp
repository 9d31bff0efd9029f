#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <variant>

#include "scalematch/core/model.hpp"
#include "scalematch/stats/scale_stats.hpp"

namespace scalematch::match {

enum class MatchMethod { kRsm, kMsm, kRsmPlus, kMsmPlus, kCp, kCpPlus };

/// Accepts rsm | msm | rsm+ | msm+ | cp | cp+; anything else is a config
/// error whose message lists the valid names.
MatchMethod parse_method(std::string_view text);
std::string_view to_string(MatchMethod method);

/// RSM and MSM rescale whole images; every other method works per instance.
bool is_instance_level(MatchMethod method);
bool is_identity_scale(MatchMethod method);

/// x -> r*x + t_x, y -> r*y + t_y.
struct AffineTransform {
  double r = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  Point2 apply(Point2 p) const { return {r * p.x + tx, r * p.y + ty}; }
  BBox apply(const BBox& b) const { return {r * b.x + tx, r * b.y + ty, r * b.w, r * b.h}; }
  Point2 invert(Point2 p) const { return {(p.x - tx) / r, (p.y - ty) / r}; }
  bool is_identity() const { return r == 1.0 && tx == 0.0 && ty == 0.0; }
};

/// Transform scaling by s_hat/s about `anchor`, which stays fixed.
AffineTransform compute_affine(double s, double s_hat, Point2 anchor);

/// Deterministic random stream for one (seed, image, ordinal) key. Streams
/// with the same key replay the same draws regardless of which thread or in
/// which order they are consumed. Not shareable between threads.
class RngStream {
 public:
  /// Ordinal reserved for per-image draws (background selection).
  static constexpr std::uint64_t kImageOrdinal = ~std::uint64_t{0};

  RngStream(std::uint64_t seed, Id image_id, std::uint64_t ordinal);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// Random Scale Match draw: a bin by its probability, then uniform inside it.
double rsm_sample_target_size(const stats::ScaleHistogram& hist, RngStream& rng);

/// Monotone Scale Match: target.inverse(source.mid(s)). Matching a sample
/// against itself is the identity; sizes below the source support map to the
/// target minimum, sizes above it to the maximum.
double msm_map_size(double s, const stats::EmpiricalCdf& source,
                    const stats::EmpiricalCdf& target);

/// Target-size rule shared read-only across workers.
class SizeSampler {
 public:
  static SizeSampler random(stats::ScaleHistogram target);
  static SizeSampler monotone(stats::EmpiricalCdf source, stats::EmpiricalCdf target);
  static SizeSampler identity();

  double target_size(double s, RngStream& rng) const;

 private:
  struct Random {
    stats::ScaleHistogram hist;
  };
  struct Monotone {
    stats::EmpiricalCdf source;
    stats::EmpiricalCdf target;
  };
  struct Identity {};

  explicit SizeSampler(std::variant<Random, Monotone, Identity> rule) : rule_(std::move(rule)) {}

  std::variant<Random, Monotone, Identity> rule_;
};

/// Image-level factor s_hat / mean(sizes). nullopt for an image without
/// instances, which passes through unscaled.
std::optional<double> image_level_scale_factor(std::span<const double> image_sizes,
                                               const SizeSampler& sampler, RngStream& rng);

}  // namespace scalematch::match
