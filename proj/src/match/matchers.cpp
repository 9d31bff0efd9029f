#include "scalematch/match/matchers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scalematch/core/error.hpp"

namespace scalematch::match {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

MatchMethod parse_method(std::string_view text) {
  if (text == "rsm") return MatchMethod::kRsm;
  if (text == "msm") return MatchMethod::kMsm;
  if (text == "rsm+") return MatchMethod::kRsmPlus;
  if (text == "msm+") return MatchMethod::kMsmPlus;
  if (text == "cp") return MatchMethod::kCp;
  if (text == "cp+") return MatchMethod::kCpPlus;
  throw Error(ErrorKind::kConfig, "unknown method '" + std::string(text) +
                                      "'; valid methods: rsm, msm, rsm+, msm+, cp, cp+");
}

std::string_view to_string(MatchMethod method) {
  switch (method) {
    case MatchMethod::kRsm: return "rsm";
    case MatchMethod::kMsm: return "msm";
    case MatchMethod::kRsmPlus: return "rsm+";
    case MatchMethod::kMsmPlus: return "msm+";
    case MatchMethod::kCp: return "cp";
    case MatchMethod::kCpPlus: return "cp+";
  }
  return "?";
}

bool is_instance_level(MatchMethod method) {
  return method != MatchMethod::kRsm && method != MatchMethod::kMsm;
}

bool is_identity_scale(MatchMethod method) {
  return method == MatchMethod::kCp || method == MatchMethod::kCpPlus;
}

AffineTransform compute_affine(double s, double s_hat, Point2 anchor) {
  if (!(s > 0.0) || !(s_hat > 0.0) || !std::isfinite(s) || !std::isfinite(s_hat)) {
    throw Error(ErrorKind::kPrecondition, "compute_affine needs positive finite sizes");
  }
  const double r = s_hat / s;
  if (r == 1.0) return {};
  return {r, anchor.x * (1.0 - r), anchor.y * (1.0 - r)};
}

RngStream::RngStream(std::uint64_t seed, Id image_id, std::uint64_t ordinal) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ static_cast<std::uint64_t>(image_id));
  key = splitmix64(key ^ ordinal);
  engine_.seed(key);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::kPrecondition, "cannot draw an index from an empty range");
  return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

double rsm_sample_target_size(const stats::ScaleHistogram& hist, RngStream& rng) {
  const auto cdf = hist.cdf();
  const double u = rng.uniform();
  auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  k = std::min(k, hist.bins() - 1);
  const double lo = hist.lower(k);
  const double hi = hist.upper(k);
  if (lo == hi) return lo;
  return rng.uniform(lo, hi);
}

double msm_map_size(double s, const stats::EmpiricalCdf& source,
                    const stats::EmpiricalCdf& target) {
  return target.inverse(source.mid(s));
}

SizeSampler SizeSampler::random(stats::ScaleHistogram target) {
  return SizeSampler(Random{std::move(target)});
}

SizeSampler SizeSampler::monotone(stats::EmpiricalCdf source, stats::EmpiricalCdf target) {
  return SizeSampler(Monotone{std::move(source), std::move(target)});
}

SizeSampler SizeSampler::identity() { return SizeSampler(Identity{}); }

double SizeSampler::target_size(double s, RngStream& rng) const {
  if (const auto* r = std::get_if<Random>(&rule_)) return rsm_sample_target_size(r->hist, rng);
  if (const auto* m = std::get_if<Monotone>(&rule_)) return msm_map_size(s, m->source, m->target);
  return s;
}

std::optional<double> image_level_scale_factor(std::span<const double> image_sizes,
                                               const SizeSampler& sampler, RngStream& rng) {
  if (image_sizes.empty()) return std::nullopt;
  const double mean = std::accumulate(image_sizes.begin(), image_sizes.end(), 0.0) /
                      static_cast<double>(image_sizes.size());
  return sampler.target_size(mean, rng) / mean;
}

}  // namespace scalematch::match
