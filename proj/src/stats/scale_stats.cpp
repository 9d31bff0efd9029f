#include "scalematch/stats/scale_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "scalematch/core/error.hpp"

namespace scalematch::stats {
namespace {

constexpr double kKlEpsilon = 1e-12;
constexpr double kSumTolerance = 1e-6;

void require_non_empty(std::span<const double> sizes, const char* what) {
  if (sizes.empty()) throw Error(ErrorKind::kEmptyInput, std::string(what) + ": empty size sample");
}

// Bin holding s: [b[k], b[k+1]) with the last bin closed and clamping at the
// ends.
std::size_t bin_of(std::span<const double> boundaries, double s) {
  const std::size_t bins = boundaries.size() - 1;
  const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), s);
  const auto pos = static_cast<std::size_t>(it - boundaries.begin());
  if (pos == 0) return 0;
  return std::min(pos - 1, bins - 1);
}

void validate_pmf(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::kPrecondition,
                  std::string(name) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw Error(ErrorKind::kPrecondition, std::string(name) + " does not sum to 1");
  }
}

void validate_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::kPrecondition, "divergence inputs differ in length (" +
                                              std::to_string(p.size()) + " vs " +
                                              std::to_string(q.size()) + ")");
  }
  validate_pmf(p, "p");
  validate_pmf(q, "q");
}

std::vector<double> to_boundaries_with_degenerate(double lo, double hi, int bins) {
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  std::vector<double> b(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) b[k] = lo + (hi - lo) * k / bins;
  b.back() = hi;
  return b;
}

}  // namespace

BinLayout parse_bin_layout(std::string_view text) {
  if (text == "equal-width") return BinLayout::kEqualWidth;
  if (text == "equal-frequency") return BinLayout::kEqualFrequency;
  throw Error(ErrorKind::kConfig, "unknown histogram layout '" + std::string(text) +
                                      "' (expected equal-width or equal-frequency)");
}

std::string_view to_string(BinLayout layout) {
  return layout == BinLayout::kEqualWidth ? "equal-width" : "equal-frequency";
}

ScaleHistogram::ScaleHistogram(std::vector<double> boundaries, std::vector<double> prob)
    : boundaries_(std::move(boundaries)), prob_(std::move(prob)) {
  if (prob_.empty() || boundaries_.size() != prob_.size() + 1) {
    throw Error(ErrorKind::kPrecondition, "histogram needs K >= 1 bins and K+1 boundaries");
  }
  for (std::size_t k = 0; k + 1 < boundaries_.size(); ++k) {
    if (!(boundaries_[k] <= boundaries_[k + 1])) {
      throw Error(ErrorKind::kPrecondition, "histogram boundaries must ascend");
    }
  }
  validate_pmf(prob_, "histogram prob");
  cdf_.resize(prob_.size());
  std::partial_sum(prob_.begin(), prob_.end(), cdf_.begin());
  cdf_.back() = 1.0;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> sizes) : sorted_(std::move(sizes)) {
  require_non_empty(sorted_, "empirical_cdf");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double s) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), s);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::mid(double s) const {
  const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), s);
  const auto hi = std::upper_bound(lo, sorted_.end(), s);
  const auto below = static_cast<double>(lo - sorted_.begin());
  const auto upto = static_cast<double>(hi - sorted_.begin());
  return 0.5 * (below + upto) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::inverse(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw Error(ErrorKind::kPrecondition, "quantile level must lie in [0,1]");
  }
  // Order statistic k (0-based) sits at level (k + 0.5) / n.
  const double n = static_cast<double>(sorted_.size());
  double h = u * n - 0.5;
  if (std::abs(h - std::round(h)) < 1e-9) h = std::round(h);
  if (h <= 0.0) return sorted_.front();
  if (h >= n - 1.0) return sorted_.back();
  const auto i = static_cast<std::size_t>(std::floor(h));
  return sorted_[i] + (h - static_cast<double>(i)) * (sorted_[i + 1] - sorted_[i]);
}

std::vector<double> collect_sizes(const DatasetIndex& index, SizeFilter filter) {
  std::vector<double> sizes;
  sizes.reserve(index.instances().size());
  for (const auto& [id, inst] : index.instances()) {
    if (inst.ignore && !filter.include_ignored) continue;
    sizes.push_back(object_size(inst.bbox));
  }
  if (sizes.empty()) throw Error(ErrorKind::kEmptyInput, "index has no (eligible) instances");
  return sizes;
}

std::vector<double> rectify_sizes(std::span<const double> sizes, double tail_quantile) {
  if (!(tail_quantile > 0.5 && tail_quantile <= 1.0)) {
    throw Error(ErrorKind::kConfig, "tail_quantile must lie in (0.5, 1]");
  }
  require_non_empty(sizes, "rectify_sizes");
  std::vector<double> sorted(sizes.begin(), sizes.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // 1e-9 absorbs representation error in q*n (0.99*100 must give rank 99).
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(tail_quantile * n - 1e-9)) - 1;
  rank = std::clamp<std::ptrdiff_t>(rank, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
  const double cutoff = sorted[static_cast<std::size_t>(rank)];
  std::vector<double> kept;
  kept.reserve(sizes.size());
  for (double s : sizes) {
    if (s <= cutoff) kept.push_back(s);
  }
  return kept;
}

ScaleHistogram build_histogram(std::span<const double> sizes, int bins, BinLayout layout) {
  if (bins < 1) throw Error(ErrorKind::kConfig, "histogram bin count must be >= 1");
  require_non_empty(sizes, "build_histogram");
  const auto [min_it, max_it] = std::minmax_element(sizes.begin(), sizes.end());
  const double lo = *min_it;
  const double hi = *max_it;
  if (lo == hi) return ScaleHistogram({lo - 0.5, hi + 0.5}, {1.0});

  std::vector<double> boundaries;
  if (layout == BinLayout::kEqualWidth) {
    boundaries = to_boundaries_with_degenerate(lo, hi, bins);
  } else {
    if (sizes.size() < static_cast<std::size_t>(bins)) {
      throw Error(ErrorKind::kPrecondition,
                  "equal-frequency layout needs at least as many sizes as bins");
    }
    const EmpiricalCdf cdf(std::vector<double>(sizes.begin(), sizes.end()));
    for (int k = 0; k <= bins; ++k) boundaries.push_back(cdf.inverse(static_cast<double>(k) / bins));
    boundaries.front() = lo;
    boundaries.back() = hi;
    // Ties collapse quantiles; merge the resulting empty-width bins.
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());
  }

  std::vector<double> prob(boundaries.size() - 1, 0.0);
  for (double s : sizes) prob[bin_of(boundaries, s)] += 1.0;
  for (double& p : prob) p /= static_cast<double>(sizes.size());
  return ScaleHistogram(std::move(boundaries), std::move(prob));
}

std::vector<double> pmf_on_bins(std::span<const double> sizes, std::span<const double> boundaries) {
  require_non_empty(sizes, "pmf_on_bins");
  if (boundaries.size() < 2) throw Error(ErrorKind::kPrecondition, "need at least one bin");
  for (std::size_t k = 0; k + 1 < boundaries.size(); ++k) {
    if (!(boundaries[k] < boundaries[k + 1])) {
      throw Error(ErrorKind::kPrecondition, "bin boundaries must be strictly ascending");
    }
  }
  std::vector<double> prob(boundaries.size() - 1, 0.0);
  for (double s : sizes) prob[bin_of(boundaries, s)] += 1.0;
  for (double& p : prob) p /= static_cast<double>(sizes.size());
  return prob;
}

std::vector<double> common_boundaries(std::span<const double> a, std::span<const double> b,
                                      int bins) {
  if (bins < 1) throw Error(ErrorKind::kConfig, "histogram bin count must be >= 1");
  require_non_empty(a, "common_boundaries");
  require_non_empty(b, "common_boundaries");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  return to_boundaries_with_degenerate(std::min(*amin, *bmin), std::max(*amax, *bmax), bins);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  validate_pair(p, q);
  bool needs_smoothing = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && q[i] == 0.0) needs_smoothing = true;
  }
  std::vector<double> q_smooth;
  if (needs_smoothing) {
    q_smooth.assign(q.begin(), q.end());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0 && q_smooth[i] == 0.0) q_smooth[i] = kKlEpsilon;
      total += q_smooth[i];
    }
    for (double& v : q_smooth) v /= total;
    q = q_smooth;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, kl);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  validate_pair(p, q);
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(js, 0.0, std::numbers::ln2);
}

DivergenceReport compare_sizes(std::span<const double> source, std::span<const double> target,
                               int bins) {
  DivergenceReport r;
  r.boundaries = common_boundaries(source, target, bins);
  r.prob_source = pmf_on_bins(source, r.boundaries);
  r.prob_target = pmf_on_bins(target, r.boundaries);
  r.kl_forward = kl_divergence(r.prob_source, r.prob_target);
  r.kl_backward = kl_divergence(r.prob_target, r.prob_source);
  r.js = js_divergence(r.prob_source, r.prob_target);
  return r;
}

nlohmann::json to_json(const DivergenceReport& report) {
  return {{"kl_forward", report.kl_forward},
          {"kl_backward", report.kl_backward},
          {"js", report.js},
          {"bins", report.prob_source.size()},
          {"boundaries", report.boundaries},
          {"prob_source", report.prob_source},
          {"prob_target", report.prob_target}};
}

DivergenceReport divergence_report_from_json(const nlohmann::json& j) {
  try {
    DivergenceReport r;
    r.kl_forward = j.at("kl_forward").get<double>();
    r.kl_backward = j.at("kl_backward").get<double>();
    r.js = j.at("js").get<double>();
    r.boundaries = j.at("boundaries").get<std::vector<double>>();
    r.prob_source = j.at("prob_source").get<std::vector<double>>();
    r.prob_target = j.at("prob_target").get<std::vector<double>>();
    if (r.boundaries.size() != r.prob_source.size() + 1 ||
        r.prob_source.size() != r.prob_target.size()) {
      throw Error(ErrorKind::kParse, "divergence report has inconsistent bin arrays");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("divergence report: ") + e.what());
  }
}

std::string to_csv(const DivergenceReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_lo,bin_hi,prob_source,prob_target\n";
  for (std::size_t k = 0; k < report.prob_source.size(); ++k) {
    out << report.boundaries[k] << ',' << report.boundaries[k + 1] << ','
        << report.prob_source[k] << ',' << report.prob_target[k] << '\n';
  }
  return out.str();
}

}  // namespace scalematch::stats
