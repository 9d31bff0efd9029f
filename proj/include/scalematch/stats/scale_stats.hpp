#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalematch/core/model.hpp"

namespace scalematch::stats {

enum class BinLayout { kEqualWidth, kEqualFrequency };

BinLayout parse_bin_layout(std::string_view text);
std::string_view to_string(BinLayout layout);

/// Discrete size histogram. Bin k covers [lower(k), upper(k)); the last bin
/// is closed. A zero-width bin is a point mass.
class ScaleHistogram {
 public:
  ScaleHistogram(std::vector<double> boundaries, std::vector<double> prob);

  std::size_t bins() const { return prob_.size(); }
  double lower(std::size_t k) const { return boundaries_[k]; }
  double upper(std::size_t k) const { return boundaries_[k + 1]; }
  std::span<const double> boundaries() const { return boundaries_; }
  std::span<const double> prob() const { return prob_; }
  /// Running sum of prob; cdf().back() == 1.
  std::span<const double> cdf() const { return cdf_; }

 private:
  std::vector<double> boundaries_;
  std::vector<double> prob_;
  std::vector<double> cdf_;
};

/// Right-continuous step CDF of a size sample, with a piecewise-linear
/// quantile function through the order statistics.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> sizes);

  /// Fraction of samples <= s.
  double operator()(double s) const;
  /// Midpoint of the CDF jump at s: (#{< s} + #{<= s}) / 2n. Equals F(s)
  /// away from sample values.
  double mid(double s) const;
  /// Quantile at u in [0,1], linear between order statistics placed at
  /// levels (k + 0.5)/n and clamped to the sample range beyond them. So
  /// inverse(mid(s)) == s for every sample value s.
  double inverse(double u) const;

  std::span<const double> sorted() const { return sorted_; }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }

 private:
  std::vector<double> sorted_;
};

struct SizeFilter {
  bool include_ignored = true;
};

/// One object size per instance.
std::vector<double> collect_sizes(const DatasetIndex& index, SizeFilter filter = {});

/// Drops sizes strictly above the `tail_quantile` empirical quantile
/// (the smallest sample value whose CDF reaches tail_quantile).
std::vector<double> rectify_sizes(std::span<const double> sizes, double tail_quantile);

ScaleHistogram build_histogram(std::span<const double> sizes, int bins, BinLayout layout);

/// Normalized counts of `sizes` over `boundaries`; sizes outside the range
/// are clamped into the first or last bin.
std::vector<double> pmf_on_bins(std::span<const double> sizes, std::span<const double> boundaries);

/// K equal-width boundaries spanning the union of both samples.
std::vector<double> common_boundaries(std::span<const double> a, std::span<const double> b,
                                      int bins);

/// Natural-log KL divergence. Where p > 0 and q == 0, q is lifted to 1e-12
/// and renormalized before evaluating.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Natural-log Jensen-Shannon divergence, in [0, ln 2].
double js_divergence(std::span<const double> p, std::span<const double> q);

struct DivergenceReport {
  double kl_forward = 0.0;   // KL(source || target)
  double kl_backward = 0.0;  // KL(target || source)
  double js = 0.0;
  std::vector<double> boundaries;
  std::vector<double> prob_source;
  std::vector<double> prob_target;
};

/// Divergences of two size samples on a common K-bin equal-width layout.
DivergenceReport compare_sizes(std::span<const double> source, std::span<const double> target,
                               int bins);

nlohmann::json to_json(const DivergenceReport& report);
DivergenceReport divergence_report_from_json(const nlohmann::json& j);

/// CSV with header bin_lo,bin_hi,prob_source,prob_target.
std::string to_csv(const DivergenceReport& report);

}  // namespace scalematch::stats
