#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalematch/core/model.hpp"
#include "scalematch/core/raster.hpp"
#include "scalematch/imageops/imageops.hpp"
#include "scalematch/match/matchers.hpp"
#include "scalematch/stats/scale_stats.hpp"

namespace scalematch::pipeline {

struct PipelineConfig {
  match::MatchMethod method = match::MatchMethod::kMsmPlus;
  // Probability of keeping the inpainted original background.
  double psi_p = 0.4;
  int bins = 100;
  double tail_quantile = 0.99;
  stats::BinLayout layout = stats::BinLayout::kEqualWidth;
  std::uint64_t seed = 0;
  imageops::MattingParams matting;
  imageops::InpaintParams inpaint;
  int workers = 1;
  bool include_ignored = true;
  // Fraction of images allowed to fail before the run is aborted.
  double failure_budget = 0.10;

  /// Throws Error(kConfig) on out-of-range values.
  void validate() const;
};

enum class BackgroundProvenance { kOriginal, kInpainted, kSwapped };

std::string_view to_string(BackgroundProvenance provenance);

struct InstanceLog {
  Id instance_id = 0;
  double size = 0.0;         // s
  double target_size = 0.0;  // s_hat
  double ratio = 1.0;        // r
  bool kept = true;
};

struct TransformOutcome {
  Id image_id = 0;
  BackgroundProvenance provenance = BackgroundProvenance::kOriginal;
  std::optional<Id> donor_image_id;
  std::vector<InstanceLog> instances;
  // Rewritten source annotations, keeping their ids.
  std::vector<InstanceRecord> annotations;
  // CP+ only: the donor's own annotations mapped into this frame. Ids are
  // still the donor's; transform_dataset renumbers them.
  std::vector<InstanceRecord> donor_annotations;
  RasterImage raster;
  // Output frame size; kept after the raster has been handed off.
  int width = 0;
  int height = 0;
};

struct PsiChoice {
  BackgroundProvenance provenance = BackgroundProvenance::kInpainted;
  std::optional<Id> donor;
};

/// Draws u ~ U[0,1). u > psi_p swaps in a donor drawn uniformly from `pool`
/// minus `current`; otherwise the inpainted background is kept. Throws
/// Error(kConfig) if psi_p < 1 and no donor is available.
PsiChoice psi_select_background(match::RngStream& rng, double psi_p, Id current,
                                std::span<const Id> pool);

/// Read access to source rasters. Must be safe to call concurrently.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual RasterImage load(const ImageRecord& record) const = 0;
};

class DirectoryImageSource final : public ImageSource {
 public:
  explicit DirectoryImageSource(std::filesystem::path root) : root_(std::move(root)) {}
  RasterImage load(const ImageRecord& record) const override;

 private:
  std::filesystem::path root_;
};

class MemoryImageSource final : public ImageSource {
 public:
  explicit MemoryImageSource(std::map<Id, RasterImage> images) : images_(std::move(images)) {}
  RasterImage load(const ImageRecord& record) const override;

 private:
  std::map<Id, RasterImage> images_;
};

/// Receives finished images; called concurrently for distinct images.
class ImageSink {
 public:
  virtual ~ImageSink() = default;
  virtual void write(const ImageRecord& record, const RasterImage& raster) = 0;
};

class DirectoryImageSink final : public ImageSink {
 public:
  explicit DirectoryImageSink(std::filesystem::path root) : root_(std::move(root)) {}
  void write(const ImageRecord& record, const RasterImage& raster) override;

 private:
  std::filesystem::path root_;
};

class MemoryImageSink final : public ImageSink {
 public:
  void write(const ImageRecord& record, const RasterImage& raster) override;
  const std::map<Id, RasterImage>& images() const { return images_; }

 private:
  std::mutex mutex_;
  std::map<Id, RasterImage> images_;
};

/// Background donors for PSI.
struct DonorPool {
  std::span<const Id> image_ids;
  const DatasetIndex* index = nullptr;
  const ImageSource* images = nullptr;
};

/// SM+ on one image: separate instances into mattes, rescale each to its own
/// target size about its box centre, pick the background (inpainted or
/// donor), and paste the instances back largest first.
TransformOutcome transform_image_instance_level(const ImageRecord& image,
                                                const RasterImage& raster,
                                                std::span<const InstanceRecord> instances,
                                                const match::SizeSampler& sampler,
                                                const PipelineConfig& cfg,
                                                const DonorPool& donors);

/// SM baseline on one image: resize the whole image by s_hat / mean size.
TransformOutcome transform_image_image_level(const ImageRecord& image, const RasterImage& raster,
                                             std::span<const InstanceRecord> instances,
                                             const match::SizeSampler& sampler,
                                             const PipelineConfig& cfg);

struct ImageFailure {
  Id image_id = 0;
  std::string message;
};

struct TransformReport {
  match::MatchMethod method = match::MatchMethod::kMsmPlus;
  double psi_p = 0.0;
  std::uint64_t seed = 0;
  int bins = 0;
  double tail_quantile = 1.0;
  stats::DivergenceReport before;
  stats::DivergenceReport after;
  std::size_t images_total = 0;
  std::size_t psi_draws = 0;
  std::size_t swapped = 0;
  double swap_fraction = 0.0;
  std::size_t dropped_instances = 0;
  std::vector<ImageFailure> failures;
};

nlohmann::json to_json(const TransformReport& report);

struct DatasetResult {
  DatasetIndex output;
  TransformReport report;
  // One per successfully transformed image, ascending image id. Rasters are
  // handed to the sink and left empty here.
  std::vector<TransformOutcome> outcomes;
};

/// Target size rule for `cfg.method`, built once from the (rectified) target
/// sizes and, for MSM variants, the source sizes.
match::SizeSampler build_sampler(const DatasetIndex& source, const DatasetIndex& target,
                                 const PipelineConfig& cfg);

/// Called after each image with (images finished, images total); may be
/// invoked from worker threads but never concurrently.
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

DatasetResult transform_dataset(const DatasetIndex& source, const DatasetIndex& target,
                                const PipelineConfig& cfg, const ImageSource& images,
                                ImageSink& sink, const ProgressFn& progress = {});

/// image_id,instance_id,s,s_hat,r,kept rows in outcome order.
std::string instance_log_csv(std::span<const TransformOutcome> outcomes);

/// Runs transform_dataset against directories and writes annotations.json,
/// images/, report.json, histogram.csv and instances.csv under `out_dir`.
DatasetResult run_to_directory(const DatasetIndex& source, const DatasetIndex& target,
                               const PipelineConfig& cfg,
                               const std::filesystem::path& source_images,
                               const std::filesystem::path& out_dir,
                               const ProgressFn& progress = {});

}  // namespace scalematch::pipeline
