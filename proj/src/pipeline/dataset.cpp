#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "scalematch/core/coco_io.hpp"
#include "scalematch/core/error.hpp"
#include "scalematch/pipeline/pipeline.hpp"

namespace scalematch::pipeline {
namespace {

std::vector<InstanceRecord> instances_of(const DatasetIndex& index, Id image_id) {
  std::vector<InstanceRecord> out;
  for (Id id : index.instance_ids_of(image_id)) out.push_back(index.instance(id));
  return out;
}

std::vector<double> image_mean_sizes(const DatasetIndex& index) {
  std::vector<double> means;
  for (const auto& [image_id, image] : index.images()) {
    const auto ids = index.instance_ids_of(image_id);
    if (ids.empty()) continue;
    double sum = 0.0;
    for (Id id : ids) sum += object_size(index.instance(id).bbox);
    means.push_back(sum / static_cast<double>(ids.size()));
  }
  return means;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(psi_p >= 0.0 && psi_p <= 1.0)) throw Error(ErrorKind::kConfig, "psi_p must lie in [0,1]");
  if (bins < 1) throw Error(ErrorKind::kConfig, "bins must be >= 1");
  if (!(tail_quantile > 0.5 && tail_quantile <= 1.0)) {
    throw Error(ErrorKind::kConfig, "tail_quantile must lie in (0.5, 1]");
  }
  if (workers < 1) throw Error(ErrorKind::kConfig, "workers must be >= 1");
  if (matting.radius < 0 || !(matting.regularization > 0.0)) {
    throw Error(ErrorKind::kConfig, "matting radius must be >= 0 and regularization > 0");
  }
  if (inpaint.max_iters < 0 || !(inpaint.tol >= 0.0)) {
    throw Error(ErrorKind::kConfig, "inpaint max_iters and tol must be non-negative");
  }
  if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) {
    throw Error(ErrorKind::kConfig, "failure_budget must lie in [0,1]");
  }
}

std::string_view to_string(BackgroundProvenance provenance) {
  switch (provenance) {
    case BackgroundProvenance::kOriginal: return "original";
    case BackgroundProvenance::kInpainted: return "inpainted";
    case BackgroundProvenance::kSwapped: return "swapped";
  }
  return "?";
}

match::SizeSampler build_sampler(const DatasetIndex& source, const DatasetIndex& target,
                                 const PipelineConfig& cfg) {
  const stats::SizeFilter filter{cfg.include_ignored};
  const auto target_sizes =
      stats::rectify_sizes(stats::collect_sizes(target, filter), cfg.tail_quantile);
  switch (cfg.method) {
    case match::MatchMethod::kRsm:
    case match::MatchMethod::kRsmPlus:
      return match::SizeSampler::random(stats::build_histogram(target_sizes, cfg.bins, cfg.layout));
    case match::MatchMethod::kMsm: {
      auto means = image_mean_sizes(source);
      if (means.empty()) throw Error(ErrorKind::kEmptyInput, "source has no annotated images");
      return match::SizeSampler::monotone(stats::EmpiricalCdf(std::move(means)),
                                          stats::EmpiricalCdf(target_sizes));
    }
    case match::MatchMethod::kMsmPlus:
      return match::SizeSampler::monotone(stats::EmpiricalCdf(stats::collect_sizes(source, filter)),
                                          stats::EmpiricalCdf(target_sizes));
    case match::MatchMethod::kCp:
    case match::MatchMethod::kCpPlus:
      return match::SizeSampler::identity();
  }
  throw Error(ErrorKind::kConfig, "unhandled method");
}

DatasetResult transform_dataset(const DatasetIndex& source, const DatasetIndex& target,
                                const PipelineConfig& cfg, const ImageSource& images,
                                ImageSink& sink, const ProgressFn& progress) {
  cfg.validate();
  const bool instance_level = match::is_instance_level(cfg.method);
  if (instance_level && source.role() != IndexRole::kSourceWithMasks) {
    throw Error(ErrorKind::kPrecondition,
                std::string("method ") + std::string(match::to_string(cfg.method)) +
                    " needs a source index with segmentation masks");
  }
  if (instance_level && cfg.psi_p < 1.0 && source.images().size() < 2) {
    throw Error(ErrorKind::kConfig, "background swapping (psi_p < 1) needs at least two images");
  }

  const match::SizeSampler sampler = build_sampler(source, target, cfg);
  std::vector<Id> image_ids;
  for (const auto& [id, image] : source.images()) image_ids.push_back(id);
  const DonorPool donors{image_ids, &source, &images};

  std::vector<std::optional<TransformOutcome>> outcomes(image_ids.size());
  std::vector<std::optional<std::string>> failures(image_ids.size());
  std::atomic<std::size_t> next{0};
  std::size_t finished = 0;
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < image_ids.size(); i = next.fetch_add(1)) {
      try {
        const ImageRecord& record = source.image(image_ids[i]);
        const auto instances = instances_of(source, record.id);
        const RasterImage raster = images.load(record);
        TransformOutcome outcome =
            instance_level
                ? transform_image_instance_level(record, raster, instances, sampler, cfg, donors)
                : transform_image_image_level(record, raster, instances, sampler, cfg);
        outcome.width = outcome.raster.width();
        outcome.height = outcome.raster.height();
        ImageRecord written{record.id, png_file_name(record.file_name), outcome.width,
                            outcome.height};
        sink.write(written, outcome.raster);
        outcome.raster = RasterImage();
        outcomes[i] = std::move(outcome);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(++finished, image_ids.size());
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < cfg.workers; ++w) pool.emplace_back(worker);
    worker();
  }

  DatasetResult result;
  TransformReport& report = result.report;
  report.method = cfg.method;
  report.psi_p = cfg.psi_p;
  report.seed = cfg.seed;
  report.bins = cfg.bins;
  report.tail_quantile = cfg.tail_quantile;
  report.images_total = image_ids.size();
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (failures[i]) report.failures.push_back({image_ids[i], *failures[i]});
  }
  if (static_cast<double>(report.failures.size()) >
      cfg.failure_budget * static_cast<double>(image_ids.size())) {
    throw Error(ErrorKind::kFailureBudget,
                std::to_string(report.failures.size()) + " of " +
                    std::to_string(image_ids.size()) + " images failed; first: image " +
                    std::to_string(report.failures.front().image_id) + ": " +
                    report.failures.front().message);
  }

  std::vector<ImageRecord> out_images;
  std::vector<InstanceRecord> out_instances;
  Id next_donor_id = std::max(source.max_instance_id(), Id{0}) + 1;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (!outcomes[i]) continue;
    TransformOutcome& outcome = *outcomes[i];
    const ImageRecord& record = source.image(outcome.image_id);
    out_images.push_back({record.id, png_file_name(record.file_name), outcome.width,
                          outcome.height});
    for (const auto& inst : outcome.annotations) out_instances.push_back(inst);
    for (auto& inst : outcome.donor_annotations) {
      inst.id = next_donor_id++;
      inst.image_id = record.id;
      out_instances.push_back(inst);
    }
    if (outcome.provenance != BackgroundProvenance::kOriginal) ++report.psi_draws;
    if (outcome.provenance == BackgroundProvenance::kSwapped) ++report.swapped;
    for (const auto& log : outcome.instances) {
      if (!log.kept) ++report.dropped_instances;
    }
    result.outcomes.push_back(std::move(outcome));
  }
  report.swap_fraction = report.psi_draws == 0 ? 0.0
                                                : static_cast<double>(report.swapped) /
                                                      static_cast<double>(report.psi_draws);

  const bool all_masked = std::all_of(out_instances.begin(), out_instances.end(),
                                      [](const InstanceRecord& r) { return r.has_segmentation(); });
  result.output = DatasetIndex(all_masked ? IndexRole::kSourceWithMasks : IndexRole::kBoxesOnly,
                               std::move(out_images), std::move(out_instances),
                               source.categories());

  const stats::SizeFilter filter{cfg.include_ignored};
  const auto target_sizes = stats::collect_sizes(target, filter);
  report.before = stats::compare_sizes(stats::collect_sizes(source, filter), target_sizes, cfg.bins);
  report.after =
      stats::compare_sizes(stats::collect_sizes(result.output, filter), target_sizes, cfg.bins);
  return result;
}

nlohmann::json to_json(const TransformReport& report) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"image_id", f.image_id}, {"message", f.message}});
  }
  return {{"method", match::to_string(report.method)},
          {"psi_p", report.psi_p},
          {"seed", report.seed},
          {"bins", report.bins},
          {"tail_quantile", report.tail_quantile},
          {"before", stats::to_json(report.before)},
          {"after", stats::to_json(report.after)},
          {"images_total", report.images_total},
          {"psi_draws", report.psi_draws},
          {"swapped", report.swapped},
          {"swap_fraction", report.swap_fraction},
          {"dropped_instances", report.dropped_instances},
          {"failures", std::move(failures)}};
}

std::string instance_log_csv(std::span<const TransformOutcome> outcomes) {
  std::ostringstream out;
  out.precision(17);
  out << "image_id,instance_id,s,s_hat,r,kept\n";
  for (const auto& outcome : outcomes) {
    for (const auto& log : outcome.instances) {
      out << outcome.image_id << ',' << log.instance_id << ',' << log.size << ','
          << log.target_size << ',' << log.ratio << ',' << (log.kept ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

DatasetResult run_to_directory(const DatasetIndex& source, const DatasetIndex& target,
                               const PipelineConfig& cfg,
                               const std::filesystem::path& source_images,
                               const std::filesystem::path& out_dir,
                               const ProgressFn& progress) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / kImagesDirName, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  const DirectoryImageSource images(source_images);
  DirectoryImageSink sink(out_dir / kImagesDirName);
  DatasetResult result = transform_dataset(source, target, cfg, images, sink, progress);
  write_annotations(result.output, out_dir / kAnnotationsFileName);
  write_text(out_dir / "report.json", to_json(result.report).dump(2) + "\n");
  write_text(out_dir / "histogram.csv", stats::to_csv(result.report.after));
  write_text(out_dir / "histogram_before.csv", stats::to_csv(result.report.before));
  write_text(out_dir / "instances.csv", instance_log_csv(result.outcomes));
  return result;
}

}  // namespace scalematch::pipeline
