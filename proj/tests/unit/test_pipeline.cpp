#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "scalematch/core/coco_io.hpp"
#include "scalematch/core/error.hpp"
#include "scalematch/pipeline/pipeline.hpp"
#include "synth.hpp"

using namespace scalematch;
using namespace scalematch::pipeline;
using match::MatchMethod;
using match::RngStream;
using match::SizeSampler;
using stats::ScaleHistogram;

namespace {

testing::SizeDraw fixed_sizes(std::vector<double> sizes) {
  return [sizes](std::mt19937_64&) { return sizes; };
}

testing::SizeDraw uniform_draw(int lo_count, int hi_count, double lo, double hi) {
  return [=](std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(lo_count, hi_count);
    std::uniform_real_distribution<double> size(lo, hi);
    std::vector<double> out(count(rng));
    for (auto& s : out) s = size(rng);
    return out;
  };
}

std::vector<InstanceRecord> instances_of(const DatasetIndex& idx, Id image_id) {
  std::vector<InstanceRecord> out;
  for (Id id : idx.instance_ids_of(image_id)) out.push_back(idx.instance(id));
  return out;
}

struct Run {
  DatasetResult result;
  std::map<Id, RasterImage> images;
};

Run run(const testing::Corpus& corpus, const DatasetIndex& target, const PipelineConfig& cfg) {
  MemoryImageSource source(corpus.images);
  MemoryImageSink sink;
  auto result = transform_dataset(corpus.index, target, cfg, source, sink);
  return {std::move(result), sink.images()};
}

// Image source that fails for chosen ids.
class FlakySource final : public ImageSource {
 public:
  FlakySource(std::map<Id, RasterImage> images, std::set<Id> broken)
      : inner_(std::move(images)), broken_(std::move(broken)) {}
  RasterImage load(const ImageRecord& record) const override {
    if (broken_.count(record.id)) throw Error(ErrorKind::kIo, "corrupt file");
    return inner_.load(record);
  }

 private:
  MemoryImageSource inner_;
  std::set<Id> broken_;
};

}  // namespace

TEST_CASE("PSI extremes and donor choice") {
  const std::vector<Id> pool{1, 2, 3, 4};
  for (Id image = 1; image <= 200; ++image) {
    RngStream keep(9, image, RngStream::kImageOrdinal);
    CHECK(psi_select_background(keep, 1.0, image, pool).provenance == BackgroundProvenance::kInpainted);
    RngStream swap(9, image, RngStream::kImageOrdinal);
    const auto choice = psi_select_background(swap, 0.0, (image % 4) + 1, pool);
    CHECK(choice.provenance == BackgroundProvenance::kSwapped);
    REQUIRE(choice.donor.has_value());
    CHECK(*choice.donor != (image % 4) + 1);
  }
  RngStream rng(1, 1, 1);
  CHECK_THROWS_AS(psi_select_background(rng, 0.5, 1, std::vector<Id>{1}), Error);
  CHECK(psi_select_background(rng, 1.0, 1, std::vector<Id>{1}).provenance ==
        BackgroundProvenance::kInpainted);
}

TEST_CASE("PSI swap rate at p = 0.4") {
  std::vector<Id> pool(10000);
  std::iota(pool.begin(), pool.end(), 1);
  std::size_t swapped = 0;
  std::map<Id, int> donors;
  for (Id image : pool) {
    RngStream rng(2024, image, RngStream::kImageOrdinal);
    const auto c = psi_select_background(rng, 0.4, image, pool);
    if (c.provenance == BackgroundProvenance::kSwapped) {
      ++swapped;
      ++donors[*c.donor];
    }
  }
  CHECK(std::abs(swapped / 10000.0 - 0.6) <= 0.015);
  CHECK(donors.size() > 4000);  // donors spread over the pool
}

TEST_CASE("CP with p = 1 reproduces the image away from instance outlines") {
  const auto corpus = testing::make_corpus(
      {.images = 2, .width = 64, .height = 64, .sizes = fixed_sizes({12, 20}), .seed = 3});
  PipelineConfig cfg;
  cfg.method = MatchMethod::kCp;
  cfg.psi_p = 1.0;
  const auto& image = corpus.index.image(1);
  const auto insts = instances_of(corpus.index, 1);
  const auto out = transform_image_instance_level(image, corpus.images.at(1), insts,
                                                  SizeSampler::identity(), cfg, {});
  CHECK(out.provenance == BackgroundProvenance::kInpainted);
  REQUIRE(out.annotations.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::abs(out.annotations[k].bbox.x - insts[k].bbox.x) <= 1.0);
    CHECK(std::abs(out.annotations[k].bbox.w - insts[k].bbox.w) <= 1.0);
    CHECK(out.instances[k].ratio == 1.0);
  }
  AlphaMask all(64, 64);
  for (const auto& inst : insts) {
    const auto m = rasterize_mask(inst, 64, 64);
    for (std::size_t i = 0; i < m.values().size(); ++i) all.values()[i] += m.values()[i];
  }
  for (auto& v : all.values()) v = v > 0.5f ? 1.0f : 0.0f;
  const auto dist = testing::oracle_boundary_distance(all);
  const auto& original = corpus.images.at(1);
  std::size_t far = 0, same = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (dist[static_cast<std::size_t>(y) * 64 + x] <= cfg.matting.radius) continue;
      ++far;
      bool equal = true;
      for (int c = 0; c < 3; ++c) equal &= out.raster.at(x, y, c) == original.at(x, y, c);
      same += equal;
    }
  }
  CHECK(same == far);
}

TEST_CASE("single instance forced to size 5") {
  const auto corpus = testing::make_corpus(
      {.images = 2, .width = 48, .height = 48, .sizes = fixed_sizes({10}), .seed = 5});
  PipelineConfig cfg;
  cfg.method = MatchMethod::kRsmPlus;
  const std::vector<Id> pool{1, 2};
  MemoryImageSource images(corpus.images);
  const DonorPool donors{pool, &corpus.index, &images};
  const auto sampler = SizeSampler::random(ScaleHistogram({5, 5}, {1}));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const auto out = transform_image_instance_level(corpus.index.image(1), corpus.images.at(1),
                                                    instances_of(corpus.index, 1), sampler, cfg, donors);
    REQUIRE(out.annotations.size() == 1);
    CHECK(std::abs(object_size(out.annotations[0].bbox) - 5.0) <= 1.0);
    CHECK(out.instances[0].target_size == 5.0);
    CHECK(out.instances[0].ratio == 0.5);
    CHECK(out.raster.width() == 48);
    if (out.provenance == BackgroundProvenance::kSwapped) CHECK(out.donor_image_id == Id{2});
  }
}

TEST_CASE("instance level matches every size; image level cannot") {
  const auto corpus = testing::make_corpus(
      {.images = 2, .width = 96, .height = 96, .sizes = fixed_sizes({8, 16, 32}), .seed = 6});
  const auto sampler = SizeSampler::random(ScaleHistogram({8, 8}, {1}));
  PipelineConfig cfg;
  cfg.psi_p = 1.0;
  cfg.method = MatchMethod::kRsmPlus;
  const auto insts = instances_of(corpus.index, 1);
  const auto plus = transform_image_instance_level(corpus.index.image(1), corpus.images.at(1),
                                                   insts, sampler, cfg, {});
  REQUIRE(plus.annotations.size() == 3);
  for (const auto& a : plus.annotations) CHECK(std::abs(object_size(a.bbox) - 8.0) <= 1.0);

  cfg.method = MatchMethod::kRsm;
  const auto whole = transform_image_image_level(corpus.index.image(1), corpus.images.at(1), insts,
                                                 sampler, cfg);
  REQUIRE(whole.annotations.size() == 3);
  int matched = 0;
  for (const auto& a : whole.annotations) matched += std::abs(object_size(a.bbox) - 8.0) <= 1.0;
  CHECK(matched <= 1);
  // The image-level factor maps the mean (56/3) onto 8.
  CHECK(whole.instances[0].ratio == doctest::Approx(8.0 / (56.0 / 3.0)));
}

TEST_CASE("image level keeps size ratios and resizes the frame") {
  const auto corpus = testing::make_corpus(
      {.images = 1, .width = 100, .height = 80, .sizes = fixed_sizes({8, 32}), .seed = 7});
  const auto sampler = SizeSampler::random(ScaleHistogram({10, 10}, {1}));
  PipelineConfig cfg;
  cfg.method = MatchMethod::kRsm;
  const auto out = transform_image_image_level(corpus.index.image(1), corpus.images.at(1),
                                               instances_of(corpus.index, 1), sampler, cfg);
  const double f = 10.0 / 20.0;
  CHECK(out.raster.width() == 50);
  CHECK(out.raster.height() == 40);
  REQUIRE(out.annotations.size() == 2);
  const double a = object_size(out.annotations[0].bbox);
  const double b = object_size(out.annotations[1].bbox);
  CHECK(std::max(a, b) / std::min(a, b) == doctest::Approx(4.0));
  CHECK(std::min(a, b) == doctest::Approx(8 * f));

  const auto single = testing::make_corpus(
      {.images = 1, .width = 60, .height = 60, .sizes = fixed_sizes({20}), .seed = 8});
  const auto one = transform_image_image_level(single.index.image(1), single.images.at(1),
                                               instances_of(single.index, 1), sampler, cfg);
  REQUIRE(one.annotations.size() == 1);
  CHECK(std::abs(object_size(one.annotations[0].bbox) - one.instances[0].target_size) <= 1.0);
}

TEST_CASE("images without instances pass through") {
  const auto img = testing::textured_image(20, 20, 1);
  const ImageRecord rec{1, "a.png", 20, 20};
  const auto sampler = SizeSampler::identity();
  const auto a = transform_image_instance_level(rec, img, {}, sampler, {}, {});
  CHECK(a.raster == img);
  CHECK(a.provenance == BackgroundProvenance::kOriginal);
  const auto b = transform_image_image_level(rec, img, {}, sampler, {});
  CHECK(b.raster == img);
}

TEST_CASE("decoded size must match the record") {
  const ImageRecord rec{1, "a.png", 21, 20};
  CHECK_THROWS_AS(transform_image_image_level(rec, RasterImage(20, 20), {}, SizeSampler::identity(), {}),
                  Error);
}

TEST_CASE("self match stays at the noise floor") {
  const auto corpus = testing::make_corpus(
      {.images = 60, .width = 80, .height = 80, .sizes = uniform_draw(2, 6, 6, 30), .seed = 9});
  PipelineConfig cfg;
  cfg.method = MatchMethod::kMsmPlus;
  cfg.tail_quantile = 1.0;
  const auto exact = run(corpus, corpus.index, cfg).result.report;
  CHECK(exact.before.js == 0.0);
  CHECK(exact.after.js <= exact.before.js + 1e-12);

  cfg.tail_quantile = 0.99;
  const auto trimmed = run(corpus, corpus.index, cfg).result.report;
  const auto n = corpus.index.instances().size();
  const auto floor = stats::compare_sizes(testing::uniform_sizes(n, 6, 30, 1),
                                          testing::uniform_sizes(n, 6, 30, 2), cfg.bins);
  CHECK(trimmed.after.js <= floor.js);
}

TEST_CASE("copy-paste leaves the size distribution alone") {
  const auto corpus = testing::make_corpus(
      {.images = 20, .width = 64, .height = 64, .sizes = uniform_draw(1, 4, 5, 25), .seed = 10});
  const auto target = testing::boxes_index(testing::uniform_sizes(500, 2, 12, 3));
  for (auto method : {MatchMethod::kCp, MatchMethod::kCpPlus}) {
    PipelineConfig cfg;
    cfg.method = method;
    cfg.psi_p = 0.0;
    const auto r = run(corpus, target, cfg);
    for (const auto& outcome : r.result.outcomes) {
      for (const auto& log : outcome.instances) CHECK(log.ratio == 1.0);
    }
    if (method == MatchMethod::kCp) {
      CHECK(r.result.report.after.js == r.result.report.before.js);
      CHECK(r.result.output.instances().size() == corpus.index.instances().size());
    } else {
      CHECK(r.result.output.instances().size() > corpus.index.instances().size());
    }
  }
}

TEST_CASE("CP+ keeps donor labels under fresh ids; other methods purge them") {
  const auto corpus = testing::make_corpus(
      {.images = 12, .width = 64, .height = 64, .sizes = uniform_draw(1, 3, 6, 20), .seed = 11});
  const auto target = testing::boxes_index(testing::uniform_sizes(300, 4, 10, 5));
  const Id max_source = corpus.index.max_instance_id();
  for (auto method : {MatchMethod::kCp, MatchMethod::kCpPlus, MatchMethod::kRsmPlus, MatchMethod::kMsmPlus}) {
    PipelineConfig cfg;
    cfg.method = method;
    cfg.psi_p = 0.0;
    const auto r = run(corpus, target, cfg);
    for (const auto& outcome : r.result.outcomes) {
      REQUIRE(outcome.provenance == BackgroundProvenance::kSwapped);
      const auto donor_ids = corpus.index.instance_ids_of(*outcome.donor_image_id);
      const std::set<Id> donor(donor_ids.begin(), donor_ids.end());
      std::size_t fresh = 0;
      for (Id id : r.result.output.instance_ids_of(outcome.image_id)) {
        CHECK(donor.count(id) == 0);
        if (id > max_source) ++fresh;
      }
      if (method == MatchMethod::kCpPlus) {
        CHECK(fresh == outcome.donor_annotations.size());
      } else {
        CHECK(fresh == 0);
      }
    }
  }
}

TEST_CASE("every method moves the sizes toward the target") {
  const auto corpus = testing::make_corpus(
      {.images = 80, .width = 96, .height = 96, .sizes = uniform_draw(1, 5, 20, 60), .seed = 12});
  const auto target = testing::boxes_index(testing::uniform_sizes(2000, 3, 15, 6));
  for (auto method : {MatchMethod::kRsm, MatchMethod::kMsm, MatchMethod::kRsmPlus, MatchMethod::kMsmPlus}) {
    PipelineConfig cfg;
    cfg.method = method;
    const auto report = run(corpus, target, cfg).result.report;
    CAPTURE(match::to_string(method));
    CHECK(report.after.js < report.before.js);
  }
}

TEST_CASE("output annotations are sound") {
  const auto corpus = testing::make_corpus(
      {.images = 40, .width = 64, .height = 48, .sizes = uniform_draw(1, 6, 4, 40), .seed = 13});
  const auto target = testing::boxes_index(testing::uniform_sizes(500, 2, 60, 7));
  for (auto method : {MatchMethod::kRsm, MatchMethod::kRsmPlus, MatchMethod::kMsmPlus}) {
    PipelineConfig cfg;
    cfg.method = method;
    const auto r = run(corpus, target, cfg);
    const auto& out = r.result.output;
    for (const auto& [id, inst] : out.instances()) {
      const auto& img = out.image(inst.image_id);
      CHECK(inst.bbox.x >= 0.0);
      CHECK(inst.bbox.y >= 0.0);
      CHECK(inst.bbox.right() <= img.width + 1e-9);
      CHECK(inst.bbox.bottom() <= img.height + 1e-9);
      CHECK(r.images.at(inst.image_id).width() == img.width);
    }
    for (const auto& outcome : r.result.outcomes) {
      for (const auto& log : outcome.instances) {
        const auto& src = corpus.index.instance(log.instance_id);
        const auto pre_clip = match::AffineTransform{log.ratio, 0, 0}.apply(src.bbox);
        CHECK(std::abs(object_size(pre_clip) - log.target_size) <= 1.0);
        const bool present = out.instances().count(log.instance_id) > 0;
        CHECK(present == log.kept);
      }
    }
  }
}

TEST_CASE("instance-level methods need masks; image-level ones do not") {
  const auto sizes = testing::uniform_sizes(40, 5, 30, 8);
  const auto boxes = testing::boxes_index(sizes, 4);
  std::map<Id, RasterImage> images;
  for (const auto& [id, img] : boxes.images()) images.emplace(id, testing::textured_image(img.width, img.height, id));
  const auto target = testing::boxes_index(testing::uniform_sizes(100, 2, 10, 9));
  MemoryImageSource source(images);
  MemoryImageSink sink;
  PipelineConfig cfg;
  cfg.method = MatchMethod::kMsmPlus;
  try {
    transform_dataset(boxes, target, cfg, source, sink);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kPrecondition);
  }
  cfg.method = MatchMethod::kRsm;
  const auto r = transform_dataset(boxes, target, cfg, source, sink);
  CHECK(r.report.after.js < r.report.before.js);
}

TEST_CASE("failures within budget are recorded, beyond it abort") {
  const auto corpus = testing::make_corpus(
      {.images = 20, .width = 40, .height = 40, .sizes = fixed_sizes({10}), .seed = 14});
  const auto target = testing::boxes_index(testing::uniform_sizes(100, 2, 10, 10));
  PipelineConfig cfg;
  MemoryImageSink sink;
  const FlakySource two(corpus.images, {3, 7});
  const auto r = transform_dataset(corpus.index, target, cfg, two, sink);
  REQUIRE(r.report.failures.size() == 2);
  CHECK(r.report.failures[0].image_id == 3);
  CHECK(r.output.images().size() == 18);
  const FlakySource three(corpus.images, {3, 7, 11});
  try {
    transform_dataset(corpus.index, target, cfg, three, sink);
    FAIL("expected a failure-budget error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFailureBudget);
  }
}

TEST_CASE("configuration is validated") {
  PipelineConfig cfg;
  cfg.psi_p = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.bins = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.workers = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  const auto corpus = testing::make_corpus(
      {.images = 1, .width = 30, .height = 30, .sizes = fixed_sizes({8}), .seed = 15});
  cfg = {};
  cfg.psi_p = 0.4;
  MemoryImageSource source(corpus.images);
  MemoryImageSink sink;
  try {
    transform_dataset(corpus.index, corpus.index, cfg, source, sink);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
}

TEST_CASE("runs are reproducible across worker counts") {
  const auto corpus = testing::make_corpus(
      {.images = 16, .width = 64, .height = 64, .sizes = uniform_draw(1, 5, 6, 30), .seed = 16});
  const auto target = testing::boxes_index(testing::uniform_sizes(400, 3, 12, 11));
  PipelineConfig cfg;
  cfg.method = MatchMethod::kRsmPlus;
  cfg.seed = 77;
  cfg.workers = 1;
  const auto a = run(corpus, target, cfg);
  cfg.workers = 4;
  const auto b = run(corpus, target, cfg);
  CHECK(dump_index(a.result.output) == dump_index(b.result.output));
  CHECK(instance_log_csv(a.result.outcomes) == instance_log_csv(b.result.outcomes));
  CHECK(to_json(a.result.report).dump() == to_json(b.result.report).dump());
  CHECK(a.images == b.images);
  cfg.seed = 78;
  const auto c = run(corpus, target, cfg);
  CHECK(instance_log_csv(a.result.outcomes) != instance_log_csv(c.result.outcomes));
}

TEST_CASE("report counts PSI draws") {
  const auto corpus = testing::make_corpus(
      {.images = 30, .width = 32, .height = 32, .sizes = fixed_sizes({8}), .seed = 17});
  const auto target = testing::boxes_index(testing::uniform_sizes(100, 3, 6, 12));
  PipelineConfig cfg;
  cfg.psi_p = 0.4;
  const auto report = run(corpus, target, cfg).result.report;
  CHECK(report.psi_draws == 30);
  CHECK(report.swap_fraction == doctest::Approx(report.swapped / 30.0));
  const auto j = to_json(report);
  CHECK(j.at("method") == "msm+");
  CHECK(j.at("psi_p") == 0.4);
  CHECK(j.at("before").contains("js"));
  CHECK(j.at("after").contains("kl_forward"));
}

TEST_CASE("run_to_directory writes the dataset and reports") {
  const auto corpus = testing::make_corpus(
      {.images = 4, .width = 40, .height = 40, .sizes = fixed_sizes({12, 6}), .seed = 18});
  const auto root = std::filesystem::temp_directory_path() / "scalematch_pipeline_run";
  std::filesystem::remove_all(root);
  write_index(corpus.index, corpus.images, root / "src");
  const auto target = testing::boxes_index(testing::uniform_sizes(100, 3, 6, 13));
  PipelineConfig cfg;
  run_to_directory(corpus.index, target, cfg, root / "src" / kImagesDirName, root / "out");
  for (const char* name : {"annotations.json", "report.json", "histogram.csv",
                           "histogram_before.csv", "instances.csv"}) {
    CHECK(std::filesystem::exists(root / "out" / name));
  }
  const auto out = load_index(root / "out" / kAnnotationsFileName, IndexRole::kSourceWithMasks);
  CHECK(out.images().size() == 4);
  for (const auto& [id, img] : out.images()) {
    CHECK(std::filesystem::exists(root / "out" / kImagesDirName / img.file_name));
  }
  std::filesystem::remove_all(root);
}
