#include <algorithm>
#include <cmath>
#include <numeric>

#include "scalematch/core/error.hpp"
#include "scalematch/pipeline/pipeline.hpp"

namespace scalematch::pipeline {
namespace {

// Largest side an image-level rescale may produce.
constexpr int kMaxImageSide = 16384;

void require_matching_dims(const ImageRecord& image, const RasterImage& raster) {
  if (raster.width() != image.width || raster.height() != image.height) {
    throw Error(ErrorKind::kIntegrity,
                "image " + std::to_string(image.id) + ": decoded size " +
                    std::to_string(raster.width()) + "x" + std::to_string(raster.height()) +
                    " differs from the annotated " + std::to_string(image.width) + "x" +
                    std::to_string(image.height));
  }
}

AlphaMask dilate_once(const AlphaMask& mask) {
  AlphaMask out = mask;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) > 0.5f) continue;
      const bool touch = (x > 0 && mask.at(x - 1, y) > 0.5f) ||
                         (x + 1 < mask.width() && mask.at(x + 1, y) > 0.5f) ||
                         (y > 0 && mask.at(x, y - 1) > 0.5f) ||
                         (y + 1 < mask.height() && mask.at(x, y + 1) > 0.5f);
      if (touch) out.at(x, y) = 1.0f;
    }
  }
  return out;
}

Segmentation matte_segmentation(const imageops::Matte& matte, const BBox& fallback, int width,
                                int height) {
  AlphaMask frame(width, height);
  bool any = false;
  for (int y = 0; y < matte.alpha.height(); ++y) {
    const int fy = matte.y + y;
    if (fy < 0 || fy >= height) continue;
    for (int x = 0; x < matte.alpha.width(); ++x) {
      const int fx = matte.x + x;
      if (fx < 0 || fx >= width) continue;
      if (matte.alpha.at(x, y) >= 0.5f) {
        frame.at(fx, fy) = 1.0f;
        any = true;
      }
    }
  }
  if (any) return rle_encode(frame);
  // Sub-pixel instances can have no half-opaque pixel; fall back to the box.
  return std::vector<Polygon>{{{fallback.x, fallback.y},
                               {fallback.right(), fallback.y},
                               {fallback.right(), fallback.bottom()},
                               {fallback.x, fallback.bottom()}}};
}

std::vector<InstanceRecord> map_donor_annotations(const DatasetIndex& index, Id donor_id,
                                                  const match::AffineTransform& fit, int width,
                                                  int height) {
  std::vector<InstanceRecord> out;
  for (Id id : index.instance_ids_of(donor_id)) {
    InstanceRecord rec = index.instance(id);
    const BBox box = clip_to_frame(fit.apply(rec.bbox), width, height);
    if (box.area() < 1.0) continue;
    rec.bbox = box;
    rec.segmentation = imageops::transform_segmentation(rec.segmentation, fit, width, height);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

PsiChoice psi_select_background(match::RngStream& rng, double psi_p, Id current,
                                std::span<const Id> pool) {
  const auto others = static_cast<std::size_t>(
      std::count_if(pool.begin(), pool.end(), [&](Id id) { return id != current; }));
  if (psi_p < 1.0 && others == 0) {
    throw Error(ErrorKind::kConfig, "background swapping (psi_p < 1) needs at least one other image");
  }
  const double u = rng.uniform();
  if (!(u > psi_p)) return {BackgroundProvenance::kInpainted, std::nullopt};
  std::size_t pick = rng.index(others);
  for (Id id : pool) {
    if (id == current) continue;
    if (pick == 0) return {BackgroundProvenance::kSwapped, id};
    --pick;
  }
  throw Error(ErrorKind::kPrecondition, "donor selection ran past the pool");
}

TransformOutcome transform_image_instance_level(const ImageRecord& image,
                                                const RasterImage& raster,
                                                std::span<const InstanceRecord> instances,
                                                const match::SizeSampler& sampler,
                                                const PipelineConfig& cfg,
                                                const DonorPool& donors) {
  require_matching_dims(image, raster);
  TransformOutcome out;
  out.image_id = image.id;
  if (instances.empty()) {
    out.raster = raster;
    return out;
  }
  const int width = raster.width();
  const int height = raster.height();

  struct Piece {
    const InstanceRecord* inst = nullptr;
    BBox box;
    std::optional<imageops::Matte> matte;
  };
  std::vector<Piece> pieces;
  AlphaMask hole(width, height);

  // Separation and per-instance rescaling.
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const InstanceRecord& inst = instances[k];
    match::RngStream rng(cfg.seed, image.id, k);
    const double s = object_size(inst.bbox);
    const double s_hat = sampler.target_size(s, rng);
    const auto transform = match::compute_affine(s, s_hat, inst.bbox.center());
    InstanceLog log{inst.id, s, s_hat, transform.r, false};

    AlphaMask mask;
    try {
      mask = rasterize_mask(inst, width, height);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kEmptyMask) throw;
      out.instances.push_back(log);
      continue;
    }
    for (std::size_t i = 0; i < mask.values().size(); ++i) {
      if (mask.values()[i] > 0.5f) hole.values()[i] = 1.0f;
    }
    const imageops::Matte matte = imageops::extract_matte(raster, mask, cfg.matting);
    Piece piece{&inst, clip_to_frame(transform.apply(inst.bbox), width, height), std::nullopt};
    piece.matte = transform.is_identity() ? std::optional(matte) : imageops::warp_matte(matte, transform);
    log.kept = piece.matte.has_value() && piece.box.area() >= 1.0;
    out.instances.push_back(log);
    if (log.kept) pieces.push_back(std::move(piece));
  }

  // Background: inpainted original, or a donor image whose labels are dropped
  // (CP+ keeps them).
  match::RngStream image_rng(cfg.seed, image.id, match::RngStream::kImageOrdinal);
  const PsiChoice choice = psi_select_background(image_rng, cfg.psi_p, image.id, donors.image_ids);
  RasterImage background;
  out.provenance = choice.provenance;
  if (choice.provenance == BackgroundProvenance::kSwapped) {
    if (donors.index == nullptr || donors.images == nullptr) {
      throw Error(ErrorKind::kPrecondition, "background swap requested without a donor source");
    }
    const ImageRecord& donor = donors.index->image(*choice.donor);
    const RasterImage donor_raster = donors.images->load(donor);
    background = imageops::prepare_new_background(donor_raster, width, height);
    out.donor_image_id = donor.id;
    if (cfg.method == match::MatchMethod::kCpPlus) {
      const auto fit = imageops::background_fit_transform(donor_raster.width(),
                                                          donor_raster.height(), width, height);
      out.donor_annotations = map_donor_annotations(*donors.index, donor.id, fit, width, height);
    }
  } else {
    background = imageops::DiffusionInpainter(cfg.inpaint)
                     .fill(imageops::Background{raster, dilate_once(hole)});
  }

  // Combination: largest original instances first so tiny ones stay on top.
  std::stable_sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
    const double sa = object_size(a.inst->bbox);
    const double sb = object_size(b.inst->bbox);
    if (sa != sb) return sa > sb;
    return a.inst->id < b.inst->id;
  });
  std::vector<imageops::Matte> mattes;
  mattes.reserve(pieces.size());
  for (const auto& piece : pieces) mattes.push_back(*piece.matte);
  out.raster = imageops::composite(background, mattes).image;

  for (const auto& piece : pieces) {
    InstanceRecord rec = *piece.inst;
    rec.bbox = piece.box;
    rec.segmentation = matte_segmentation(*piece.matte, piece.box, width, height);
    out.annotations.push_back(std::move(rec));
  }
  std::sort(out.annotations.begin(), out.annotations.end(),
            [](const InstanceRecord& a, const InstanceRecord& b) { return a.id < b.id; });
  return out;
}

TransformOutcome transform_image_image_level(const ImageRecord& image, const RasterImage& raster,
                                             std::span<const InstanceRecord> instances,
                                             const match::SizeSampler& sampler,
                                             const PipelineConfig& cfg) {
  require_matching_dims(image, raster);
  TransformOutcome out;
  out.image_id = image.id;
  std::vector<double> sizes;
  for (const auto& inst : instances) sizes.push_back(object_size(inst.bbox));

  match::RngStream rng(cfg.seed, image.id, match::RngStream::kImageOrdinal);
  const auto factor = match::image_level_scale_factor(sizes, sampler, rng);
  if (!factor) {
    out.raster = raster;
    return out;
  }
  const double f = *factor;
  const double new_w = std::max(1.0, std::round(raster.width() * f));
  const double new_h = std::max(1.0, std::round(raster.height() * f));
  if (new_w > kMaxImageSide || new_h > kMaxImageSide) {
    throw Error(ErrorKind::kPrecondition,
                "image " + std::to_string(image.id) + " would be rescaled beyond " +
                    std::to_string(kMaxImageSide) + " px");
  }
  const int width = static_cast<int>(new_w);
  const int height = static_cast<int>(new_h);
  out.raster = imageops::resize_bilinear(raster, width, height);

  const match::AffineTransform scale{f, 0.0, 0.0};
  for (const auto& inst : instances) {
    const double s = object_size(inst.bbox);
    InstanceRecord rec = inst;
    rec.bbox = clip_to_frame(scale.apply(inst.bbox), width, height);
    const bool kept = rec.bbox.area() >= 1.0;
    out.instances.push_back({inst.id, s, f * s, f, kept});
    if (!kept) continue;
    rec.segmentation = imageops::transform_segmentation(inst.segmentation, scale, width, height);
    out.annotations.push_back(std::move(rec));
  }
  return out;
}

}  // namespace scalematch::pipeline
