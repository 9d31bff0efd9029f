#pragma once

#include <optional>
#include <span>
#include <vector>

#include "scalematch/core/raster.hpp"
#include "scalematch/match/matchers.hpp"

namespace scalematch::imageops {

struct MattingParams {
  int radius = 4;
  double regularization = 1e-4;
};

struct InpaintParams {
  int max_iters = 500;
  // Stop once no hole pixel moves by more than this many intensity levels.
  double tol = 0.1;
};

/// Instance cutout: straight (non-premultiplied) color plus soft alpha, with
/// the crop's top-left corner at (x, y) in image coordinates.
struct Matte {
  RasterImage raster;
  AlphaMask alpha;
  int x = 0;
  int y = 0;

  PixelRect frame_rect() const { return {x, y, x + alpha.width(), y + alpha.height()}; }
};

/// Image with the removed-instance pixels flagged (hole == 1).
struct Background {
  RasterImage raster;
  AlphaMask hole;
};

/// Cuts the masked instance out of `image` and softens its outline with a
/// guided filter steered by the image's luminance. Pixels farther than
/// `radius` from the mask boundary keep their binary value; the band in
/// between is feathered, with mask pixels kept in [0.5,1] and the rest below
/// 0.5, so alpha >= 0.5 reproduces the mask. The radius is capped at a
/// quarter of the mask's smaller side. radius 0 returns the binary mask
/// untouched.
Matte extract_matte(const RasterImage& image, const AlphaMask& mask, const MattingParams& params);

/// Resamples the matte under `transform` (bilinear, area-averaged when
/// shrinking, premultiplied by alpha) and tight-crops to the alpha support.
/// The alpha >= 0.5 region is resampled as a binary mask alongside, and the
/// soft alpha is kept on its side of 0.5 accordingly. nullopt when the
/// instance collapses below one pixel.
std::optional<Matte> warp_matte(const Matte& matte, const match::AffineTransform& transform);

/// Hole filling strategy. Implementations must leave non-hole pixels intact.
class Inpainter {
 public:
  virtual ~Inpainter() = default;
  virtual RasterImage fill(const Background& background) const = 0;
};

/// Harmonic fill: hole pixels are seeded layer by layer from the known ring,
/// then relaxed by Gauss-Seidel averaging of their 4-neighbours until the
/// largest update drops below `tol` or `max_iters` sweeps have run.
class DiffusionInpainter final : public Inpainter {
 public:
  explicit DiffusionInpainter(InpaintParams params = {}) : params_(params) {}
  RasterImage fill(const Background& background) const override;

 private:
  InpaintParams params_;
};

RasterImage inpaint(const Background& background, const InpaintParams& params);

/// Bilinear resize; shrinking averages a supersampled footprint.
RasterImage resize_bilinear(const RasterImage& image, int width, int height);

/// Aspect-preserving scale so the candidate covers width x height, then a
/// centred crop to exactly that size.
RasterImage prepare_new_background(const RasterImage& candidate, int width, int height);

/// Maps candidate pixel coordinates to output coordinates for
/// prepare_new_background.
match::AffineTransform background_fit_transform(int candidate_width, int candidate_height,
                                                int width, int height);

/// Carries a segmentation through `transform` onto a dst_width x dst_height
/// frame. Polygons are mapped vertex by vertex; RLE masks are resampled at
/// pixel centres (nearest).
Segmentation transform_segmentation(const Segmentation& seg,
                                    const match::AffineTransform& transform, int dst_width,
                                    int dst_height);

struct CompositeResult {
  RasterImage image;
  // Positions in the input list of mattes that fell entirely off the frame.
  std::vector<std::size_t> skipped;
};

/// Alpha-over of each matte, in list order, onto a copy of `background`.
CompositeResult composite(const RasterImage& background, std::span<const Matte> mattes);

}  // namespace scalematch::imageops
