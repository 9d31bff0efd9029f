#pragma once

#include <filesystem>

#include "scalematch/core/raster.hpp"

namespace scalematch {

/// Decodes a PNG or JPEG file (sniffed by signature) to 8-bit RGB. Gray and
/// alpha channels are converted; alpha is composited onto black by libpng.
RasterImage read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RasterImage& image);

}  // namespace scalematch
