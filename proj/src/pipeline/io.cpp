#include "scalematch/core/coco_io.hpp"
#include "scalematch/core/error.hpp"
#include "scalematch/core/image_io.hpp"
#include "scalematch/pipeline/pipeline.hpp"

namespace scalematch::pipeline {

RasterImage DirectoryImageSource::load(const ImageRecord& record) const {
  return read_image(root_ / record.file_name);
}

RasterImage MemoryImageSource::load(const ImageRecord& record) const {
  auto it = images_.find(record.id);
  if (it == images_.end()) {
    throw Error(ErrorKind::kIo, "no raster for image " + std::to_string(record.id));
  }
  return it->second;
}

void DirectoryImageSink::write(const ImageRecord& record, const RasterImage& raster) {
  const auto path = root_ / record.file_name;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + path.parent_path().string());
  write_png(path, raster);
}

void MemoryImageSink::write(const ImageRecord& record, const RasterImage& raster) {
  std::lock_guard lock(mutex_);
  images_[record.id] = raster;
}

}  // namespace scalematch::pipeline
