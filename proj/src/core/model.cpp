#include "scalematch/core/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scalematch/core/error.hpp"

namespace scalematch {

bool BBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
         std::isfinite(h) && w > 0.0 && h > 0.0;
}

double object_size(const BBox& box) { return std::sqrt(box.w * box.h); }

BBox clip_to_frame(const BBox& box, int width, int height) {
  const double x0 = std::clamp(box.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(box.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(box.right(), 0.0, static_cast<double>(width));
  const double y1 = std::clamp(box.bottom(), 0.0, static_cast<double>(height));
  return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

namespace {

std::string join_ids(const std::vector<Id>& ids) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out << ", ";
    if (i == 20) {
      out << "... (" << ids.size() - 20 << " more)";
      break;
    }
    out << ids[i];
  }
  return out.str();
}

}  // namespace

DatasetIndex::DatasetIndex(IndexRole role, std::vector<ImageRecord> images,
                           std::vector<InstanceRecord> instances,
                           std::vector<Category> categories)
    : role_(role), categories_(std::move(categories)) {
  for (auto& image : images) {
    if (image.width < 1 || image.height < 1) {
      throw Error(ErrorKind::kIntegrity,
                  "image " + std::to_string(image.id) + " has non-positive dimensions");
    }
    const Id id = image.id;
    if (!images_.emplace(id, std::move(image)).second) {
      throw Error(ErrorKind::kIntegrity, "duplicate image id " + std::to_string(id));
    }
  }

  std::vector<Id> dangling;
  std::vector<Id> missing_masks;
  for (auto& inst : instances) {
    if (!inst.bbox.valid()) {
      throw Error(ErrorKind::kIntegrity,
                  "annotation " + std::to_string(inst.id) + " has a zero-area or non-finite bbox");
    }
    if (!images_.contains(inst.image_id)) dangling.push_back(inst.id);
    if (role_ == IndexRole::kSourceWithMasks && !inst.has_segmentation()) {
      missing_masks.push_back(inst.id);
    }
    const Id id = inst.id;
    const Id image_id = inst.image_id;
    if (!instances_.emplace(id, std::move(inst)).second) {
      throw Error(ErrorKind::kIntegrity, "duplicate annotation id " + std::to_string(id));
    }
    by_image_[image_id].push_back(id);
  }
  if (!dangling.empty()) {
    std::sort(dangling.begin(), dangling.end());
    throw Error(ErrorKind::kIntegrity,
                "annotations reference unknown image ids: " + join_ids(dangling));
  }
  if (!missing_masks.empty()) {
    std::sort(missing_masks.begin(), missing_masks.end());
    throw Error(ErrorKind::kIntegrity,
                "source index requires segmentation; missing on annotations: " +
                    join_ids(missing_masks));
  }
  for (auto& [image_id, ids] : by_image_) std::sort(ids.begin(), ids.end());
}

const ImageRecord& DatasetIndex::image(Id id) const {
  auto it = images_.find(id);
  if (it == images_.end()) {
    throw Error(ErrorKind::kIntegrity, "unknown image id " + std::to_string(id));
  }
  return it->second;
}

const InstanceRecord& DatasetIndex::instance(Id id) const {
  auto it = instances_.find(id);
  if (it == instances_.end()) {
    throw Error(ErrorKind::kIntegrity, "unknown annotation id " + std::to_string(id));
  }
  return it->second;
}

std::span<const Id> DatasetIndex::instance_ids_of(Id image_id) const {
  auto it = by_image_.find(image_id);
  if (it == by_image_.end()) return {};
  return it->second;
}

DatasetIndex DatasetIndex::with_role(IndexRole role) && {
  std::vector<ImageRecord> images;
  std::vector<InstanceRecord> instances;
  images.reserve(images_.size());
  instances.reserve(instances_.size());
  for (auto& [id, img] : images_) images.push_back(std::move(img));
  for (auto& [id, inst] : instances_) instances.push_back(std::move(inst));
  return DatasetIndex(role, std::move(images), std::move(instances), std::move(categories_));
}

Id DatasetIndex::max_instance_id() const {
  return instances_.empty() ? 0 : instances_.rbegin()->first;
}

}  // namespace scalematch
