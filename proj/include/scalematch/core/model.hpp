#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace scalematch {

using Id = std::int64_t;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in image pixels, top-left anchored. Real-valued; rounding
/// only happens when an index is written out.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  double area() const { return w * h; }
  bool valid() const;
};

/// Object size: square root of the box area, in pixels.
double object_size(const BBox& box);

/// Intersection of `box` with [0,width]x[0,height]. The result may have zero
/// width or height when the box lies outside the frame.
BBox clip_to_frame(const BBox& box, int width, int height);

using Polygon = std::vector<Point2>;

/// COCO run-length mask. Runs alternate background/foreground starting with
/// background and walk the image column by column.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;
};

using Segmentation = std::variant<std::monostate, std::vector<Polygon>, RleMask>;

struct InstanceRecord {
  Id id = 0;
  Id image_id = 0;
  BBox bbox;
  Segmentation segmentation;
  Id category = 0;
  // COCO `iscrowd` or TinyPerson `ignore`; carried through untouched.
  bool ignore = false;

  bool has_segmentation() const {
    return !std::holds_alternative<std::monostate>(segmentation);
  }
};

struct ImageRecord {
  Id id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
};

struct Category {
  Id id = 0;
  std::string name;
  std::string supercategory;
};

enum class IndexRole { kSourceWithMasks, kBoxesOnly };

/// Validated annotation set. Immutable once built; the constructor enforces
/// every cross-record invariant and throws scalematch::Error(kIntegrity)
/// naming the offending records.
class DatasetIndex {
 public:
  DatasetIndex() = default;
  DatasetIndex(IndexRole role, std::vector<ImageRecord> images,
               std::vector<InstanceRecord> instances,
               std::vector<Category> categories = {});

  IndexRole role() const { return role_; }
  const std::map<Id, ImageRecord>& images() const { return images_; }
  const std::map<Id, InstanceRecord>& instances() const { return instances_; }
  const std::vector<Category>& categories() const { return categories_; }

  const ImageRecord& image(Id id) const;
  const InstanceRecord& instance(Id id) const;

  /// Instances of one image, ascending by id. Empty for unknown images.
  std::span<const Id> instance_ids_of(Id image_id) const;

  bool empty() const { return instances_.empty(); }

  /// Same records under another role, re-validated for it.
  DatasetIndex with_role(IndexRole role) &&;
  Id max_instance_id() const;

 private:
  IndexRole role_ = IndexRole::kBoxesOnly;
  std::map<Id, ImageRecord> images_;
  std::map<Id, InstanceRecord> instances_;
  std::map<Id, std::vector<Id>> by_image_;
  std::vector<Category> categories_;
};

}  // namespace scalematch
