#include "scalematch/core/coco_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "scalematch/core/error.hpp"
#include "scalematch/core/image_io.hpp"

namespace scalematch {
namespace {

// Emitted coordinates are rounded to this step.
constexpr double kCoordStep = 1e-4;

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorKind::kParse, "COCO schema: " + what);
}

Id read_id(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) {
    schema_error(std::string(where) + " needs integer '" + key + "'");
  }
  return it->get<Id>();
}

double read_number(const json& value, const std::string& where) {
  if (!value.is_number()) schema_error(where + " must be numeric");
  return value.get<double>();
}

Segmentation read_segmentation(const json& seg, Id ann_id) {
  const std::string where = "annotation " + std::to_string(ann_id) + " segmentation";
  if (seg.is_null()) return std::monostate{};
  if (seg.is_array()) {
    if (seg.empty()) return std::monostate{};
    std::vector<Polygon> polygons;
    for (const auto& flat : seg) {
      if (!flat.is_array() || flat.size() % 2 != 0) {
        schema_error(where + " polygons must be flat [x,y,...] arrays");
      }
      Polygon poly;
      for (std::size_t i = 0; i < flat.size(); i += 2) {
        poly.push_back({read_number(flat[i], where), read_number(flat[i + 1], where)});
      }
      polygons.push_back(std::move(poly));
    }
    return polygons;
  }
  if (seg.is_object()) {
    auto size = seg.find("size");
    auto counts = seg.find("counts");
    if (size == seg.end() || !size->is_array() || size->size() != 2 || counts == seg.end()) {
      schema_error(where + " RLE needs 'size' [h,w] and 'counts'");
    }
    RleMask rle;
    rle.height = static_cast<int>(read_number((*size)[0], where));
    rle.width = static_cast<int>(read_number((*size)[1], where));
    if (counts->is_string()) {
      rle.counts = rle_counts_from_string(counts->get<std::string>());
    } else if (counts->is_array()) {
      for (const auto& c : *counts) {
        if (!c.is_number_unsigned() && !c.is_number_integer()) schema_error(where + " counts");
        rle.counts.push_back(c.get<std::uint32_t>());
      }
    } else {
      schema_error(where + " counts must be a string or an array");
    }
    return rle;
  }
  schema_error(where + " has an unsupported form");
}

double round_to(double v, double step) { return std::round(v / step) * step; }

json segmentation_to_json(const Segmentation& seg) {
  if (const auto* polygons = std::get_if<std::vector<Polygon>>(&seg)) {
    json out = json::array();
    for (const auto& poly : *polygons) {
      json flat = json::array();
      for (const auto& p : poly) {
        flat.push_back(round_to(p.x, kCoordStep));
        flat.push_back(round_to(p.y, kCoordStep));
      }
      out.push_back(std::move(flat));
    }
    return out;
  }
  if (const auto* rle = std::get_if<RleMask>(&seg)) {
    return json{{"size", {rle->height, rle->width}},
                {"counts", rle_counts_to_string(rle->counts)}};
  }
  return json::array();
}

}  // namespace

double segmentation_area(const InstanceRecord& inst) {
  if (const auto* polygons = std::get_if<std::vector<Polygon>>(&inst.segmentation)) {
    double total = 0.0;
    for (const auto& poly : *polygons) {
      double twice = 0.0;
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        twice += a.x * b.y - b.x * a.y;
      }
      total += std::abs(twice) * 0.5;
    }
    return total;
  }
  if (const auto* rle = std::get_if<RleMask>(&inst.segmentation)) {
    double fg = 0.0;
    for (std::size_t i = 1; i < rle->counts.size(); i += 2) fg += rle->counts[i];
    return fg;
  }
  return inst.bbox.area();
}

DatasetIndex parse_index(std::string_view json_text, IndexRole role) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what(),
                     e.byte);
  }
  if (!doc.is_object()) schema_error("top level must be an object");

  std::vector<ImageRecord> images;
  std::vector<InstanceRecord> instances;
  std::vector<Category> categories;

  auto images_it = doc.find("images");
  if (images_it == doc.end() || !images_it->is_array()) schema_error("missing 'images' array");
  for (const auto& img : *images_it) {
    if (!img.is_object()) schema_error("image entries must be objects");
    ImageRecord rec;
    rec.id = read_id(img, "id", "image");
    rec.width = static_cast<int>(read_id(img, "width", "image"));
    rec.height = static_cast<int>(read_id(img, "height", "image"));
    auto name = img.find("file_name");
    if (name == img.end() || !name->is_string()) schema_error("image needs 'file_name'");
    rec.file_name = name->get<std::string>();
    images.push_back(std::move(rec));
  }

  auto anns_it = doc.find("annotations");
  if (anns_it != doc.end()) {
    if (!anns_it->is_array()) schema_error("'annotations' must be an array");
    for (const auto& ann : *anns_it) {
      if (!ann.is_object()) schema_error("annotation entries must be objects");
      InstanceRecord rec;
      rec.id = read_id(ann, "id", "annotation");
      rec.image_id = read_id(ann, "image_id", "annotation");
      const std::string where = "annotation " + std::to_string(rec.id) + " bbox";
      auto bbox = ann.find("bbox");
      if (bbox == ann.end() || !bbox->is_array() || bbox->size() != 4) {
        schema_error(where + " must be [x,y,w,h]");
      }
      rec.bbox = {read_number((*bbox)[0], where), read_number((*bbox)[1], where),
                  read_number((*bbox)[2], where), read_number((*bbox)[3], where)};
      if (auto seg = ann.find("segmentation"); seg != ann.end()) {
        rec.segmentation = read_segmentation(*seg, rec.id);
      }
      if (auto cat = ann.find("category_id"); cat != ann.end() && cat->is_number_integer()) {
        rec.category = cat->get<Id>();
      }
      if (auto crowd = ann.find("iscrowd"); crowd != ann.end() && crowd->is_number()) {
        rec.ignore = rec.ignore || crowd->get<double>() != 0.0;
      }
      if (auto ignore = ann.find("ignore"); ignore != ann.end()) {
        if (ignore->is_boolean()) rec.ignore = rec.ignore || ignore->get<bool>();
        if (ignore->is_number()) rec.ignore = rec.ignore || ignore->get<double>() != 0.0;
      }
      instances.push_back(std::move(rec));
    }
  }

  if (auto cats = doc.find("categories"); cats != doc.end() && cats->is_array()) {
    for (const auto& c : *cats) {
      if (!c.is_object()) continue;
      Category cat;
      cat.id = read_id(c, "id", "category");
      cat.name = c.value("name", "");
      cat.supercategory = c.value("supercategory", "");
      categories.push_back(std::move(cat));
    }
  }

  return DatasetIndex(role, std::move(images), std::move(instances), std::move(categories));
}

DatasetIndex load_index(const std::filesystem::path& path, IndexRole role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_index(buffer.str(), role);
}

nlohmann::json index_to_json(const DatasetIndex& index) {
  json images = json::array();
  for (const auto& [id, img] : index.images()) {
    images.push_back(
        {{"id", id}, {"file_name", img.file_name}, {"width", img.width}, {"height", img.height}});
  }
  json annotations = json::array();
  for (const auto& [id, inst] : index.instances()) {
    annotations.push_back({
        {"id", id},
        {"image_id", inst.image_id},
        {"category_id", inst.category},
        {"bbox",
         {round_to(inst.bbox.x, kCoordStep), round_to(inst.bbox.y, kCoordStep), round_to(inst.bbox.w, kCoordStep),
          round_to(inst.bbox.h, kCoordStep)}},
        {"area", round_to(segmentation_area(inst), kCoordStep)},
        {"iscrowd", inst.ignore ? 1 : 0},
        {"segmentation", segmentation_to_json(inst.segmentation)},
    });
  }
  json categories = json::array();
  for (const auto& c : index.categories()) {
    categories.push_back({{"id", c.id}, {"name", c.name}, {"supercategory", c.supercategory}});
  }
  return json{{"images", std::move(images)},
              {"annotations", std::move(annotations)},
              {"categories", std::move(categories)}};
}

std::string dump_index(const DatasetIndex& index) { return index_to_json(index).dump(1) + "\n"; }

void write_annotations(const DatasetIndex& index, const std::filesystem::path& json_path) {
  if (json_path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(json_path.parent_path(), ec);
  }
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + json_path.string());
  out << dump_index(index);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + json_path.string());
}

std::string png_file_name(std::string_view file_name) {
  std::filesystem::path p{std::string(file_name)};
  p.replace_extension(".png");
  return p.generic_string();
}

void write_index(const DatasetIndex& index, const std::map<Id, RasterImage>& images,
                 const std::filesystem::path& out_dir) {
  for (const auto& [id, img] : index.images()) {
    if (!images.contains(id)) {
      throw Error(ErrorKind::kPrecondition, "no raster for image " + std::to_string(id));
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / kImagesDirName, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<ImageRecord> records;
  for (const auto& [id, img] : index.images()) {
    ImageRecord rec = img;
    rec.file_name = png_file_name(img.file_name);
    const auto& raster = images.at(id);
    rec.width = raster.width();
    rec.height = raster.height();
    const auto target = out_dir / kImagesDirName / rec.file_name;
    std::filesystem::create_directories(target.parent_path(), ec);
    write_png(target, raster);
    records.push_back(std::move(rec));
  }
  std::vector<InstanceRecord> instances;
  for (const auto& [id, inst] : index.instances()) instances.push_back(inst);
  const DatasetIndex written(index.role(), std::move(records), std::move(instances),
                             index.categories());
  write_annotations(written, out_dir / kAnnotationsFileName);
}

}  // namespace scalematch
