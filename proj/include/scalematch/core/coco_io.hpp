#pragma once

#include <filesystem>
#include <map>
#include <string_view>

#include <json.hpp>

#include "scalematch/core/model.hpp"
#include "scalematch/core/raster.hpp"

namespace scalematch {

inline constexpr std::string_view kAnnotationsFileName = "annotations.json";
inline constexpr std::string_view kImagesDirName = "images";

/// Parses COCO-style JSON text. Malformed JSON raises ParseError carrying the
/// byte offset; schema problems raise Error(kParse); invariant violations
/// raise Error(kIntegrity) from the DatasetIndex constructor.
DatasetIndex parse_index(std::string_view json_text, IndexRole role);

DatasetIndex load_index(const std::filesystem::path& path, IndexRole role);

nlohmann::json index_to_json(const DatasetIndex& index);

/// Serialized annotation JSON. Deterministic: records are emitted in id order
/// and bbox coordinates are rounded to 1e-3 px.
std::string dump_index(const DatasetIndex& index);

void write_annotations(const DatasetIndex& index, const std::filesystem::path& json_path);

/// File name an image is stored under once written as PNG.
std::string png_file_name(std::string_view file_name);

/// Writes `out_dir`/annotations.json plus one PNG per image under
/// `out_dir`/images. Every image in the index must have a raster.
void write_index(const DatasetIndex& index, const std::map<Id, RasterImage>& images,
                 const std::filesystem::path& out_dir);

double segmentation_area(const InstanceRecord& inst);

}  // namespace scalematch
