#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gearformer/grammar.hpp"
#include "gearformer/layout.hpp"
#include "gearformer/simulator.hpp"

namespace gearformer {

using Json = nlohmann::json;

// Requirements:
//   {"target_ratio": 3.0, "target_position": [x, y, z], "target_axis": "+Y",
//    "target_direction": -1, "ratio_range": [lo, hi]?, "position_tolerance": [tx, ty, tz]?}
Json requirements_to_json(const Requirements& requirements);
// Throws Error(kBadRequest) on a schema violation or invalid values.
Requirements requirements_from_json(const Json& doc);

Json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const Json& doc);

// Mirrors Assembly; each part also carries its catalog geometry so a viewer
// needs nothing else:
//   {"parts": [{"index", "component_id", "kind", "role", "center", "axis",
//               "radius_mm", "length_mm"}],
//    "input_pose": {"origin", "axis"}, "output_pose": {"center", "axis", "spin"},
//    "mesh_links": [[driver, driven]], "mounts": [[shaft, gear]], "pending_mate": id?}
Json assembly_to_json(const Assembly& assembly, const Catalog& catalog);

Json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const Json& doc);

// Design file: the portable record of one design.
//   {"format": "gearformer-design", "version": 1, "catalog_version": "...",
//    "max_parts": 10, "requirements": {...}, "sequence": ["<start>", ...],
//    "report": {...}}
inline constexpr int kDesignFileVersion = 1;

struct DesignFile {
  std::string catalog_version;
  int max_parts = kDefaultMaxParts;
  Requirements requirements;
  DesignSequence sequence;
  std::optional<MetricsReport> report;
};

std::string write_design_file(const Grammar& grammar, const DesignFile& design);
// Throws Error(kBadRequest) on malformed input or a foreign catalog version.
DesignFile read_design_file(const Grammar& grammar, std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

}  // namespace gearformer
