#include "gearformer/io.hpp"

#include <fstream>
#include <sstream>

#include "gearformer/error.hpp"

namespace gearformer {

namespace {

[[noreturn]] void schema_error(const std::string& message) { throw Error(ErrorCode::kBadRequest, message, "schema"); }

Axis axis_from_json(const Json& doc, const char* field) {
  if (!doc.is_string()) schema_error(std::string(field) + " must be an axis string like \"+X\"");
  auto axis = parse_axis(doc.get<std::string>());
  if (!axis) schema_error(std::string(field) + ": unknown axis '" + doc.get<std::string>() + "'");
  return *axis;
}

}  // namespace

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const Json& doc) {
  if (!doc.is_array() || doc.size() != 3) schema_error("expected a 3-vector");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!doc[i].is_number()) schema_error("vector entries must be numbers");
    v[i] = doc[i].get<double>();
  }
  return v;
}

Json requirements_to_json(const Requirements& r) {
  Json doc = {{"target_ratio", r.target_ratio},
              {"target_position", vec_to_json(r.target_position)},
              {"target_axis", axis_name(r.target_axis)},
              {"target_direction", r.target_direction}};
  if (r.ratio_range) doc["ratio_range"] = Json::array({r.ratio_range->first, r.ratio_range->second});
  if (r.position_tolerance) doc["position_tolerance"] = vec_to_json(*r.position_tolerance);
  return doc;
}

Requirements requirements_from_json(const Json& doc) {
  if (!doc.is_object()) schema_error("requirements must be an object");
  Requirements r;
  if (!doc.contains("target_ratio") || !doc["target_ratio"].is_number()) schema_error("target_ratio is required");
  r.target_ratio = doc["target_ratio"].get<double>();
  if (!doc.contains("target_position")) schema_error("target_position is required");
  r.target_position = vec_from_json(doc["target_position"]);
  if (!doc.contains("target_axis")) schema_error("target_axis is required");
  r.target_axis = axis_from_json(doc["target_axis"], "target_axis");
  if (doc.contains("target_direction")) {
    if (!doc["target_direction"].is_number_integer()) schema_error("target_direction must be +1 or -1");
    r.target_direction = doc["target_direction"].get<int>();
  }
  if (doc.contains("ratio_range") && !doc["ratio_range"].is_null()) {
    const auto& range = doc["ratio_range"];
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number()) {
      schema_error("ratio_range must be [min, max]");
    }
    r.ratio_range = std::make_pair(range[0].get<double>(), range[1].get<double>());
  }
  if (doc.contains("position_tolerance") && !doc["position_tolerance"].is_null()) {
    r.position_tolerance = vec_from_json(doc["position_tolerance"]);
  }
  check_requirements(r);
  return r;
}

Json metrics_to_json(const MetricsReport& m) {
  Json doc = {{"achieved_ratio", m.achieved_ratio},
              {"output_position", vec_to_json(m.output_position)},
              {"output_axis", axis_name(m.output_axis)},
              {"output_direction", m.output_direction},
              {"cost_usd", m.cost_usd},
              {"weight_kg", m.weight_kg},
              {"part_count", m.part_count},
              {"ratio_error", m.ratio_error},
              {"position_error_axes", vec_to_json(m.position_error_axes)},
              {"position_error", m.position_error},
              {"axis_match", m.axis_match},
              {"direction_match", m.direction_match},
              {"feasible", m.feasible}};
  doc["ratio_in_range"] = m.ratio_in_range ? Json(*m.ratio_in_range) : Json(nullptr);
  doc["position_in_tolerance"] = m.position_in_tolerance ? Json(*m.position_in_tolerance) : Json(nullptr);
  return doc;
}

MetricsReport metrics_from_json(const Json& doc) {
  try {
    MetricsReport m;
    m.achieved_ratio = doc.at("achieved_ratio").get<double>();
    m.output_position = vec_from_json(doc.at("output_position"));
    m.output_axis = axis_from_json(doc.at("output_axis"), "output_axis");
    m.output_direction = doc.at("output_direction").get<int>();
    m.cost_usd = doc.at("cost_usd").get<double>();
    m.weight_kg = doc.at("weight_kg").get<double>();
    m.part_count = doc.at("part_count").get<int>();
    m.ratio_error = doc.at("ratio_error").get<double>();
    m.position_error_axes = vec_from_json(doc.at("position_error_axes"));
    m.position_error = doc.at("position_error").get<double>();
    m.axis_match = doc.at("axis_match").get<bool>();
    m.direction_match = doc.at("direction_match").get<bool>();
    m.feasible = doc.at("feasible").get<bool>();
    if (doc.contains("ratio_in_range") && !doc["ratio_in_range"].is_null()) {
      m.ratio_in_range = doc["ratio_in_range"].get<bool>();
    }
    if (doc.contains("position_in_tolerance") && !doc["position_in_tolerance"].is_null()) {
      m.position_in_tolerance = doc["position_in_tolerance"].get<bool>();
    }
    return m;
  } catch (const Json::exception& e) {
    schema_error(std::string("malformed report: ") + e.what());
  }
}

Json assembly_to_json(const Assembly& a, const Catalog& catalog) {
  Json parts = Json::array();
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    const auto& p = a.parts[i];
    const auto& spec = catalog.at(p.component);
    parts.push_back({{"index", i},
                     {"component_id", spec.id},
                     {"kind", kind_name(spec.kind)},
                     {"role", role_name(p.role)},
                     {"center", vec_to_json(p.center)},
                     {"axis", axis_name(p.axis)},
                     {"radius_mm", spec.outer_radius_mm()},
                     {"length_mm", spec.axial_length_mm()}});
  }
  auto links = [](const std::vector<PartLink>& ls) {
    Json out = Json::array();
    for (const auto& l : ls) out.push_back(Json::array({l.first, l.second}));
    return out;
  };
  Json doc = {{"parts", parts},
              {"input_pose", {{"origin", vec_to_json(a.input_pose.origin)}, {"axis", axis_name(a.input_pose.axis)}}},
              {"output_pose",
               {{"center", vec_to_json(a.output_pose.center)},
                {"axis", axis_name(a.output_pose.axis)},
                {"spin", a.output_pose.spin}}},
              {"mesh_links", links(a.mesh_links)},
              {"mounts", links(a.mounts)}};
  doc["pending_mate"] = a.pending_mate ? Json(catalog.at(*a.pending_mate).id) : Json(nullptr);
  return doc;
}

std::string write_design_file(const Grammar& grammar, const DesignFile& design) {
  Json doc = {{"format", "gearformer-design"},
              {"version", kDesignFileVersion},
              {"catalog_version", design.catalog_version},
              {"max_parts", design.max_parts},
              {"requirements", requirements_to_json(design.requirements)},
              {"sequence", grammar.token_names(design.sequence)}};
  doc["report"] = design.report ? metrics_to_json(*design.report) : Json(nullptr);
  return doc.dump(2) + "\n";
}

DesignFile read_design_file(const Grammar& grammar, std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    schema_error(std::string("design file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "gearformer-design") {
    schema_error("not a gearformer design file");
  }
  if (doc.value("version", 0) != kDesignFileVersion) {
    schema_error("design file version " + std::to_string(doc.value("version", 0)) + " unsupported (expected " +
                 std::to_string(kDesignFileVersion) + ")");
  }
  DesignFile design;
  design.catalog_version = doc.value("catalog_version", "");
  if (design.catalog_version != grammar.catalog().version()) {
    schema_error("design uses catalog '" + design.catalog_version + "', loaded catalog is '" +
                 grammar.catalog().version() + "'");
  }
  design.max_parts = doc.value("max_parts", kDefaultMaxParts);
  if (!doc.contains("requirements")) schema_error("design file has no requirements");
  design.requirements = requirements_from_json(doc["requirements"]);
  if (!doc.contains("sequence") || !doc["sequence"].is_array()) schema_error("design file has no sequence");
  std::vector<std::string> names;
  for (const auto& n : doc["sequence"]) {
    if (!n.is_string()) schema_error("sequence entries must be token names");
    names.push_back(n.get<std::string>());
  }
  design.sequence = grammar.from_names(names);
  if (doc.contains("report") && !doc["report"].is_null()) design.report = metrics_from_json(doc["report"]);
  return design;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInternal, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace gearformer
