#include "gearformer/catalog.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gearformer/error.hpp"

namespace gearformer {

using nlohmann::json;

namespace {

constexpr std::string_view kCatalogFormat = "gearformer-catalog";

std::string format_module(double module_mm) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << module_mm;
  return os.str();
}

[[noreturn]] void reject(const std::string& message) {
  throw Error(ErrorCode::kBadRequest, "catalog: " + message, "catalog");
}

ComponentSpec make_gear(ComponentKind kind, double module_mm, int teeth) {
  ComponentSpec spec;
  spec.kind = kind;
  spec.id = std::string(kind == ComponentKind::kSpurGear ? "SP" : "BV") + format_module(module_mm) + "-" +
            std::to_string(teeth);
  spec.module_mm = module_mm;
  spec.teeth = teeth;
  spec.pitch_diameter_mm = module_mm * teeth;
  spec.face_width_mm = 8.0 * module_mm;
  spec.weight_kg = weight_model(spec);
  spec.price_usd = price_model(spec.weight_kg);
  return spec;
}

ComponentSpec make_shaft(double length_mm) {
  ComponentSpec spec;
  spec.kind = ComponentKind::kShaft;
  spec.id = "S" + std::to_string(static_cast<int>(length_mm));
  spec.face_width_mm = 2.0 * kShaftRadiusMm;
  spec.length_mm = length_mm;
  spec.weight_kg = weight_model(spec);
  spec.price_usd = price_model(spec.weight_kg);
  return spec;
}

}  // namespace

std::string_view kind_name(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::kShaft:
      return "shaft";
    case ComponentKind::kSpurGear:
      return "spur";
    case ComponentKind::kBevelGear:
      return "bevel";
  }
  return "shaft";
}

std::optional<ComponentKind> parse_kind(std::string_view name) {
  if (name == "shaft") return ComponentKind::kShaft;
  if (name == "spur") return ComponentKind::kSpurGear;
  if (name == "bevel") return ComponentKind::kBevelGear;
  return std::nullopt;
}

std::string ComponentSpec::display_name() const {
  std::ostringstream os;
  switch (kind) {
    case ComponentKind::kShaft:
      os << "Shaft " << length_mm << " mm";
      break;
    case ComponentKind::kSpurGear:
      os << "Spur gear m" << format_module(module_mm) << " " << teeth << "T";
      break;
    case ComponentKind::kBevelGear:
      os << "Bevel gear m" << format_module(module_mm) << " " << teeth << "T";
      break;
  }
  return os.str();
}

double weight_model(const ComponentSpec& spec) {
  const double radius_m = (spec.is_gear() ? spec.pitch_diameter_mm / 2.0 : kShaftRadiusMm) / 1000.0;
  const double length_m = (spec.is_gear() ? spec.face_width_mm : spec.length_mm) / 1000.0;
  return kSteelDensityKgPerM3 * std::numbers::pi * radius_m * radius_m * length_m;
}

double price_model(double weight_kg) { return std::round((5.0 + 400.0 * weight_kg) * 100.0) / 100.0; }

Catalog::Catalog(std::string version, std::vector<ComponentSpec> entries)
    : version_(std::move(version)), entries_(std::move(entries)) {}

std::optional<std::size_t> Catalog::find(std::string_view id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id == id) return i;
  }
  return std::nullopt;
}

bool Catalog::can_mesh(std::size_t a, std::size_t b) const {
  const auto& x = entries_.at(a);
  const auto& y = entries_.at(b);
  return x.is_gear() && x.kind == y.kind && x.module_mm == y.module_mm;
}

Catalog load_catalog(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    reject(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kCatalogFormat) {
    reject("missing format tag \"gearformer-catalog\"");
  }
  if (!doc.contains("version") || !doc["version"].is_string()) reject("missing version string");
  if (!doc.contains("components") || !doc["components"].is_array()) reject("missing components array");

  std::vector<ComponentSpec> entries;
  std::set<std::string> seen;
  for (const auto& item : doc["components"]) {
    ComponentSpec spec;
    try {
      spec.id = item.at("id").get<std::string>();
      const auto kind = parse_kind(item.at("kind").get<std::string>());
      if (!kind) reject("unknown kind for " + spec.id);
      spec.kind = *kind;
      spec.face_width_mm = item.at("face_width_mm").get<double>();
      spec.price_usd = item.at("price_usd").get<double>();
      spec.weight_kg = item.at("weight_kg").get<double>();
      if (spec.is_gear()) {
        if (!item.contains("module_mm") || !item.contains("teeth")) reject("gear " + spec.id + " missing module/teeth");
        spec.module_mm = item["module_mm"].get<double>();
        spec.teeth = item["teeth"].get<int>();
        if (spec.module_mm <= 0.0) reject("gear " + spec.id + " has nonpositive module");
        if (spec.teeth <= 0) reject("gear " + spec.id + " has nonpositive teeth");
        spec.pitch_diameter_mm = spec.module_mm * spec.teeth;
      } else {
        if (!item.contains("length_mm")) reject("shaft " + spec.id + " missing length");
        spec.length_mm = item["length_mm"].get<double>();
        if (spec.length_mm <= 0.0) reject("shaft " + spec.id + " has nonpositive length");
      }
    } catch (const json::exception& e) {
      reject(std::string("malformed component: ") + e.what());
    }
    if (spec.id.empty()) reject("empty id");
    if (spec.face_width_mm <= 0.0) reject(spec.id + " has nonpositive face width");
    if (spec.price_usd <= 0.0) reject(spec.id + " has nonpositive price");
    if (spec.weight_kg <= 0.0) reject(spec.id + " has nonpositive weight");
    if (!seen.insert(spec.id).second) reject("duplicate id " + spec.id);
    entries.push_back(std::move(spec));
  }
  if (entries.empty()) reject("no components");
  return Catalog(doc["version"].get<std::string>(), std::move(entries));
}

Catalog load_catalog_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open catalog file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_catalog(buffer.str());
}

std::string dump_catalog(const Catalog& catalog) {
  json components = json::array();
  for (const auto& spec : catalog.entries()) {
    json item = {{"id", spec.id}, {"kind", kind_name(spec.kind)}};
    if (spec.is_gear()) {
      item["module_mm"] = spec.module_mm;
      item["teeth"] = spec.teeth;
    } else {
      item["length_mm"] = spec.length_mm;
    }
    item["face_width_mm"] = spec.face_width_mm;
    item["price_usd"] = spec.price_usd;
    item["weight_kg"] = spec.weight_kg;
    components.push_back(std::move(item));
  }
  json doc = {{"format", kCatalogFormat}, {"version", catalog.version()}, {"components", components}};
  return doc.dump(2) + "\n";
}

Catalog default_catalog() {
  std::vector<ComponentSpec> entries;
  for (double length : {20.0, 40.0, 60.0, 80.0, 120.0, 160.0}) entries.push_back(make_shaft(length));
  for (double module_mm : {1.0, 1.5, 2.0}) {
    for (int teeth : {16, 24, 32, 48}) entries.push_back(make_gear(ComponentKind::kSpurGear, module_mm, teeth));
  }
  for (double module_mm : {1.5, 2.0}) {
    for (int teeth : {16, 24, 32}) entries.push_back(make_gear(ComponentKind::kBevelGear, module_mm, teeth));
  }
  return Catalog("desk-grid-v1", std::move(entries));
}

}  // namespace gearformer
