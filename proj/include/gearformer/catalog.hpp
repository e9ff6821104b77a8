#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gearformer {

enum class ComponentKind { kShaft, kSpurGear, kBevelGear };

std::string_view kind_name(ComponentKind kind);  // "shaft", "spur", "bevel"
std::optional<ComponentKind> parse_kind(std::string_view name);

inline constexpr double kSteelDensityKgPerM3 = 7850.0;
inline constexpr double kShaftRadiusMm = 4.0;

struct ComponentSpec {
  std::string id;
  ComponentKind kind = ComponentKind::kShaft;
  double module_mm = 0.0;  // gears only
  int teeth = 0;           // gears only
  double pitch_diameter_mm = 0.0;  // module_mm * teeth, derived on load
  double face_width_mm = 0.0;
  double length_mm = 0.0;  // shafts only
  double price_usd = 0.0;
  double weight_kg = 0.0;

  bool is_gear() const { return kind != ComponentKind::kShaft; }
  double pitch_radius_mm() const { return pitch_diameter_mm / 2.0; }
  // Radius of the bounding cylinder used by layout and export.
  double outer_radius_mm() const { return is_gear() ? pitch_radius_mm() : kShaftRadiusMm; }
  // Extent along the rotation axis.
  double axial_length_mm() const { return is_gear() ? face_width_mm : length_mm; }
  std::string display_name() const;
};

// Solid steel cylinder: gears use pitch radius x face width, shafts a fixed
// 4 mm radius x length.
double weight_model(const ComponentSpec& spec);
// Cost surrogate: 5 USD + 400 USD/kg, rounded to cents.
double price_model(double weight_kg);

class Catalog {
 public:
  Catalog() = default;
  Catalog(std::string version, std::vector<ComponentSpec> entries);

  const std::string& version() const { return version_; }
  const std::vector<ComponentSpec>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const ComponentSpec& at(std::size_t index) const { return entries_.at(index); }
  std::optional<std::size_t> find(std::string_view id) const;

  // Meshing compatibility: same gear kind and same module.
  bool can_mesh(std::size_t a, std::size_t b) const;

 private:
  std::string version_;
  std::vector<ComponentSpec> entries_;
};

// Parses and validates the JSON catalog format (see data/catalog.schema.md).
// Throws Error(kBadRequest) on duplicate ids, nonpositive price/weight/teeth,
// gears without module or teeth, and shafts without length.
Catalog load_catalog(std::string_view source);
Catalog load_catalog_file(const std::string& path);
std::string dump_catalog(const Catalog& catalog);

// The bundled 24-part grid: 12 spur, 6 bevel, 6 shafts.
Catalog default_catalog();

}  // namespace gearformer
