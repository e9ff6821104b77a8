#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "gearformer/catalog.hpp"
#include "gearformer/error.hpp"
#include "gearformer/io.hpp"

using namespace gearformer;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInternal;
}

std::string one_entry_catalog(const std::string& entry) {
  return R"({"format": "gearformer-catalog", "version": "t", "components": [)" + entry + "]}";
}

}  // namespace

TEST_CASE("default catalog follows the grid") {
  const Catalog c = default_catalog();
  REQUIRE(c.size() == 24);
  std::map<ComponentKind, int> counts;
  for (const auto& e : c.entries()) ++counts[e.kind];
  CHECK(counts[ComponentKind::kSpurGear] == 12);
  CHECK(counts[ComponentKind::kBevelGear] == 6);
  CHECK(counts[ComponentKind::kShaft] == 6);

  for (double m : {1.0, 1.5, 2.0}) {
    for (int t : {16, 24, 32, 48}) {
      bool found = false;
      for (const auto& e : c.entries()) {
        found |= e.kind == ComponentKind::kSpurGear && e.module_mm == m && e.teeth == t;
      }
      CHECK_MESSAGE(found, "spur m" << m << " " << t << "T");
    }
  }
  for (double m : {1.5, 2.0}) {
    for (int t : {16, 24, 32}) {
      bool found = false;
      for (const auto& e : c.entries()) {
        found |= e.kind == ComponentKind::kBevelGear && e.module_mm == m && e.teeth == t;
      }
      CHECK_MESSAGE(found, "bevel m" << m << " " << t << "T");
    }
  }
  std::vector<double> lengths;
  for (const auto& e : c.entries()) {
    if (e.kind == ComponentKind::kShaft) lengths.push_back(e.length_mm);
  }
  CHECK(lengths == std::vector<double>{20, 40, 60, 80, 120, 160});
}

TEST_CASE("pitch diameter is module times teeth exactly") {
  const Catalog c = default_catalog();
  for (const auto& e : c.entries()) {
    if (e.is_gear()) CHECK(e.pitch_diameter_mm == e.module_mm * e.teeth);
  }
  const auto idx = c.find("SP1.5-32");
  REQUIRE(idx);
  CHECK(c.at(*idx).pitch_diameter_mm == 48.0);
}

TEST_CASE("weight model") {
  ComponentSpec shaft;
  shaft.kind = ComponentKind::kShaft;
  shaft.length_mm = 40.0;
  shaft.face_width_mm = 8.0;
  // 7850 kg/m^3 * pi * (0.004 m)^2 * 0.040 m
  const double expected = 7850.0 * 3.14159265358979 * 0.004 * 0.004 * 0.040;
  CHECK(weight_model(shaft) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(weight_model(shaft) == doctest::Approx(0.01578).epsilon(1e-3));

  ComponentSpec longer = shaft;
  longer.length_mm = 80.0;
  CHECK(weight_model(longer) == doctest::Approx(2.0 * weight_model(shaft)).epsilon(1e-12));

  ComponentSpec gear;
  gear.kind = ComponentKind::kSpurGear;
  gear.module_mm = 1.5;
  gear.teeth = 32;
  gear.pitch_diameter_mm = 48.0;
  gear.face_width_mm = 10.0;
  const double w = weight_model(gear);
  CHECK(w == doctest::Approx(7850.0 * std::numbers::pi * 0.024 * 0.024 * 0.010).epsilon(1e-12));
  ComponentSpec wider = gear;
  wider.face_width_mm = 12.0;
  CHECK(weight_model(wider) > w);
  ComponentSpec bigger = gear;
  bigger.teeth = 48;
  bigger.pitch_diameter_mm = 72.0;
  CHECK(weight_model(bigger) > w);
}

TEST_CASE("price model rounds to cents") {
  CHECK(price_model(0.0) == 5.0);
  CHECK(price_model(0.01) == 9.0);
  CHECK(price_model(0.012345) == doctest::Approx(9.94));
  for (const auto& e : default_catalog().entries()) {
    CHECK(e.price_usd > 0.0);
    CHECK(e.weight_kg > 0.0);
    CHECK(e.price_usd == price_model(e.weight_kg));
  }
}

TEST_CASE("meshing compatibility") {
  const Catalog c = default_catalog();
  const auto a = *c.find("SP1.5-16"), b = *c.find("SP1.5-48"), d = *c.find("SP2.0-16"), bv = *c.find("BV1.5-16");
  CHECK(c.can_mesh(a, b));
  CHECK_FALSE(c.can_mesh(a, d));
  CHECK_FALSE(c.can_mesh(a, bv));
  CHECK_FALSE(c.can_mesh(a, *c.find("S40")));
}

TEST_CASE("load round-trips the bundled catalog") {
  const Catalog c = default_catalog();
  const std::string text = dump_catalog(c);
  const Catalog back = load_catalog(text);
  CHECK(back.version() == c.version());
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.at(i).id == c.at(i).id);
    CHECK(back.at(i).pitch_diameter_mm == c.at(i).pitch_diameter_mm);
    CHECK(back.at(i).price_usd == c.at(i).price_usd);
  }
  CHECK(dump_catalog(load_catalog(text)) == text);
}

TEST_CASE("catalog validation errors") {
  const std::string shaft = R"({"id": "S40", "kind": "shaft", "length_mm": 40, "face_width_mm": 8,
                               "price_usd": 11.3, "weight_kg": 0.0158})";
  CHECK_NOTHROW(load_catalog(one_entry_catalog(shaft)));
  CHECK(code_of([&] { load_catalog(one_entry_catalog(shaft + "," + shaft)); }) == ErrorCode::kBadRequest);
  try {
    load_catalog(one_entry_catalog(shaft + "," + shaft));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("S40") != std::string::npos);
  }
  CHECK(code_of([] {
          load_catalog(one_entry_catalog(R"({"id": "G", "kind": "spur", "module_mm": 1, "teeth": 0,
                                             "face_width_mm": 8, "price_usd": 1, "weight_kg": 1})"));
        }) == ErrorCode::kBadRequest);
  CHECK(code_of([] {
          load_catalog(one_entry_catalog(R"({"id": "G", "kind": "spur", "teeth": 16,
                                             "face_width_mm": 8, "price_usd": 1, "weight_kg": 1})"));
        }) == ErrorCode::kBadRequest);
  CHECK(code_of([] {
          load_catalog(one_entry_catalog(R"({"id": "G", "kind": "spur", "module_mm": 1, "teeth": 16,
                                             "face_width_mm": 8, "price_usd": 0, "weight_kg": 1})"));
        }) == ErrorCode::kBadRequest);
  CHECK(code_of([] {
          load_catalog(one_entry_catalog(R"({"id": "G", "kind": "spur", "module_mm": 1, "teeth": 16,
                                             "face_width_mm": 0, "price_usd": 1, "weight_kg": 1})"));
        }) == ErrorCode::kBadRequest);
  CHECK(code_of([] { load_catalog("{}"); }) == ErrorCode::kBadRequest);
  CHECK(code_of([] { load_catalog("not json"); }) == ErrorCode::kBadRequest);
}

TEST_CASE("bundled data file matches the built-in catalog") {
  const Catalog file = load_catalog_file(GEARFORMER_SOURCE_DIR "/data/catalog.json");
  CHECK(dump_catalog(file) == dump_catalog(default_catalog()));
}
