#include <doctest.h>

#include <random>

#include "gearformer/error.hpp"
#include "gearformer/layout.hpp"
#include "gearformer/model/dataset.hpp"
#include "support/oracles.hpp"

using namespace gearformer;

namespace {

const Grammar& grammar() {
  static const Grammar g(default_catalog());
  return g;
}

std::vector<int> indices(const DesignSequence& s) {
  std::vector<int> out;
  for (const auto& t : s.tokens) out.push_back(grammar().vocabulary().index_of(t));
  return out;
}

// Chain that turns twice through bevels and comes back across its first pair.
constexpr const char* kFoldBack =
    "<start> S20 SP2.0-48 SP2.0-48 mesh+u S20 BV2.0-32 BV2.0-16 bevel-u S20 BV2.0-32 BV2.0-32 bevel+v <end>";

}  // namespace

TEST_CASE("single shaft advances the cursor") {
  const Assembly a = build_assembly(grammar(), grammar().parse("<start> S40 <end>"));
  REQUIRE(a.parts.size() == 1);
  CHECK(a.parts[0].center.isApprox(Vec3(20, 0, 0)));
  CHECK(a.output_pose.center == Vec3(40, 0, 0));
  CHECK(a.output_pose.axis == Axis::kPosX);
  CHECK(a.output_pose.spin == 1);
  CHECK(check_interference(a, grammar().catalog()).empty());
}

TEST_CASE("spur mesh places the driven gear at the summed pitch radii") {
  const Assembly a = build_assembly(grammar(), grammar().parse("<start> S40 SP1.5-16 SP1.5-48 mesh+v <end>"));
  // frame of +X is (Y, Z); +v is +Z. Pitch radii 1.5*16/2 = 12 and 1.5*48/2 = 36.
  REQUIRE(a.parts.size() == 3);
  CHECK(a.parts[1].center == Vec3(40, 0, 0));
  CHECK(a.parts[2].center == Vec3(40, 0, 48));
  CHECK(a.parts[2].axis == Axis::kPosX);
  CHECK(a.mesh_links == std::vector<PartLink>{{1, 2}});
  CHECK(a.output_pose.spin == -1);

  const Assembly b = build_assembly(grammar(), grammar().parse("<start> S40 SP1.5-16 SP1.5-48 mesh+u <end>"));
  CHECK(b.parts[2].center == Vec3(40, 12 + 36, 0));
  CHECK(check_interference(b, grammar().catalog()).empty());
}

TEST_CASE("bevel mesh turns the axis and shares the cone apex") {
  const Assembly a = build_assembly(grammar(), grammar().parse("<start> S40 BV1.5-16 BV1.5-32 bevel+u <end>"));
  const double r1 = 1.5 * 16 / 2, r2 = 1.5 * 32 / 2;
  REQUIRE(a.parts.size() == 3);
  CHECK(a.parts[2].axis == Axis::kPosY);
  CHECK(a.parts[2].center.isApprox(Vec3(40 + r2, r1, 0)));
  CHECK(a.output_pose.spin == 1);
  // Both pitch circles pass through (40, r1, 0).
  const Vec3 contact(40, r1, 0);
  CHECK((contact - a.parts[1].center).norm() == doctest::Approx(r1));
  CHECK((contact - a.parts[2].center).norm() == doctest::Approx(r2));
}

TEST_CASE("prefix ending mid-pair keeps the mate pending") {
  const auto& g = grammar();
  const Assembly a = build_assembly(g, g.parse("<start> S40 SP1.5-16 SP1.5-48"));
  CHECK(a.parts.size() == 2);
  CHECK(a.mesh_links.empty());
  CHECK(a.pending_mate == g.catalog().find("SP1.5-48"));
}

TEST_CASE("fold-back fixture collides and the boxes agree") {
  const auto& g = grammar();
  const auto s = g.parse(kFoldBack);
  const Assembly a = build_assembly(g, s);
  const auto hits = check_interference(a, g.catalog());
  REQUIRE_FALSE(hits.empty());

  // Independent box arithmetic from oracle centers.
  const auto prop = oracle::propagate(g.catalog(), indices(s));
  REQUIRE(prop.centers.size() == a.parts.size());
  for (const auto& [i, j] : hits) {
    const auto& pi = a.parts[i];
    const auto& pj = a.parts[j];
    CHECK(prop.centers[i].isApprox(pi.center));
    CHECK(prop.centers[j].isApprox(pj.center));
    for (int d = 0; d < 3; ++d) {
      auto half = [&](const PlacedPart& p) {
        const auto& c = g.catalog().at(p.component);
        const bool along = axis_dim(p.axis) == d;
        if (!c.is_gear()) return along ? c.length_mm / 2 : 4.0;
        return along ? c.face_width_mm / 2 : c.module_mm * c.teeth / 2;
      };
      const double gap = std::abs(prop.centers[i][d] - prop.centers[j][d]);
      CHECK(gap < half(pi) + half(pj));
    }
  }
}

TEST_CASE("interference is symmetric and never reports exempt pairs") {
  const auto& g = grammar();
  std::mt19937_64 rng(5);
  for (int n = 0; n < 500; ++n) {
    const Assembly a = build_assembly(g, model::random_walk(g, rng));
    const auto hits = check_interference(a, g.catalog());
    for (const auto& h : hits) {
      for (const auto& l : a.mesh_links) CHECK_FALSE(((l.first == h.first && l.second == h.second)));
      for (const auto& m : a.mounts) CHECK_FALSE(((m.first == h.first && m.second == h.second)));
    }
    Assembly reversed = a;
    std::reverse(reversed.parts.begin(), reversed.parts.end());
    const std::size_t last = a.parts.size() - 1;
    for (auto& l : reversed.mesh_links) l = {last - l.first, last - l.second};
    for (auto& m : reversed.mounts) m = {last - m.first, last - m.second};
    CHECK(check_interference(reversed, g.catalog()).size() == hits.size());
  }
}

TEST_CASE("geometry invariants over random designs") {
  const auto& g = grammar();
  std::mt19937_64 rng(9);
  for (int n = 0; n < 500; ++n) {
    const auto s = model::random_walk(g, rng);
    const Assembly a = build_assembly(g, s);
    const auto prop = oracle::propagate(g.catalog(), indices(s));
    REQUIRE(prop.centers.size() == a.parts.size());
    for (std::size_t i = 0; i < a.parts.size(); ++i) CHECK((prop.centers[i] - a.parts[i].center).norm() < 1e-9);
    for (const auto& l : a.mesh_links) {
      const auto& d = a.parts[l.first];
      const auto& e = a.parts[l.second];
      const double r1 = g.catalog().at(d.component).pitch_radius_mm();
      const double r2 = g.catalog().at(e.component).pitch_radius_mm();
      if (d.axis == e.axis) {
        CHECK((d.center - e.center).norm() == doctest::Approx(r1 + r2));
      } else {
        CHECK(perpendicular(d.axis, e.axis));
      }
    }
    // Incremental build equals batch build at every prefix.
    AssemblyBuilder builder(g.catalog());
    DesignSequence prefix;
    for (const auto& t : s.tokens) {
      builder.push(t);
      prefix.tokens.push_back(t);
      const Assembly batch = build_assembly(g, prefix);
      CHECK(builder.assembly().parts.size() == batch.parts.size());
      CHECK(builder.assembly().output_pose.center == batch.output_pose.center);
    }
  }
}

TEST_CASE("mesh export") {
  const auto& g = grammar();
  const Assembly a = build_assembly(g, g.parse("<start> S40 <end>"));
  const std::string obj = export_mesh(a, g.catalog());
  CHECK(obj == export_mesh(a, g.catalog()));
  int objects = 0, vertices = 0, faces = 0;
  double min_x = 1e9, max_x = -1e9;
  std::istringstream in(obj);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("o ", 0) == 0) {
      ++objects;
      CHECK(line == "o part0_S40");
    } else if (line.rfind("v ", 0) == 0) {
      ++vertices;
      std::istringstream v(line.substr(2));
      double x, y, z;
      v >> x >> y >> z;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      if (x != 0.0 && x != 40.0) FAIL("vertex off the end caps");
    } else if (line.rfind("f ", 0) == 0) {
      ++faces;
    }
  }
  CHECK(objects == 1);
  // 32 per ring, two rings, two cap centers; 32 side quads split in two plus 32 per cap.
  CHECK(vertices == 2 * 32 + 2);
  CHECK(faces == 4 * 32);
  CHECK(max_x - min_x == doctest::Approx(40.0));

  CHECK_THROWS_AS(export_mesh(Assembly{}, g.catalog()), Error);
}
