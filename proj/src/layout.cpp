#include "gearformer/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gearformer/error.hpp"

namespace gearformer {

std::string_view role_name(PartRole role) {
  switch (role) {
    case PartRole::kShaft:
      return "shaft";
    case PartRole::kDriver:
      return "driver";
    case PartRole::kDriven:
      return "driven";
  }
  return "shaft";
}

AssemblyBuilder::AssemblyBuilder(const Catalog& catalog, Pose input_pose)
    : catalog_(&catalog), cursor_(input_pose.origin), axis_(input_pose.axis) {
  assembly_.input_pose = input_pose;
  assembly_.output_pose = {cursor_, axis_, spin_};
}

std::optional<PlacedPart> AssemblyBuilder::place(const Token& token) const {
  switch (token.kind) {
    case TokenKind::kComponent: {
      const auto& spec = catalog_->at(token.component);
      if (!spec.is_gear()) {
        return PlacedPart{token.component, cursor_ + unit_vector(axis_) * (spec.length_mm / 2.0), axis_,
                          PartRole::kShaft};
      }
      if (!pending_driver_) return PlacedPart{token.component, cursor_, axis_, PartRole::kDriver};
      return std::nullopt;
    }
    case TokenKind::kPlaceMesh:
    case TokenKind::kPlaceBevel: {
      if (!pending_driver_ || !assembly_.pending_mate) return std::nullopt;
      const auto& driver = assembly_.parts[*pending_driver_];
      const double r_driver = catalog_->at(driver.component).pitch_radius_mm();
      const double r_driven = catalog_->at(*assembly_.pending_mate).pitch_radius_mm();
      const Axis offset = resolve(axis_, token.dir);
      if (token.kind == TokenKind::kPlaceMesh) {
        return PlacedPart{*assembly_.pending_mate, driver.center + unit_vector(offset) * (r_driver + r_driven), axis_,
                          PartRole::kDriven};
      }
      return PlacedPart{*assembly_.pending_mate,
                        driver.center + unit_vector(axis_) * r_driven + unit_vector(offset) * r_driver, offset,
                        PartRole::kDriven};
    }
    default:
      return std::nullopt;
  }
}

std::optional<PlacedPart> AssemblyBuilder::preview(const Token& token) const { return place(token); }

void AssemblyBuilder::push(const Token& token) {
  if (finished_) throw Error(ErrorCode::kInternal, "layout: token after <end>");
  switch (token.kind) {
    case TokenKind::kStart:
    case TokenKind::kPad:
      return;
    case TokenKind::kEnd:
      if (pending_driver_ || assembly_.pending_mate) {
        throw Error(ErrorCode::kInternal, "layout: dangling pending gear at <end>", "layout");
      }
      finished_ = true;
      return;
    case TokenKind::kPlaceShaft:
      throw Error(ErrorCode::kInternal, "layout: shaft placement token is not interpretable", "layout");
    case TokenKind::kComponent: {
      const auto& spec = catalog_->at(token.component);
      if (!spec.is_gear()) {
        const std::size_t index = assembly_.parts.size();
        assembly_.parts.push_back(*place(token));
        if (last_driven_) assembly_.mounts.push_back({index, *last_driven_});
        last_driven_.reset();
        last_shaft_ = index;
        cursor_ += unit_vector(axis_) * spec.length_mm;
      } else if (!pending_driver_) {
        if (!last_shaft_) throw Error(ErrorCode::kInternal, "layout: gear without a carrying shaft", "layout");
        const std::size_t index = assembly_.parts.size();
        assembly_.parts.push_back(*place(token));
        assembly_.mounts.push_back({*last_shaft_, index});
        pending_driver_ = index;
      } else {
        if (assembly_.pending_mate) throw Error(ErrorCode::kInternal, "layout: second mate for one driver", "layout");
        assembly_.pending_mate = token.component;
      }
      break;
    }
    case TokenKind::kPlaceMesh:
    case TokenKind::kPlaceBevel: {
      auto driven = place(token);
      if (!driven) throw Error(ErrorCode::kInternal, "layout: placement without a gear pair", "layout");
      const std::size_t index = assembly_.parts.size();
      assembly_.parts.push_back(*driven);
      assembly_.mesh_links.push_back({*pending_driver_, index});
      if (token.kind == TokenKind::kPlaceMesh) spin_ = -spin_;
      axis_ = driven->axis;
      cursor_ = driven->center;
      pending_driver_.reset();
      assembly_.pending_mate.reset();
      last_shaft_.reset();
      last_driven_ = index;
      break;
    }
  }
  assembly_.output_pose = {cursor_, axis_, spin_};
}

Assembly build_assembly(const Grammar& grammar, const DesignSequence& sequence, Pose input_pose, int max_parts) {
  grammar.replay_prefix(sequence, max_parts, input_pose.axis);
  AssemblyBuilder builder(grammar.catalog(), input_pose);
  for (const auto& token : sequence.tokens) builder.push(token);
  return builder.assembly();
}

Aabb part_bounds(const PlacedPart& part, const Catalog& catalog) {
  const auto& spec = catalog.at(part.component);
  Vec3 half = Vec3::Constant(spec.outer_radius_mm());
  half[axis_dim(part.axis)] = spec.axial_length_mm() / 2.0;
  return {part.center - half, part.center + half};
}

bool boxes_overlap(const Aabb& a, const Aabb& b) {
  constexpr double kTouch = 1e-9;
  for (int d = 0; d < 3; ++d) {
    if (std::min(a.hi[d], b.hi[d]) - std::max(a.lo[d], b.lo[d]) <= kTouch) return false;
  }
  return true;
}

std::vector<PartLink> check_interference(const Assembly& assembly, const Catalog& catalog) {
  auto exempt = [&](std::size_t i, std::size_t j) {
    auto linked = [&](const std::vector<PartLink>& links) {
      return std::any_of(links.begin(), links.end(), [&](const PartLink& l) {
        return (l.first == i && l.second == j) || (l.first == j && l.second == i);
      });
    };
    return linked(assembly.mesh_links) || linked(assembly.mounts);
  };
  std::vector<Aabb> boxes;
  boxes.reserve(assembly.parts.size());
  for (const auto& part : assembly.parts) boxes.push_back(part_bounds(part, catalog));

  std::vector<PartLink> collisions;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (boxes_overlap(boxes[i], boxes[j]) && !exempt(i, j)) collisions.push_back({i, j});
    }
  }
  return collisions;
}

std::string export_mesh(const Assembly& assembly, const Catalog& catalog) {
  if (assembly.parts.empty()) throw Error(ErrorCode::kBadRequest, "cannot export an empty assembly");
  std::string out = "# gearformer assembly mesh, units: mm\n";
  char line[160];
  std::size_t vertex_base = 1;
  for (std::size_t p = 0; p < assembly.parts.size(); ++p) {
    const auto& part = assembly.parts[p];
    const auto& spec = catalog.at(part.component);
    const Vec3 a = unit_vector(part.axis);
    const Vec3 u = unit_vector(frame_u(part.axis));
    const Vec3 v = unit_vector(frame_v(part.axis));
    const double radius = spec.outer_radius_mm();
    const Vec3 bottom = part.center - a * (spec.axial_length_mm() / 2.0);
    const Vec3 top = part.center + a * (spec.axial_length_mm() / 2.0);

    out += "o part" + std::to_string(p) + "_" + spec.id + "\n";
    auto emit = [&](const Vec3& x) {
      std::snprintf(line, sizeof(line), "v %.6f %.6f %.6f\n", x.x() + 0.0, x.y() + 0.0, x.z() + 0.0);
      out += line;
    };
    // Vertices: 0..31 bottom ring, 32..63 top ring, 64 bottom center, 65 top center.
    for (const Vec3* ring : {&bottom, &top}) {
      for (int k = 0; k < kMeshSegments; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / kMeshSegments;
        emit(*ring + radius * (std::cos(theta) * u + std::sin(theta) * v));
      }
    }
    emit(bottom);
    emit(top);

    auto face = [&](std::size_t i, std::size_t j, std::size_t k) {
      std::snprintf(line, sizeof(line), "f %zu %zu %zu\n", vertex_base + i, vertex_base + j, vertex_base + k);
      out += line;
    };
    const std::size_t n = kMeshSegments;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t next = (k + 1) % n;
      face(k, next, n + next);
      face(k, n + next, n + k);
      face(2 * n, next, k);
      face(2 * n + 1, n + k, n + next);
    }
    vertex_base += 2 * n + 2;
  }
  return out;
}

}  // namespace gearformer
