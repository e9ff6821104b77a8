#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gearformer/catalog.hpp"
#include "gearformer/geometry.hpp"
#include "gearformer/grammar.hpp"

namespace gearformer {

enum class PartRole { kShaft, kDriver, kDriven };

std::string_view role_name(PartRole role);

struct PlacedPart {
  std::size_t component = 0;  // catalog index
  Vec3 center = Vec3::Zero();
  Axis axis = Axis::kPosX;
  PartRole role = PartRole::kShaft;
};

struct Pose {
  Vec3 origin = Vec3::Zero();
  Axis axis = Axis::kPosX;
};

struct OutputPose {
  Vec3 center = Vec3::Zero();
  Axis axis = Axis::kPosX;
  // Spin sign of the output about `axis`; the input spins +1 about its axis.
  int spin = 1;
};

struct PartLink {
  std::size_t first = 0;
  std::size_t second = 0;
  friend bool operator==(const PartLink&, const PartLink&) = default;
};

struct Assembly {
  std::vector<PlacedPart> parts;  // component-token order
  Pose input_pose;
  OutputPose output_pose;
  std::vector<PartLink> mesh_links;  // (driver, driven)
  std::vector<PartLink> mounts;      // (shaft, gear carried by it)
  // Mate chosen but not yet positioned (prefix ends before its placement).
  std::optional<std::size_t> pending_mate;
};

// Cursor interpreter. Shafts extend the cursor along the current axis; a
// driver gear sits at the cursor; a spur mesh puts the driven gear at
// driver + (r_driver + r_driven) * offset with a parallel axis; a bevel mesh
// puts it at driver + r_driven * old_axis + r_driver * new_axis, which makes
// the two pitch cones share their apex.
//
// Spin convention: angular velocity w = spin * |w| * axis. An external spur
// mesh flips spin. With the bevel geometry above the pitch-point velocities
// match at equal spin, so a bevel mesh keeps spin unchanged.
class AssemblyBuilder {
 public:
  AssemblyBuilder(const Catalog& catalog, Pose input_pose = {});

  // Tokens are assumed grammar-valid; structural misuse throws kInternal.
  void push(const Token& token);
  const Assembly& assembly() const { return assembly_; }

  const Vec3& cursor() const { return cursor_; }
  Axis axis() const { return axis_; }
  int spin() const { return spin_; }

  // Where `token` would put a part if pushed next; nullopt for tokens that
  // place nothing (a mate awaiting placement, <end>, ...).
  std::optional<PlacedPart> preview(const Token& token) const;

 private:
  std::optional<PlacedPart> place(const Token& token) const;

  const Catalog* catalog_;
  Assembly assembly_;
  Vec3 cursor_;
  Axis axis_;
  int spin_ = 1;
  std::optional<std::size_t> last_shaft_;
  std::optional<std::size_t> last_driven_;
  std::optional<std::size_t> pending_driver_;
  bool finished_ = false;
};

// Builds the assembly for a complete sequence or a grammar-valid prefix.
// Throws Error(kGrammarViolation) if the sequence does not replay.
Assembly build_assembly(const Grammar& grammar, const DesignSequence& sequence, Pose input_pose = {},
                        int max_parts = kDefaultMaxParts);

struct Aabb {
  Vec3 lo;
  Vec3 hi;
};

// Box around a part's cylinder: +-length/2 along the axis, +-radius across.
Aabb part_bounds(const PlacedPart& part, const Catalog& catalog);
bool boxes_overlap(const Aabb& a, const Aabb& b);

// Pairs (i < j) of overlapping boxes, excluding meshed pairs and gears on
// their own shafts. Empty means interference free.
std::vector<PartLink> check_interference(const Assembly& assembly, const Catalog& catalog);

inline constexpr int kMeshSegments = 32;

// Wavefront OBJ, one object per part named "part<i>_<component id>", mm.
// Throws Error(kBadRequest) for an empty assembly.
std::string export_mesh(const Assembly& assembly, const Catalog& catalog);

}  // namespace gearformer
