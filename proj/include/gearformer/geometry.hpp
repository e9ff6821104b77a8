#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Core>

namespace gearformer {

using Vec3 = Eigen::Vector3d;

// All v1 geometry is axis aligned; every rotation axis is one of these.
enum class Axis : std::uint8_t { kPosX, kNegX, kPosY, kNegY, kPosZ, kNegZ };

inline constexpr std::array<Axis, 6> kAllAxes = {Axis::kPosX, Axis::kNegX, Axis::kPosY,
                                                 Axis::kNegY, Axis::kPosZ, Axis::kNegZ};

// Directions in the plane perpendicular to a chain axis, expressed in the
// axis' local (u, v) frame so that the vocabulary stays axis independent.
enum class PlaneDir : std::uint8_t { kPosU, kNegU, kPosV, kNegV };

inline constexpr std::array<PlaneDir, 4> kAllPlaneDirs = {PlaneDir::kPosU, PlaneDir::kNegU,
                                                          PlaneDir::kPosV, PlaneDir::kNegV};

// 0 = X, 1 = Y, 2 = Z.
int axis_dim(Axis axis);
// +1 or -1.
int axis_sign(Axis axis);
Axis make_axis(int dim, int sign);
Axis negate(Axis axis);
Vec3 unit_vector(Axis axis);
bool perpendicular(Axis a, Axis b);

// Local frame of the plane perpendicular to `axis`. The frame only depends on
// the axis line, not its sign: X -> (Y, Z), Y -> (Z, X), Z -> (X, Y).
Axis frame_u(Axis axis);
Axis frame_v(Axis axis);
// Resolves a plane direction against the frame of `axis`.
Axis resolve(Axis axis, PlaneDir dir);

std::string_view axis_name(Axis axis);  // "+X", "-Z", ...
std::optional<Axis> parse_axis(std::string_view name);
std::string_view plane_dir_name(PlaneDir dir);  // "+u", "-v", ...

}  // namespace gearformer
