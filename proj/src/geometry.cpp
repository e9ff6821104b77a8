#include "gearformer/geometry.hpp"

namespace gearformer {

int axis_dim(Axis axis) { return static_cast<int>(axis) / 2; }

int axis_sign(Axis axis) { return static_cast<int>(axis) % 2 == 0 ? 1 : -1; }

Axis make_axis(int dim, int sign) { return static_cast<Axis>(dim * 2 + (sign > 0 ? 0 : 1)); }

Axis negate(Axis axis) { return make_axis(axis_dim(axis), -axis_sign(axis)); }

Vec3 unit_vector(Axis axis) {
  Vec3 v = Vec3::Zero();
  v[axis_dim(axis)] = axis_sign(axis);
  return v;
}

bool perpendicular(Axis a, Axis b) { return axis_dim(a) != axis_dim(b); }

Axis frame_u(Axis axis) { return make_axis((axis_dim(axis) + 1) % 3, 1); }

Axis frame_v(Axis axis) { return make_axis((axis_dim(axis) + 2) % 3, 1); }

Axis resolve(Axis axis, PlaneDir dir) {
  switch (dir) {
    case PlaneDir::kPosU:
      return frame_u(axis);
    case PlaneDir::kNegU:
      return negate(frame_u(axis));
    case PlaneDir::kPosV:
      return frame_v(axis);
    case PlaneDir::kNegV:
      return negate(frame_v(axis));
  }
  return frame_u(axis);
}

std::string_view axis_name(Axis axis) {
  static constexpr std::array<std::string_view, 6> kNames = {"+X", "-X", "+Y", "-Y", "+Z", "-Z"};
  return kNames[static_cast<int>(axis)];
}

std::optional<Axis> parse_axis(std::string_view name) {
  for (Axis a : kAllAxes) {
    if (axis_name(a) == name) return a;
  }
  // Accept the unsigned form as positive.
  if (name == "X") return Axis::kPosX;
  if (name == "Y") return Axis::kPosY;
  if (name == "Z") return Axis::kPosZ;
  return std::nullopt;
}

std::string_view plane_dir_name(PlaneDir dir) {
  static constexpr std::array<std::string_view, 4> kNames = {"+u", "-u", "+v", "-v"};
  return kNames[static_cast<int>(dir)];
}

}  // namespace gearformer
