#include "oracles.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace oracle {

namespace {

using gearformer::ComponentKind;

struct Classifier {
  const Catalog& catalog;
  Vocab vocab;

  bool is_component(int t) const { return t >= 3 && t < vocab.first_mesh(); }
  const gearformer::ComponentSpec& spec(int t) const { return catalog.at(static_cast<std::size_t>(t - 3)); }
  bool is_shaft(int t) const { return is_component(t) && spec(t).kind == ComponentKind::kShaft; }
  bool is_gear(int t) const { return is_component(t) && spec(t).kind != ComponentKind::kShaft; }
  bool is_mesh(int t) const { return t >= vocab.first_mesh() && t < vocab.first_bevel(); }
  bool is_bevel(int t) const { return t >= vocab.first_bevel() && t < vocab.shaft_place(); }
  bool mates(int a, int b) const { return spec(a).kind == spec(b).kind && spec(a).module_mm == spec(b).module_mm; }
};

// Plane frame per axis line: X -> (Y, Z), Y -> (Z, X), Z -> (X, Y).
Vec3 plane_direction(const Vec3& axis, int dir) {
  Vec3 u, v;
  if (std::abs(axis.x()) > 0.5) {
    u = Vec3::UnitY();
    v = Vec3::UnitZ();
  } else if (std::abs(axis.y()) > 0.5) {
    u = Vec3::UnitZ();
    v = Vec3::UnitX();
  } else {
    u = Vec3::UnitX();
    v = Vec3::UnitY();
  }
  switch (dir) {
    case 0:
      return u;
    case 1:
      return -u;
    case 2:
      return v;
    default:
      return -v;
  }
}

void extend(const Classifier& c, std::vector<int>& prefix, int parts, int max_components,
            std::vector<std::vector<int>>& out) {
  // prefix ends after a shaft or after a placement; <end> is allowed here.
  prefix.push_back(2);
  out.push_back(prefix);
  prefix.pop_back();
  const bool after_shaft = c.is_shaft(prefix.back());
  if (!after_shaft) {
    if (parts + 1 > max_components) return;
    for (int s = 3; s < c.vocab.first_mesh(); ++s) {
      if (!c.is_shaft(s)) continue;
      prefix.push_back(s);
      extend(c, prefix, parts + 1, max_components, out);
      prefix.pop_back();
    }
    return;
  }
  if (parts + 2 > max_components) return;
  for (int g1 = 3; g1 < c.vocab.first_mesh(); ++g1) {
    if (!c.is_gear(g1)) continue;
    for (int g2 = 3; g2 < c.vocab.first_mesh(); ++g2) {
      if (!c.is_gear(g2) || !c.mates(g1, g2)) continue;
      const int first = c.spec(g1).kind == ComponentKind::kSpurGear ? c.vocab.first_mesh() : c.vocab.first_bevel();
      for (int d = 0; d < 4; ++d) {
        prefix.insert(prefix.end(), {g1, g2, first + d});
        extend(c, prefix, parts + 2, max_components, out);
        prefix.resize(prefix.size() - 3);
      }
    }
  }
}

Vec3 cross(const Vec3& a, const Vec3& b) { return a.cross(b); }

}  // namespace

bool accepts(const Catalog& catalog, const std::vector<int>& t, int max_parts) {
  const Classifier c{catalog, {static_cast<int>(catalog.size())}};
  const std::size_t n = t.size();
  std::size_t p = 0;
  int parts = 0;
  if (n < 3 || t[p++] != 1) return false;
  if (!c.is_shaft(t[p])) return false;
  ++parts;
  ++p;
  while (true) {
    if (p >= n) return false;
    if (t[p] == 2) return p == n - 1;
    if (!c.is_gear(t[p]) || parts + 2 > max_parts) return false;
    const int driver = t[p++];
    if (p >= n || !c.is_gear(t[p]) || !c.mates(driver, t[p])) return false;
    ++p;
    parts += 2;
    if (p >= n) return false;
    const bool spur = c.spec(driver).kind == ComponentKind::kSpurGear;
    if (spur ? !c.is_mesh(t[p]) : !c.is_bevel(t[p])) return false;
    ++p;
    if (p >= n) return false;
    if (t[p] == 2) return p == n - 1;
    if (!c.is_shaft(t[p]) || parts + 1 > max_parts) return false;
    ++parts;
    ++p;
  }
}

std::vector<std::vector<int>> enumerate_designs(const Catalog& catalog, int max_components) {
  const Classifier c{catalog, {static_cast<int>(catalog.size())}};
  std::vector<std::vector<int>> out;
  if (max_components < 1) return out;
  for (int s = 3; s < c.vocab.first_mesh(); ++s) {
    if (!c.is_shaft(s)) continue;
    std::vector<int> prefix{1, s};
    extend(c, prefix, 1, max_components, out);
  }
  return out;
}

Propagation propagate(const Catalog& catalog, const std::vector<int>& tokens) {
  const Classifier c{catalog, {static_cast<int>(catalog.size())}};
  Propagation out;
  Vec3 cursor = Vec3::Zero();
  Vec3 axis = Vec3::UnitX();
  Vec3 omega = axis;  // input turns at unit speed about +X
  int driver = -1, mate = -1;
  Vec3 driver_center = Vec3::Zero();

  auto pitch_radius = [&](int t) { return c.spec(t).module_mm * c.spec(t).teeth / 2.0; };

  for (int t : tokens) {
    if (c.is_shaft(t)) {
      out.centers.push_back(cursor + axis * (c.spec(t).length_mm / 2.0));
      cursor += axis * c.spec(t).length_mm;
    } else if (c.is_gear(t)) {
      if (driver < 0) {
        driver = t;
        driver_center = cursor;
        out.centers.push_back(cursor);
      } else {
        mate = t;
      }
    } else if (c.is_mesh(t) || c.is_bevel(t)) {
      const double r1 = pitch_radius(driver), r2 = pitch_radius(mate);
      Vec3 center, new_axis, contact;
      if (c.is_mesh(t)) {
        const Vec3 offset = plane_direction(axis, t - c.vocab.first_mesh());
        center = driver_center + offset * (r1 + r2);
        new_axis = axis;
        contact = driver_center + offset * r1;
      } else {
        const Vec3 b = plane_direction(axis, t - c.vocab.first_bevel());
        center = driver_center + axis * r2 + b * r1;
        new_axis = b;
        contact = driver_center + b * r1;
      }
      // Driven gear turns about new_axis through `center`; pick its speed so
      // both surfaces move together at the contact point.
      const Vec3 v_driver = cross(omega, contact - driver_center);
      const Vec3 lever = cross(new_axis, contact - center);
      const double s = v_driver.dot(lever) / lever.dot(lever);
      const Vec3 new_omega = new_axis * s;
      out.max_slip = std::max(out.max_slip, (cross(new_omega, contact - center) - v_driver).norm());
      omega = new_omega;
      axis = new_axis;
      cursor = center;
      out.centers.push_back(center);
      driver = mate = -1;
    }
  }
  out.ratio = omega.norm();
  out.direction = omega.dot(axis) > 0 ? 1 : -1;
  out.axis = axis;
  out.position = cursor;
  return out;
}

std::vector<std::size_t> pareto_brute(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      const bool le = pts[j].first <= pts[i].first && pts[j].second <= pts[i].second;
      const bool lt = pts[j].first < pts[i].first || pts[j].second < pts[i].second;
      dominated = le && lt;
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

}  // namespace oracle
