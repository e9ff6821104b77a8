#include "gearformer/simulator.hpp"

#include <cmath>

#include "gearformer/error.hpp"

namespace gearformer {

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kGrammar:
      return "grammar";
    case Stage::kLayout:
      return "layout";
    case Stage::kInterference:
      return "interference";
    case Stage::kSimulation:
      return "simulation";
  }
  return "grammar";
}

void check_requirements(const Requirements& r) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kBadRequest, "requirements: " + m); };
  if (!(r.target_ratio > 0.0) || !std::isfinite(r.target_ratio)) bad("target_ratio must be positive");
  if (r.target_direction != 1 && r.target_direction != -1) bad("target_direction must be +1 or -1");
  if (!r.target_position.allFinite()) bad("target_position must be finite");
  if (r.ratio_range) {
    const auto [lo, hi] = *r.ratio_range;
    if (!(lo <= r.target_ratio && r.target_ratio <= hi)) bad("ratio_range must contain target_ratio");
  }
  if (r.position_tolerance && (r.position_tolerance->array() < 0.0).any()) bad("position_tolerance must be >= 0");
}

Kinematics simulate(const Assembly& assembly, const Catalog& catalog) {
  Kinematics k;
  for (const auto& link : assembly.mesh_links) {
    const auto& driver = catalog.at(assembly.parts[link.first].component);
    const auto& driven = catalog.at(assembly.parts[link.second].component);
    k.ratio *= static_cast<double>(driver.teeth) / static_cast<double>(driven.teeth);
  }
  k.output_position = assembly.output_pose.center;
  k.output_axis = assembly.output_pose.axis;
  k.output_direction = assembly.output_pose.spin;
  return k;
}

Costs tally_costs(const Assembly& assembly, const Catalog& catalog) {
  Costs c;
  for (const auto& part : assembly.parts) {
    c.cost_usd += catalog.at(part.component).price_usd;
    c.weight_kg += catalog.at(part.component).weight_kg;
  }
  if (assembly.pending_mate) {
    c.cost_usd += catalog.at(*assembly.pending_mate).price_usd;
    c.weight_kg += catalog.at(*assembly.pending_mate).weight_kg;
  }
  return c;
}

MetricsReport evaluate(const Kinematics& k, const Requirements& r, const Costs& costs, bool feasible,
                       int part_count) {
  MetricsReport m;
  m.achieved_ratio = k.ratio;
  m.output_position = k.output_position;
  m.output_axis = k.output_axis;
  m.output_direction = k.output_direction;
  m.cost_usd = costs.cost_usd;
  m.weight_kg = costs.weight_kg;
  m.part_count = part_count;
  m.ratio_error = std::abs(std::log(k.ratio / r.target_ratio));
  m.position_error_axes = (k.output_position - r.target_position).cwiseAbs();
  m.position_error = (k.output_position - r.target_position).norm();
  m.axis_match = k.output_axis == r.target_axis;
  m.direction_match = k.output_direction == r.target_direction;
  if (r.ratio_range) m.ratio_in_range = r.ratio_range->first <= k.ratio && k.ratio <= r.ratio_range->second;
  if (r.position_tolerance) m.position_in_tolerance = (m.position_error_axes.array() <= r.position_tolerance->array()).all();
  m.feasible = feasible;
  return m;
}

Requirements requirements_from(const Kinematics& k) {
  Requirements r;
  r.target_ratio = k.ratio;
  r.target_position = k.output_position;
  r.target_axis = k.output_axis;
  r.target_direction = k.output_direction;
  return r;
}

DesignValidation validate_design(const Grammar& grammar, const DesignSequence& sequence,
                                 const Requirements& requirements, int max_parts, Pose input_pose) {
  DesignValidation result;
  if (auto v = grammar.validate(sequence, max_parts, input_pose.axis)) {
    result.violation = StageViolation{Stage::kGrammar, v, {}, v->message};
    return result;
  }
  try {
    AssemblyBuilder builder(grammar.catalog(), input_pose);
    for (const auto& token : sequence.tokens) builder.push(token);
    result.assembly = builder.assembly();
  } catch (const Error& e) {
    result.violation = StageViolation{Stage::kLayout, std::nullopt, {}, e.what()};
    return result;
  }
  const auto& assembly = *result.assembly;
  auto collisions = check_interference(assembly, grammar.catalog());
  const bool feasible = collisions.empty();
  if (!feasible) {
    result.violation = StageViolation{Stage::kInterference, std::nullopt, collisions,
                                      std::to_string(collisions.size()) + " interfering part pair(s)"};
  }
  const Kinematics k = simulate(assembly, grammar.catalog());
  result.report = evaluate(k, requirements, tally_costs(assembly, grammar.catalog()), feasible,
                           static_cast<int>(assembly.parts.size()));
  return result;
}

}  // namespace gearformer
