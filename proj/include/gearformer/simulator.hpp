#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gearformer/catalog.hpp"
#include "gearformer/geometry.hpp"
#include "gearformer/grammar.hpp"
#include "gearformer/layout.hpp"

namespace gearformer {

struct Requirements {
  double target_ratio = 1.0;  // output speed / input speed
  Vec3 target_position = Vec3::Zero();
  Axis target_axis = Axis::kPosX;
  int target_direction = 1;
  std::optional<std::pair<double, double>> ratio_range;
  std::optional<Vec3> position_tolerance;  // per-axis half width, mm
};

// Throws Error(kBadRequest) for a nonpositive ratio, a direction other than
// +-1, a range that does not contain its target, or a negative tolerance.
void check_requirements(const Requirements& requirements);

struct Kinematics {
  double ratio = 1.0;
  Vec3 output_position = Vec3::Zero();
  Axis output_axis = Axis::kPosX;
  int output_direction = 1;
};

struct Costs {
  double cost_usd = 0.0;
  double weight_kg = 0.0;
};

struct MetricsReport {
  double achieved_ratio = 1.0;
  Vec3 output_position = Vec3::Zero();
  Axis output_axis = Axis::kPosX;
  int output_direction = 1;
  double cost_usd = 0.0;
  double weight_kg = 0.0;
  int part_count = 0;
  double ratio_error = 0.0;  // |log(achieved / target)|
  Vec3 position_error_axes = Vec3::Zero();
  double position_error = 0.0;  // Euclidean, mm
  bool axis_match = true;
  bool direction_match = true;
  std::optional<bool> ratio_in_range;
  std::optional<bool> position_in_tolerance;
  bool feasible = true;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Ratio is the product of driver/driven teeth over mesh links; pose and spin
// come from the assembly's output pose.
Kinematics simulate(const Assembly& assembly, const Catalog& catalog);
Costs tally_costs(const Assembly& assembly, const Catalog& catalog);

MetricsReport evaluate(const Kinematics& kinematics, const Requirements& requirements, const Costs& costs,
                       bool feasible = true, int part_count = 0);

// Requirements that a design meets exactly (its own metrics as targets).
Requirements requirements_from(const Kinematics& kinematics);

enum class Stage { kGrammar, kLayout, kInterference, kSimulation };

std::string_view stage_name(Stage stage);

struct StageViolation {
  Stage stage = Stage::kGrammar;
  std::optional<Violation> grammar;      // set for kGrammar
  std::vector<PartLink> interference;    // set for kInterference
  std::string message;
};

struct DesignValidation {
  std::optional<MetricsReport> report;   // absent when the design is not interpretable
  std::optional<Assembly> assembly;
  std::optional<StageViolation> violation;

  bool feasible() const { return report && report->feasible; }
};

// grammar.validate -> build_assembly -> check_interference -> simulate -> evaluate.
// A colliding design still gets metrics, with feasible = false.
DesignValidation validate_design(const Grammar& grammar, const DesignSequence& sequence,
                                 const Requirements& requirements, int max_parts = kDefaultMaxParts,
                                 Pose input_pose = {});

}  // namespace gearformer
