#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gearformer/simulator.hpp"

namespace gearformer {

// Report fields usable for sorting, filtering and Pareto analysis.
//
//   key               orientation   notes
//   cost_usd          lower         sum of part prices
//   weight_kg         lower
//   part_count        lower
//   ratio_error       lower         |log(achieved / target)|
//   position_error    lower         Euclidean mm
//   position_error_x  lower         per-axis |diff| mm (also _y, _z)
//   axis_match        higher        1 / 0
//   direction_match   higher        1 / 0
//   achieved_ratio    none          sort/filter only
enum class MetricKey {
  kCost,
  kWeight,
  kPartCount,
  kRatioError,
  kPositionError,
  kPositionErrorX,
  kPositionErrorY,
  kPositionErrorZ,
  kAxisMatch,
  kDirectionMatch,
  kAchievedRatio,
};

enum class Orientation { kLowerIsBetter, kHigherIsBetter, kNone };

std::string_view metric_name(MetricKey key);
Orientation metric_orientation(MetricKey key);
// Throws Error(kBadRequest) naming the unknown key.
MetricKey parse_metric(std::string_view name);
double metric_value(const MetricsReport& report, MetricKey key);

// Indices of points not dominated under "lower is better" on both
// coordinates: i survives iff no j is <= on both and < on at least one.
// Output is in input order.
std::vector<std::size_t> pareto_front(std::span<const std::pair<double, double>> points);

// Pareto front over two report metrics, orientation applied per key. Keys
// without an orientation are rejected with Error(kBadRequest).
std::vector<std::size_t> pareto_front(std::span<const MetricsReport> reports, MetricKey x, MetricKey y);

struct RangeFilter {
  MetricKey key = MetricKey::kCost;
  double min = -1e300;
  double max = 1e300;
};

enum class SortDirection { kAscending, kDescending };

// Keeps reports passing every filter (inclusive ranges), then stable-sorts
// them by `sort_key`. Returns indices into `reports`.
std::vector<std::size_t> sort_filter(std::span<const MetricsReport> reports, std::optional<MetricKey> sort_key,
                                     SortDirection direction, std::span<const RangeFilter> filters);

}  // namespace gearformer
