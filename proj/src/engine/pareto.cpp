#include "gearformer/engine/pareto.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "gearformer/error.hpp"

namespace gearformer {

namespace {

struct MetricInfo {
  MetricKey key;
  std::string_view name;
  Orientation orientation;
};

constexpr std::array<MetricInfo, 11> kMetrics = {{
    {MetricKey::kCost, "cost_usd", Orientation::kLowerIsBetter},
    {MetricKey::kWeight, "weight_kg", Orientation::kLowerIsBetter},
    {MetricKey::kPartCount, "part_count", Orientation::kLowerIsBetter},
    {MetricKey::kRatioError, "ratio_error", Orientation::kLowerIsBetter},
    {MetricKey::kPositionError, "position_error", Orientation::kLowerIsBetter},
    {MetricKey::kPositionErrorX, "position_error_x", Orientation::kLowerIsBetter},
    {MetricKey::kPositionErrorY, "position_error_y", Orientation::kLowerIsBetter},
    {MetricKey::kPositionErrorZ, "position_error_z", Orientation::kLowerIsBetter},
    {MetricKey::kAxisMatch, "axis_match", Orientation::kHigherIsBetter},
    {MetricKey::kDirectionMatch, "direction_match", Orientation::kHigherIsBetter},
    {MetricKey::kAchievedRatio, "achieved_ratio", Orientation::kNone},
}};

const MetricInfo& info(MetricKey key) { return kMetrics[static_cast<std::size_t>(key)]; }

}  // namespace

std::string_view metric_name(MetricKey key) { return info(key).name; }

Orientation metric_orientation(MetricKey key) { return info(key).orientation; }

MetricKey parse_metric(std::string_view name) {
  for (const auto& m : kMetrics) {
    if (m.name == name) return m.key;
  }
  throw Error(ErrorCode::kBadRequest, "unknown metric key '" + std::string(name) + "'", "metric");
}

double metric_value(const MetricsReport& r, MetricKey key) {
  switch (key) {
    case MetricKey::kCost:
      return r.cost_usd;
    case MetricKey::kWeight:
      return r.weight_kg;
    case MetricKey::kPartCount:
      return r.part_count;
    case MetricKey::kRatioError:
      return r.ratio_error;
    case MetricKey::kPositionError:
      return r.position_error;
    case MetricKey::kPositionErrorX:
      return r.position_error_axes.x();
    case MetricKey::kPositionErrorY:
      return r.position_error_axes.y();
    case MetricKey::kPositionErrorZ:
      return r.position_error_axes.z();
    case MetricKey::kAxisMatch:
      return r.axis_match ? 1.0 : 0.0;
    case MetricKey::kDirectionMatch:
      return r.direction_match ? 1.0 : 0.0;
    case MetricKey::kAchievedRatio:
      return r.achieved_ratio;
  }
  return 0.0;
}

std::vector<std::size_t> pareto_front(std::span<const std::pair<double, double>> points) {
  // Sort by x then y; a point is on the front iff its y is strictly below the
  // best y among points with strictly smaller x, and it is not beaten by an
  // equal-x point with smaller y.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });

  std::vector<bool> keep(points.size(), false);
  double best_y = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    // Group of equal x; within it the first entries have the minimum y.
    std::size_t j = i;
    const double x = points[order[i]].first;
    const double group_min_y = points[order[i]].second;
    while (j < order.size() && points[order[j]].first == x) {
      const double y = points[order[j]].second;
      if (y == group_min_y && y < best_y) keep[order[j]] = true;
      ++j;
    }
    best_y = std::min(best_y, group_min_y);
    i = j;
  }
  std::vector<std::size_t> front;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (keep[k]) front.push_back(k);
  }
  return front;
}

std::vector<std::size_t> pareto_front(std::span<const MetricsReport> reports, MetricKey x, MetricKey y) {
  for (MetricKey k : {x, y}) {
    if (metric_orientation(k) == Orientation::kNone) {
      throw Error(ErrorCode::kBadRequest, "metric '" + std::string(metric_name(k)) + "' has no optimization direction",
                  "metric");
    }
  }
  auto oriented = [](const MetricsReport& r, MetricKey k) {
    const double v = metric_value(r, k);
    return metric_orientation(k) == Orientation::kHigherIsBetter ? -v : v;
  };
  std::vector<std::pair<double, double>> points;
  points.reserve(reports.size());
  for (const auto& r : reports) points.emplace_back(oriented(r, x), oriented(r, y));
  return pareto_front(points);
}

std::vector<std::size_t> sort_filter(std::span<const MetricsReport> reports, std::optional<MetricKey> sort_key,
                                     SortDirection direction, std::span<const RangeFilter> filters) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const bool pass = std::all_of(filters.begin(), filters.end(), [&](const RangeFilter& f) {
      const double v = metric_value(reports[i], f.key);
      return f.min <= v && v <= f.max;
    });
    if (pass) out.push_back(i);
  }
  if (sort_key) {
    std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
      const double va = metric_value(reports[a], *sort_key);
      const double vb = metric_value(reports[b], *sort_key);
      return direction == SortDirection::kAscending ? va < vb : va > vb;
    });
  }
  return out;
}

}  // namespace gearformer
