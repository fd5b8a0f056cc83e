#pragma once

// Distances between sampled curves: plain and cell-weighted L2, sup, and the
// hyperbolic pseudo-distance |i(a) - i(b)| built on mean-over-support
// intensities. Also the Hausdorff distance between curve sets and the
// region-shrinking map.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rdepth/fdata.hpp"

namespace rdepth {

enum class MetricKind { grid_l2_unweighted, grid_l2_riemann, grid_sup, hyperbolic };

inline std::string_view metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::grid_l2_unweighted: return "l2";
    case MetricKind::grid_l2_riemann: return "l2riemann";
    case MetricKind::grid_sup: return "sup";
    case MetricKind::hyperbolic: return "hyperbolic";
  }
  return "?";
}

inline MetricKind parse_metric(std::string_view name) {
  if (name == "l2") return MetricKind::grid_l2_unweighted;
  if (name == "l2riemann") return MetricKind::grid_l2_riemann;
  if (name == "sup") return MetricKind::grid_sup;
  if (name == "hyperbolic") return MetricKind::hyperbolic;
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected l2, l2riemann, sup or hyperbolic)");
}

struct Interval {
  double lo;
  double hi;
};

/// Quadrature weight of each grid point. A point owns the span between the
/// midpoints to its neighbours; the end points extend by half the adjacent
/// spacing, clamped to `domain` when one is given. A one-point grid gets the
/// domain length, or 1.
inline std::vector<double> cell_widths(const Grid& grid, std::optional<Interval> domain = std::nullopt) {
  const std::size_t g = grid.size();
  std::vector<double> w(g);
  if (g == 1) {
    w[0] = domain ? domain->hi - domain->lo : 1.0;
    return w;
  }
  std::vector<double> edges(g + 1);
  for (std::size_t i = 1; i < g; ++i) edges[i] = 0.5 * (grid[i - 1] + grid[i]);
  edges[0] = grid[0] - 0.5 * (grid[1] - grid[0]);
  edges[g] = grid[g - 1] + 0.5 * (grid[g - 1] - grid[g - 2]);
  if (domain) {
    edges[0] = std::max(edges[0], domain->lo);
    edges[g] = std::min(edges[g], domain->hi);
  }
  for (std::size_t i = 0; i < g; ++i) w[i] = edges[i + 1] - edges[i];
  return w;
}

// ---------------------------------------------------------------------------
// Intensity (the hyperbolic function's i(x))
// ---------------------------------------------------------------------------

struct IntensitySummary {
  double integral = 0.0;
  double support_measure = 0.0;
  double i_value = 0.0;
};

/// Discrete intensity: support is every cell whose value is exactly non-zero.
inline IntensitySummary intensity(std::span<const double> values, std::span<const double> cell_measure) {
  if (values.size() != cell_measure.size())
    throw IncompatibleGridError("intensity: values and cell measures differ in length");
  IntensitySummary s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.integral += values[i] * cell_measure[i];
    if (values[i] != 0.0) s.support_measure += cell_measure[i];
  }
  s.i_value = s.support_measure > 0.0 ? s.integral / s.support_measure : 0.0;
  return s;
}

inline IntensitySummary intensity(std::span<const double> values, const Grid& grid) {
  auto w = cell_widths(grid);
  return intensity(values, w);
}

inline double hyperbolic_distance(const IntensitySummary& a, const IntensitySummary& b) {
  return std::abs(a.i_value - b.i_value);
}

// ---------------------------------------------------------------------------
// CurveMetric: a metric kind bound to one grid, with its weights cached.
// ---------------------------------------------------------------------------

class CurveMetric {
 public:
  CurveMetric(MetricKind kind, const Grid& grid) : kind_(kind), weights_(cell_widths(grid)) {}

  MetricKind kind() const noexcept { return kind_; }
  std::size_t grid_size() const noexcept { return weights_.size(); }

  /// Symmetric in its arguments bit for bit: every term depends on (a-b)^2 or |a-b|.
  double operator()(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != weights_.size() || b.size() != weights_.size())
      throw IncompatibleGridError("curve length does not match the metric's grid");
    const std::size_t g = a.size();
    switch (kind_) {
      case MetricKind::grid_l2_unweighted: {
        double s = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
          const double d = a[i] - b[i];
          s += d * d;
        }
        return std::sqrt(s);
      }
      case MetricKind::grid_l2_riemann: {
        double s = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
          const double d = a[i] - b[i];
          s += weights_[i] * (d * d);
        }
        return std::sqrt(s);
      }
      case MetricKind::grid_sup: {
        double s = 0.0;
        for (std::size_t i = 0; i < g; ++i) s = std::max(s, std::abs(a[i] - b[i]));
        return s;
      }
      case MetricKind::hyperbolic:
        return hyperbolic_distance(intensity(a, weights_), intensity(b, weights_));
    }
    return 0.0;
  }

 private:
  MetricKind kind_;
  std::vector<double> weights_;
};

/// Distance between two curves on one grid.
inline double distance(MetricKind kind, const Grid& grid, std::span<const double> a, std::span<const double> b) {
  return CurveMetric(kind, grid)(a, b);
}

/// Distance between curves that may live on different grids. Only the
/// hyperbolic pseudo-distance accepts differing grids.
inline double distance(MetricKind kind, const Grid& grid_a, std::span<const double> a, const Grid& grid_b,
                       std::span<const double> b) {
  if (kind == MetricKind::hyperbolic) return hyperbolic_distance(intensity(a, grid_a), intensity(b, grid_b));
  if (!(grid_a == grid_b))
    throw IncompatibleGridError("metric '" + std::string(metric_name(kind)) + "' needs both curves on the same grid");
  return distance(kind, grid_a, a, b);
}

// ---------------------------------------------------------------------------
// Hausdorff distance
// ---------------------------------------------------------------------------

/// Hausdorff distance between index sets {0..size_a-1} and {0..size_b-1}
/// under dist(i, j). Empty sets are rejected.
template <class Dist>
double hausdorff(std::size_t size_a, std::size_t size_b, Dist&& dist) {
  if (size_a == 0 || size_b == 0) throw std::domain_error("hausdorff distance of an empty set is undefined");
  double a_to_b = 0.0;
  for (std::size_t i = 0; i < size_a; ++i) {
    double nearest = INFINITY;
    for (std::size_t j = 0; j < size_b; ++j) nearest = std::min(nearest, dist(i, j));
    a_to_b = std::max(a_to_b, nearest);
  }
  double b_to_a = 0.0;
  for (std::size_t j = 0; j < size_b; ++j) {
    double nearest = INFINITY;
    for (std::size_t i = 0; i < size_a; ++i) nearest = std::min(nearest, dist(i, j));
    b_to_a = std::max(b_to_a, nearest);
  }
  return std::max(a_to_b, b_to_a);
}

/// Hausdorff distance between two subsets of one curve set.
inline double hausdorff(const CurveMetric& metric, const CurveSet& set, std::span<const Index> a,
                        std::span<const Index> b) {
  return hausdorff(a.size(), b.size(), [&](std::size_t i, std::size_t j) { return metric(set.row(a[i]), set.row(b[j])); });
}

/// Hausdorff distance between two explicit curve lists on one grid.
inline double hausdorff(const CurveMetric& metric, const std::vector<Curve>& a, const std::vector<Curve>& b) {
  return hausdorff(a.size(), b.size(), [&](std::size_t i, std::size_t j) { return metric(a[i], b[j]); });
}

// ---------------------------------------------------------------------------
// Shrink transform: multiply values by alpha on a region of the grid.
// ---------------------------------------------------------------------------

struct ShrinkTransform {
  IndexList region;
  double alpha = 0.5;

  void validate(std::size_t grid_size) const {
    if (region.empty()) throw std::invalid_argument("shrink region is empty");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("shrink factor must lie in (0, 1)");
    std::vector<char> seen(grid_size, 0);
    for (Index r : region) {
      if (r >= grid_size) throw std::invalid_argument("shrink region index out of range");
      seen[r] = 1;
    }
    if (std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }))
      throw std::invalid_argument("shrink region must be a proper subset of the grid");
  }
};

inline Curve shrink(const ShrinkTransform& g, std::span<const double> x) {
  g.validate(x.size());
  Curve out(x.begin(), x.end());
  for (Index r : g.region) out[r] = g.alpha * x[r];
  return out;
}

inline CurveSet shrink(const ShrinkTransform& g, const CurveSet& set) {
  g.validate(set.grid_size());
  std::vector<double> flat(set.values().begin(), set.values().end());
  std::vector<char> in_region(set.grid_size(), 0);
  for (Index r : g.region) in_region[r] = 1;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (in_region[i % set.grid_size()]) flat[i] = g.alpha * flat[i];
  }
  return CurveSet(set.grid(), std::move(flat));
}

}  // namespace rdepth
