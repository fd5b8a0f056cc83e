#pragma once

// Depth functions for curve sets: the random depth and its simplified and
// metric-depth relatives, integrated (Tukey / simplicial) depth, band and
// modified band depth with pairs of curves, and random Tukey depth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rdepth/csv.hpp"
#include "rdepth/fdata.hpp"
#include "rdepth/metrics.hpp"
#include "rdepth/parallel.hpp"
#include "rdepth/symmetry.hpp"

namespace rdepth {

struct DepthResult {
  std::vector<double> values;
  Index deepest_index = 0;
  std::string method;
  std::map<std::string, std::string> parameters;
};

/// Index of the largest value; ties go to the lowest index.
inline Index argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty list");
  Index best = 0;
  for (Index i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace detail {
inline void require_same_grid(const CurveSet& set, const CurveSet& query) {
  if (!(set.grid() == query.grid())) throw IncompatibleGridError("query curves are not on the data set's grid");
}
inline DepthResult finish(std::vector<double> values, std::string method) {
  DepthResult r;
  r.deepest_index = argmax_lowest(values);
  r.values = std::move(values);
  r.method = std::move(method);
  return r;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Scale selection for the random depth denominator d(vartheta, vartheta')
// ---------------------------------------------------------------------------

/// vartheta' = selected center; vartheta = the center-set member farthest
/// from it. A singleton center set falls back to the mass-sample curve at the
/// (lower) median distance from the center.
struct DefaultScale {};
/// Both anchor curves given explicitly as indices into the data set.
struct ExplicitPair {
  Index vartheta;
  Index vartheta_prime;
};
/// The denominator itself, fixed from outside the data.
struct FixedScale {
  double scale;
};
using VarthetaRule = std::variant<DefaultScale, ExplicitPair, FixedScale>;

struct DepthParams {
  VarthetaRule rule = DefaultScale{};
  SymmetrySolution center;
};

struct ScaleChoice {
  double scale = 0.0;
  std::string source;  // "center-set", "mass-median", "explicit", "fixed", "unit"
  Index vartheta = 0;
  Index vartheta_prime = 0;
};

inline ScaleChoice resolve_scale(const CurveSet& set, const CurveMetric& metric, const SymmetrySolution& center,
                                 const VarthetaRule& rule) {
  ScaleChoice choice;
  choice.vartheta_prime = center.selected;
  const auto theta = set.row(center.selected);

  if (auto fixed = std::get_if<FixedScale>(&rule)) {
    if (!(fixed->scale > 0.0)) throw ConfigError("fixed depth scale must be positive");
    choice.scale = fixed->scale;
    choice.source = "fixed";
    return choice;
  }
  if (auto pair = std::get_if<ExplicitPair>(&rule)) {
    if (pair->vartheta >= set.size() || pair->vartheta_prime >= set.size())
      throw ConfigError("vartheta index out of range");
    choice.vartheta = pair->vartheta;
    choice.vartheta_prime = pair->vartheta_prime;
    choice.scale = metric(set.row(pair->vartheta), set.row(pair->vartheta_prime));
    if (!(choice.scale > 0.0)) throw ConfigError("explicit vartheta pair is at zero distance");
    choice.source = "explicit";
    return choice;
  }

  double far = 0.0;
  Index far_index = center.selected;
  for (Index c : center.center_indices) {
    const double d = metric(set.row(c), theta);
    if (d > far) {
      far = d;
      far_index = c;
    }
  }
  if (far > 0.0) {
    choice.scale = far;
    choice.vartheta = far_index;
    choice.source = "center-set";
    return choice;
  }

  std::vector<std::pair<double, Index>> from_center;
  from_center.reserve(center.mass_indices.size());
  for (Index y : center.mass_indices) from_center.emplace_back(metric(set.row(y), theta), y);
  std::sort(from_center.begin(), from_center.end());
  auto mid = from_center[(from_center.size() - 1) / 2];
  if (mid.first == 0.0) {
    // Median is the center itself; take the median of the positive distances.
    auto first_pos = std::find_if(from_center.begin(), from_center.end(), [](auto& p) { return p.first > 0.0; });
    if (first_pos != from_center.end()) {
      const auto offset = (from_center.end() - first_pos - 1) / 2;
      mid = *(first_pos + offset);
    }
  }
  if (mid.first > 0.0) {
    choice.scale = mid.first;
    choice.vartheta = mid.second;
    choice.source = "mass-median";
    return choice;
  }
  // Every sampled curve coincides with the center: no data-driven scale.
  choice.scale = 1.0;
  choice.vartheta = center.selected;
  choice.source = "unit";
  return choice;
}

// ---------------------------------------------------------------------------
// Random depth, simplified random depth, metric depth
// ---------------------------------------------------------------------------

inline DepthResult random_depth(const CurveSet& set, const CurveMetric& metric, const DepthParams& params,
                                const CurveSet& query) {
  if (params.center.metric != metric.kind())
    throw ConfigError("center was computed with metric '" + std::string(metric_name(params.center.metric)) +
                      "' but depth requested with '" + std::string(metric_name(metric.kind())) + "'");
  detail::require_same_grid(set, query);
  const auto scale = resolve_scale(set, metric, params.center, params.rule);
  const auto theta = set.row(params.center.selected);
  std::vector<double> values(query.size());
  parallel_for(query.size(), [&](std::size_t q) { values[q] = 1.0 / (1.0 + metric(query.row(q), theta) / scale.scale); });
  auto r = detail::finish(std::move(values), "random");
  r.parameters["metric"] = metric_name(metric.kind());
  r.parameters["selected"] = std::to_string(params.center.selected);
  r.parameters["scale"] = format_double(scale.scale);
  r.parameters["scale_source"] = scale.source;
  r.parameters["vartheta"] = std::to_string(scale.vartheta);
  r.parameters["vartheta_prime"] = std::to_string(scale.vartheta_prime);
  r.parameters["delta"] = format_double(params.center.delta);
  return r;
}

inline DepthResult random_depth(const CurveSet& set, const CurveMetric& metric, const DepthParams& params) {
  return random_depth(set, metric, params, set);
}

/// [1 + d(x, theta)]^(-1): no scale normalization.
inline DepthResult simple_random_depth(const CurveSet& set, const CurveMetric& metric, const SymmetrySolution& center,
                                       const CurveSet& query) {
  if (center.metric != metric.kind()) throw ConfigError("center and depth use different metrics");
  detail::require_same_grid(set, query);
  const auto theta = set.row(center.selected);
  std::vector<double> values(query.size());
  parallel_for(query.size(), [&](std::size_t q) { values[q] = 1.0 / (1.0 + metric(query.row(q), theta)); });
  auto r = detail::finish(std::move(values), "simple");
  r.parameters["metric"] = metric_name(metric.kind());
  r.parameters["selected"] = std::to_string(center.selected);
  return r;
}

/// Metric depth against an explicit center set: 1 / (1 + d(x, Theta) / d(vartheta, vartheta')).
inline DepthResult metric_depth(const CurveSet& set, const CurveMetric& metric, std::span<const Index> theta_indices,
                                ExplicitPair vartheta, const CurveSet& query) {
  if (theta_indices.empty()) throw ConfigError("metric depth needs a non-empty center set");
  detail::require_same_grid(set, query);
  const double scale = metric(set.row(vartheta.vartheta), set.row(vartheta.vartheta_prime));
  if (!(scale > 0.0)) throw ConfigError("metric depth scale d(vartheta, vartheta') is zero");
  std::vector<double> values(query.size());
  parallel_for(query.size(), [&](std::size_t q) {
    double nearest = INFINITY;
    for (Index t : theta_indices) nearest = std::min(nearest, metric(query.row(q), set.row(t)));
    values[q] = 1.0 / (1.0 + nearest / scale);
  });
  auto r = detail::finish(std::move(values), "metric");
  r.parameters["metric"] = metric_name(metric.kind());
  r.parameters["scale"] = format_double(scale);
  return r;
}

// ---------------------------------------------------------------------------
// Univariate depths (closed intervals: ties count on both sides)
// ---------------------------------------------------------------------------

struct SideMasses {
  double left;   // P(-inf, x]
  double right;  // P[x, inf)
};

inline SideMasses side_masses(std::span<const double> sample, double x) {
  if (sample.empty()) throw std::invalid_argument("univariate depth of an empty sample");
  std::size_t le = 0, ge = 0;
  for (double v : sample) {
    le += v <= x;
    ge += v >= x;
  }
  const double n = static_cast<double>(sample.size());
  return {le / n, ge / n};
}

inline double univariate_tukey(std::span<const double> sample, double x) {
  auto s = side_masses(sample, x);
  return std::min(s.left, s.right);
}

inline double univariate_simplicial(std::span<const double> sample, double x) {
  auto s = side_masses(sample, x);
  return s.left * s.right;
}

namespace detail {
/// Per grid point, the sample values sorted ascending (column-major).
inline std::vector<double> sorted_columns(const CurveSet& set) {
  const std::size_t n = set.size(), g = set.grid_size();
  std::vector<double> cols(n * g);
  for (std::size_t t = 0; t < g; ++t) {
    for (std::size_t i = 0; i < n; ++i) cols[t * n + i] = set.at(i, t);
    std::sort(cols.begin() + t * n, cols.begin() + (t + 1) * n);
  }
  return cols;
}
/// Counts of sample values <= x and >= x in a sorted column.
inline std::pair<std::size_t, std::size_t> column_counts(const double* col, std::size_t n, double x) {
  const std::size_t le = static_cast<std::size_t>(std::upper_bound(col, col + n, x) - col);
  const std::size_t lt = static_cast<std::size_t>(std::lower_bound(col, col + n, x) - col);
  return {le, n - lt};
}
/// Quadrature weights normalized to sum 1; exactly equal for uniform grids.
inline std::vector<double> average_weights(const Grid& grid) {
  const std::size_t g = grid.size();
  if (grid.is_uniform()) return std::vector<double>(g, 1.0 / static_cast<double>(g));
  auto w = cell_widths(grid);
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}
}  // namespace detail

enum class IntegratedFlavor { tukey, simplicial };

/// Domain average of the univariate depth of x(t) within the sample at t.
inline DepthResult integrated_depth(const CurveSet& set, IntegratedFlavor flavor, const CurveSet& query) {
  detail::require_same_grid(set, query);
  const std::size_t n = set.size(), g = set.grid_size();
  const auto cols = detail::sorted_columns(set);
  const bool uniform = set.grid().is_uniform();
  const auto weights = detail::average_weights(set.grid());
  const double nd = static_cast<double>(n);
  std::vector<double> values(query.size());
  parallel_for(query.size(), [&](std::size_t q) {
    // Uniform grids accumulate exact integer counts and divide once.
    std::uint64_t counts = 0;
    double acc = 0.0;
    for (std::size_t t = 0; t < g; ++t) {
      auto [le, ge] = detail::column_counts(cols.data() + t * n, n, query.at(q, t));
      const std::uint64_t c = flavor == IntegratedFlavor::tukey ? std::min(le, ge) : std::uint64_t{le} * ge;
      if (uniform)
        counts += c;
      else
        acc += weights[t] * (flavor == IntegratedFlavor::tukey ? c / nd : c / (nd * nd));
    }
    if (uniform) {
      const double denom = flavor == IntegratedFlavor::tukey ? nd * static_cast<double>(g) : nd * nd * static_cast<double>(g);
      values[q] = static_cast<double>(counts) / denom;
    } else {
      values[q] = acc;
    }
  });
  return detail::finish(std::move(values), flavor == IntegratedFlavor::tukey ? "idt" : "ids");
}

// ---------------------------------------------------------------------------
// Band depths with pairs of curves (closed bands)
// ---------------------------------------------------------------------------

/// Fraction of sample pairs whose pointwise envelope contains the query on
/// the whole grid.
inline DepthResult band_depth_j2(const CurveSet& set, const CurveSet& query) {
  detail::require_same_grid(set, query);
  const std::size_t n = set.size(), g = set.grid_size();
  if (n < 2) throw std::invalid_argument("band depth needs at least two curves");
  const std::size_t words = (g + 63) / 64;
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<std::uint64_t> full(words, ~std::uint64_t{0});
  if (g % 64) full.back() = (std::uint64_t{1} << (g % 64)) - 1;

  std::vector<double> values(query.size());
  parallel_for(query.size(), [&](std::size_t q) {
    // below[i]: bits where sample i <= query; above[i]: bits where sample i >= query.
    std::vector<std::uint64_t> below(n * words, 0), above(n * words, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < g; ++t) {
        const double s = set.at(i, t), x = query.at(q, t);
        const std::uint64_t bit = std::uint64_t{1} << (t % 64);
        if (s <= x) below[i * words + t / 64] |= bit;
        if (s >= x) above[i * words + t / 64] |= bit;
      }
    }
    std::size_t inside = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        bool ok = true;
        for (std::size_t w = 0; w < words && ok; ++w) {
          ok = ((below[i * words + w] | below[j * words + w]) == full[w]) &&
               ((above[i * words + w] | above[j * words + w]) == full[w]);
        }
        inside += ok;
      }
    }
    values[q] = static_cast<double>(inside) / pairs;
  });
  return detail::finish(std::move(values), "band");
}

/// Average over sample pairs of the fraction of the grid where the query
/// lies inside the pair's envelope.
inline DepthResult modified_band_depth_j2(const CurveSet& set, const CurveSet& query) {
  detail::require_same_grid(set, query);
  const std::size_t n = set.size(), g = set.grid_size();
  if (n < 2) throw std::invalid_argument("modified band depth needs at least two curves");
  const auto cols = detail::sorted_columns(set);
  const bool uniform = set.grid().is_uniform();
  const auto weights = detail::average_weights(set.grid());
  auto choose2 = [](std::size_t k) { return static_cast<double>(k) * static_cast<double>(k > 0 ? k - 1 : 0) / 2.0; };
  const double pairs = choose2(n);
  std::vector<double> values(query.size());
  parallel_for(query.size(), [&](std::size_t q) {
    double acc = 0.0;
    for (std::size_t t = 0; t < g; ++t) {
      auto [le, ge] = detail::column_counts(cols.data() + t * n, n, query.at(q, t));
      const std::size_t strictly_below = n - ge, strictly_above = n - le;
      const double containing = pairs - choose2(strictly_below) - choose2(strictly_above);
      acc += uniform ? containing : weights[t] * (containing / pairs);
    }
    values[q] = uniform ? acc / (pairs * static_cast<double>(g)) : acc;
  });
  return detail::finish(std::move(values), "mbd");
}

// ---------------------------------------------------------------------------
// Random Tukey depth
// ---------------------------------------------------------------------------

struct ProjectionSpec {
  std::size_t k = 1;
  std::uint64_t seed = 0;
};

/// Unit-length directions with iid standard normal entries per grid point.
inline std::vector<std::vector<double>> draw_directions(std::size_t grid_size, const ProjectionSpec& spec) {
  if (spec.k < 1) throw std::invalid_argument("random Tukey depth needs at least one projection");
  RngStream rng(spec.seed, streams::projections);
  std::vector<std::vector<double>> dirs(spec.k, std::vector<double>(grid_size));
  for (auto& d : dirs) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& v : d) {
        v = rng.normal(0.0, 1.0);
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : d) v *= inv;
  }
  return dirs;
}

inline DepthResult random_tukey_depth(const CurveSet& set, const ProjectionSpec& spec, const CurveSet& query) {
  detail::require_same_grid(set, query);
  const auto dirs = draw_directions(set.grid_size(), spec);
  auto project = [&](const CurveSet& s) {
    std::vector<double> p(spec.k * s.size());
    for (std::size_t k = 0; k < spec.k; ++k) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        double acc = 0.0;
        auto row = s.row(i);
        for (std::size_t t = 0; t < row.size(); ++t) acc += dirs[k][t] * row[t];
        p[k * s.size() + i] = acc;
      }
    }
    return p;
  };
  const std::size_t n = set.size();
  auto sample = project(set);
  const auto qproj = project(query);
  for (std::size_t k = 0; k < spec.k; ++k) std::sort(sample.begin() + k * n, sample.begin() + (k + 1) * n);
  std::vector<double> values(query.size());
  parallel_for(query.size(), [&](std::size_t q) {
    double depth = 1.0;
    for (std::size_t k = 0; k < spec.k; ++k) {
      auto [le, ge] = detail::column_counts(sample.data() + k * n, n, qproj[k * query.size() + q]);
      depth = std::min(depth, static_cast<double>(std::min(le, ge)) / static_cast<double>(n));
    }
    values[q] = depth;
  });
  auto r = detail::finish(std::move(values), "rtukey");
  r.parameters["projections"] = std::to_string(spec.k);
  r.parameters["seed"] = std::to_string(spec.seed);
  return r;
}

}  // namespace rdepth
