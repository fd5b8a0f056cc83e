#pragma once

// Centers of d-symmetry over an empirical distribution.
//
// For a candidate center z and a probe x, the far set of x about z is
//   H(z, x) = { y : d(y, x) >= max(d(x, z), d(y, z)) }.
// z is a center over (mass sample, probes) when every probe's far set holds at
// least half of the mass sample. When no candidate qualifies, the candidates
// maximizing the worst-case mass are returned with delta = 1/2 - that mass.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "rdepth/fdata.hpp"
#include "rdepth/metrics.hpp"
#include "rdepth/parallel.hpp"

namespace rdepth {

struct SymmetrySolution {
  IndexList center_indices;  // sorted ascending, never empty
  Index selected = 0;
  double delta = 0.0;  // 0 when the half-mass condition held for every probe
  std::size_t n_used = 0;
  std::size_t m_used = 0;
  std::uint64_t seed = 0;
  IndexList mass_indices;   // P_n sample, draw order
  IndexList probe_indices;  // P_m sample, draw order
  MetricKind metric = MetricKind::grid_l2_unweighted;
};

struct CenterOptions {
  /// Search every curve as a candidate instead of the sampled pool.
  bool full_candidates = false;
};

/// Fraction of `sample` inside the far set H(z, x). Direct evaluation.
inline double hset_mass(const CurveSet& set, const CurveMetric& metric, Index z, Index x,
                        std::span<const Index> sample) {
  if (sample.empty()) throw std::invalid_argument("hset_mass: empty sample");
  const double dxz = metric(set.row(x), set.row(z));
  std::size_t count = 0;
  for (Index y : sample) {
    const double dyx = metric(set.row(y), set.row(x));
    const double dyz = metric(set.row(y), set.row(z));
    if (dyx >= std::max(dxz, dyz)) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(sample.size());
}

namespace detail {

inline IndexList sorted_union(std::initializer_list<std::span<const Index>> lists) {
  IndexList out;
  for (auto l : lists) out.insert(out.end(), l.begin(), l.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Distances from every row curve to the mass sample and to the probes,
/// each entry computed independently of the others.
class DistanceTable {
 public:
  DistanceTable(const CurveSet& set, const CurveMetric& metric, IndexList rows, std::span<const Index> mass,
                std::span<const Index> probes)
      : rows_(std::move(rows)), n_mass_(mass.size()), n_probe_(probes.size()) {
    to_mass_.resize(rows_.size() * n_mass_);
    to_probe_.resize(rows_.size() * n_probe_);
    parallel_for(rows_.size(), [&](std::size_t r) {
      auto a = set.row(rows_[r]);
      for (std::size_t j = 0; j < n_mass_; ++j) to_mass_[r * n_mass_ + j] = metric(a, set.row(mass[j]));
      for (std::size_t j = 0; j < n_probe_; ++j) to_probe_[r * n_probe_ + j] = metric(a, set.row(probes[j]));
    });
    probe_rows_.reserve(n_probe_);
    for (Index p : probes) probe_rows_.push_back(position(p));
  }

  std::size_t position(Index curve) const {
    auto it = std::lower_bound(rows_.begin(), rows_.end(), curve);
    if (it == rows_.end() || *it != curve) throw std::logic_error("curve missing from distance table");
    return static_cast<std::size_t>(it - rows_.begin());
  }

  const IndexList& rows() const noexcept { return rows_; }
  std::size_t mass_count() const noexcept { return n_mass_; }
  std::size_t probe_count() const noexcept { return n_probe_; }
  const double* to_mass(std::size_t r) const { return to_mass_.data() + r * n_mass_; }
  const double* to_probe(std::size_t r) const { return to_probe_.data() + r * n_probe_; }
  std::size_t probe_row(std::size_t j) const { return probe_rows_[j]; }

 private:
  IndexList rows_;
  std::size_t n_mass_;
  std::size_t n_probe_;
  std::vector<double> to_mass_;
  std::vector<double> to_probe_;
  std::vector<std::size_t> probe_rows_;
};

/// Far-set mass for candidate row z and probe column j.
inline double table_mass(const DistanceTable& t, std::size_t z, std::size_t j) {
  const double dxz = t.to_probe(z)[j];
  const double* from_x = t.to_mass(t.probe_row(j));
  const double* from_z = t.to_mass(z);
  std::size_t count = 0;
  for (std::size_t y = 0; y < t.mass_count(); ++y) {
    const double dyx = from_x[y];
    count += (dyx >= dxz && dyx >= from_z[y]) ? 1u : 0u;
  }
  return static_cast<double>(count) / static_cast<double>(t.mass_count());
}

/// Minimum far-set mass over all probes for candidate row z. Stops as soon
/// as the running minimum drops strictly below `floor`; the return value is
/// then some mass below `floor`, not necessarily the minimum.
inline double min_mass(const DistanceTable& t, std::size_t z, double floor) {
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < t.probe_count(); ++j) {
    lowest = std::min(lowest, table_mass(t, z, j));
    if (lowest < floor) break;
  }
  return lowest;
}

/// Candidates (given as table rows) whose minimum mass reaches `threshold`.
inline std::vector<char> passing_rows(const DistanceTable& t, std::span<const std::size_t> candidates,
                                      double threshold) {
  std::vector<char> pass(candidates.size(), 0);
  parallel_for(candidates.size(), [&](std::size_t c) { pass[c] = min_mass(t, candidates[c], threshold) >= threshold; });
  return pass;
}

/// Exact maximin over candidates; returns the best value and the rows attaining it. Work is split into fixed blocks; inside a
/// block, candidates already worse than the block's best are abandoned. An
/// abandoned candidate is strictly below the global maximum, so the result
/// does not depend on the block split.
inline std::pair<double, std::vector<std::size_t>> maximin_rows(const DistanceTable& t,
                                                                std::span<const std::size_t> candidates) {
  constexpr std::size_t block = 32;
  const std::size_t blocks = (candidates.size() + block - 1) / block;
  std::vector<double> value(candidates.size(), -1.0);
  parallel_for(blocks, [&](std::size_t b) {
    double best = -1.0;
    const std::size_t end = std::min(candidates.size(), (b + 1) * block);
    for (std::size_t c = b * block; c < end; ++c) {
      const double v = min_mass(t, candidates[c], best);
      if (v >= best) {
        best = v;
        value[c] = v;
      }
    }
  });
  const double top = *std::max_element(value.begin(), value.end());
  std::vector<std::size_t> winners;
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (value[c] == top) winners.push_back(candidates[c]);
  return {top, winners};
}

}  // namespace detail

/// All candidates z whose far-set mass over `mass_sample` reaches `threshold`
/// for every probe. Result keeps the candidates' order; it may be empty.
inline IndexList theta_set(const CurveSet& set, const CurveMetric& metric, std::span<const Index> candidates,
                           std::span<const Index> probes, std::span<const Index> mass_sample, double threshold) {
  if (candidates.empty() || probes.empty() || mass_sample.empty())
    throw std::invalid_argument("theta_set: candidate, probe and mass lists must be non-empty");
  detail::DistanceTable table(set, metric, detail::sorted_union({candidates, probes, mass_sample}), mass_sample,
                              probes);
  std::vector<std::size_t> rows;
  rows.reserve(candidates.size());
  for (Index z : candidates) rows.push_back(table.position(z));
  auto pass = detail::passing_rows(table, rows, threshold);
  IndexList out;
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (pass[c]) out.push_back(candidates[c]);
  return out;
}

inline IndexList all_indices(std::size_t n) {
  IndexList v(n);
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

/// Random center of symmetry from independent P_n (mass) and P_m (probe)
/// samples, relaxed to the best achievable delta when no exact center exists.
/// The selected center minimizes the summed distance to the mass sample;
/// ties go to the lowest index.
inline SymmetrySolution random_center(const CurveSet& set, const CurveMetric& metric, const SubsampleSpec& spec,
                                      const CenterOptions& options = {}) {
  spec.validate(set.size());
  SymmetrySolution sol;
  sol.n_used = spec.n;
  sol.m_used = spec.m;
  sol.seed = spec.seed;
  sol.metric = metric.kind();
  RngStream mass_rng(spec.seed, streams::mass_sample);
  RngStream probe_rng(spec.seed, streams::probe_sample);
  sol.mass_indices = draw_subsample(set.size(), spec.n, mass_rng);
  sol.probe_indices = draw_subsample(set.size(), spec.m, probe_rng);

  IndexList pool = options.full_candidates ? all_indices(set.size())
                                           : detail::sorted_union({sol.mass_indices, sol.probe_indices});
  detail::DistanceTable table(set, metric, pool, sol.mass_indices, sol.probe_indices);

  std::vector<std::size_t> rows(pool.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});

  std::vector<std::size_t> winners;
  auto pass = detail::passing_rows(table, rows, 0.5);
  for (std::size_t c = 0; c < rows.size(); ++c)
    if (pass[c]) winners.push_back(c);
  if (winners.empty()) {
    auto [best, rows_best] = detail::maximin_rows(table, rows);
    sol.delta = 0.5 - best;
    winners = std::move(rows_best);
  }

  for (std::size_t r : winners) sol.center_indices.push_back(pool[r]);

  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t r : winners) {
    const double* d = table.to_mass(r);
    double s = 0.0;
    for (std::size_t y = 0; y < table.mass_count(); ++y) s += d[y];
    if (s < best_sum) {
      best_sum = s;
      sol.selected = pool[r];
    }
  }
  return sol;
}

inline SymmetrySolution random_center(const CurveSet& set, MetricKind kind, const SubsampleSpec& spec,
                                      const CenterOptions& options = {}) {
  return random_center(set, CurveMetric(kind, set.grid()), spec, options);
}

/// Hausdorff distance between the center sets of two independent draws.
inline double convergence_probe(const CurveSet& set, const CurveMetric& metric, const SubsampleSpec& first,
                                const SubsampleSpec& second, const CenterOptions& options = {}) {
  auto a = random_center(set, metric, first, options);
  auto b = random_center(set, metric, second, options);
  return hausdorff(metric, set, a.center_indices, b.center_indices);
}

}  // namespace rdepth
