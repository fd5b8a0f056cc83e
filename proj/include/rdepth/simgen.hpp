#pragma once

// Synthetic monotone curve family and the Monte Carlo experiments built on it.
//
//   x_k(t) = exp(-N t c / (k + N / c)),   k = 1..N
//   X_k(t) = x_k(t) + Y_k Z_k(t),  Y_k ~ Bernoulli(p),  Z_k(t) ~ Normal(0, sd^2)
//
// The noiseless family is strictly increasing in k at every t, so its median
// curve(s) are the true deepest elements.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rdepth/csv.hpp"
#include "rdepth/depths.hpp"
#include "rdepth/fdata.hpp"
#include "rdepth/metrics.hpp"
#include "rdepth/parallel.hpp"
#include "rdepth/stats.hpp"
#include "rdepth/symmetry.hpp"

namespace rdepth {

/// 99 equispaced points i/100, i = 1..99.
inline Grid default_sim_grid() {
  std::vector<double> pts;
  pts.reserve(99);
  for (int i = 1; i <= 99; ++i) pts.push_back(i / 100.0);
  return Grid(std::move(pts));
}

struct SimConfig {
  std::size_t N = 10;
  double c = 10.0;
  double sd = 0.0;
  double bernoulli_p = 1.0 / 3.0;
  Grid grid = default_sim_grid();
  std::uint64_t seed = 0;

  void validate() const {
    if (N < 2) throw std::invalid_argument("simulation needs N >= 2");
    if (!(c > 0.0)) throw std::invalid_argument("simulation constant c must be positive");
    if (!(sd >= 0.0)) throw std::invalid_argument("noise sd must be non-negative");
    if (!(bernoulli_p >= 0.0 && bernoulli_p <= 1.0)) throw std::invalid_argument("bernoulli_p must lie in [0, 1]");
  }
};

/// Noiseless curve x_k on the configured grid; k is 1-based.
inline Curve mean_curve(const SimConfig& cfg, std::size_t k) {
  if (k < 1 || k > cfg.N)
    throw std::out_of_range("curve label k = " + std::to_string(k) + " outside 1.." + std::to_string(cfg.N));
  const double n = static_cast<double>(cfg.N);
  const double denom = static_cast<double>(k) + n / cfg.c;
  Curve out(cfg.grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(-n * cfg.grid[i] * cfg.c / denom);
  return out;
}

inline CurveSet mean_curves(const SimConfig& cfg) {
  cfg.validate();
  std::vector<double> flat;
  flat.reserve(cfg.N * cfg.grid.size());
  for (std::size_t k = 1; k <= cfg.N; ++k) {
    auto row = mean_curve(cfg, k);
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return CurveSet(cfg.grid, std::move(flat));
}

/// Row k-1 holds X_k. Noise is drawn only for curves with Y_k = 1.
inline CurveSet sample_curves(const SimConfig& cfg) {
  cfg.validate();
  const std::size_t g = cfg.grid.size();
  std::vector<double> flat;
  flat.reserve(cfg.N * g);
  RngStream pick(cfg.seed, streams::bernoulli);
  RngStream noise(cfg.seed, streams::noise);
  for (std::size_t k = 1; k <= cfg.N; ++k) {
    auto row = mean_curve(cfg, k);
    const bool perturbed = pick.bernoulli(cfg.bernoulli_p);
    if (perturbed && cfg.sd > 0.0) {
      for (double& v : row) v += noise.normal(0.0, cfg.sd);
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return CurveSet(cfg.grid, std::move(flat));
}

/// 1-based labels of the median curve(s): {N/2, N/2+1} for even N, {(N+1)/2} for odd N.
inline std::vector<std::size_t> true_deepest_indices(std::size_t N) {
  if (N < 2) throw std::invalid_argument("true deepest indices need N >= 2");
  if (N % 2 == 0) return {N / 2, N / 2 + 1};
  return {(N + 1) / 2};
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string experiment;
  std::size_t N = 0;
  double c = 0.0;
  double sd = 0.0;
  std::size_t n = 0;  // 0 when not applicable
  std::size_t m = 0;
  std::string method;
  std::string statistic;
  double value = 0.0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
};

inline void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  out << "experiment,N,c,sd,n,m,method,statistic,value,reps,seed\n";
  for (const auto& r : report.rows) {
    out << r.experiment << ',' << r.N << ',' << format_double(r.c) << ',' << format_double(r.sd) << ',';
    if (r.n) out << r.n;
    out << ',';
    if (r.m) out << r.m;
    out << ',' << r.method << ',' << r.statistic << ',' << format_double(r.value) << ',' << r.reps << ','
        << r.seed << '\n';
  }
}

// ---------------------------------------------------------------------------
// Convergence of the random deepest curve (noiseless family)
// ---------------------------------------------------------------------------

/// Distance from the random-depth deepest curve to the nearest true deepest
/// curve, for one replicate.
inline double convergence_replicate(const CurveSet& family, const CurveMetric& l2, const SubsampleSpec& spec) {
  DepthParams params;
  params.center = random_center(family, l2, spec);
  const auto depth = random_depth(family, l2, params);
  double best = INFINITY;
  for (std::size_t k : true_deepest_indices(family.size()))
    best = std::min(best, l2(family.row(depth.deepest_index), family.row(k - 1)));
  return best;
}

/// Mean and standard deviation over replicates for every (n, m) pair.
/// Replicate r uses subsample seed derive_seed(seed, r).
inline ExperimentReport convergence_experiment(const SimConfig& cfg, const std::vector<std::size_t>& n_list,
                                               const std::vector<std::size_t>& m_list, std::size_t reps,
                                               std::uint64_t seed) {
  cfg.validate();
  if (cfg.sd != 0.0) throw ConfigError("the convergence experiment runs on the noiseless family (sd = 0)");
  if (reps < 1) throw std::invalid_argument("need at least one replicate");
  for (auto v : n_list)
    if (v < 1 || v > cfg.N) throw std::invalid_argument("n outside 1..N");
  for (auto v : m_list)
    if (v < 1 || v > cfg.N) throw std::invalid_argument("m outside 1..N");

  const CurveSet family = mean_curves(cfg);
  const CurveMetric l2(MetricKind::grid_l2_unweighted, family.grid());
  ExperimentReport report;
  report.seed = seed;
  report.reps = reps;
  for (std::size_t n : n_list) {
    for (std::size_t m : m_list) {
      std::vector<double> dist(reps);
      parallel_for(reps, [&](std::size_t r) {
        dist[r] = convergence_replicate(family, l2, SubsampleSpec{n, m, derive_seed(seed, r)});
      });
      for (auto [stat, value] : {std::pair{"mean", mean(dist)}, std::pair{"sd", sample_sd(dist)}}) {
        report.rows.push_back(ReportRow{"convergence", cfg.N, cfg.c, cfg.sd, n, m, "random", stat, value, reps, seed});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Identification of the deepest curve by competing depths
// ---------------------------------------------------------------------------

enum class DepthMethod { idt, mbd, band, rtukey1, rtukey10, random };

inline std::string_view method_name(DepthMethod m) {
  switch (m) {
    case DepthMethod::idt: return "idt";
    case DepthMethod::mbd: return "mbd";
    case DepthMethod::band: return "band";
    case DepthMethod::rtukey1: return "rtukey1";
    case DepthMethod::rtukey10: return "rtukey10";
    case DepthMethod::random: return "random";
  }
  return "?";
}

inline DepthMethod parse_depth_method(std::string_view s) {
  for (auto m : {DepthMethod::idt, DepthMethod::mbd, DepthMethod::band, DepthMethod::rtukey1, DepthMethod::rtukey10,
                 DepthMethod::random})
    if (method_name(m) == s) return m;
  throw ConfigError("unknown identification method '" + std::string(s) + "'");
}

struct IdentifyOptions {
  /// Subsample size for the random depth; 0 means N for N <= 1001 (exact
  /// center) and 500 above.
  std::size_t random_n = 0;
  MetricKind metric = MetricKind::grid_l2_unweighted;
};

inline std::size_t identify_subsample_size(std::size_t N, const IdentifyOptions& opt) {
  if (opt.random_n) return std::min(opt.random_n, N);
  return N <= 1001 ? N : 500;
}

/// Deepest row under `method` for one data set.
inline Index deepest_by(DepthMethod method, const CurveSet& data, std::uint64_t replicate_seed,
                        const IdentifyOptions& opt) {
  switch (method) {
    case DepthMethod::idt: return integrated_depth(data, IntegratedFlavor::tukey, data).deepest_index;
    case DepthMethod::mbd: return modified_band_depth_j2(data, data).deepest_index;
    case DepthMethod::band: return band_depth_j2(data, data).deepest_index;
    case DepthMethod::rtukey1: return random_tukey_depth(data, {1, replicate_seed}, data).deepest_index;
    case DepthMethod::rtukey10: return random_tukey_depth(data, {10, replicate_seed}, data).deepest_index;
    case DepthMethod::random: {
      const CurveMetric metric(opt.metric, data.grid());
      const std::size_t n = identify_subsample_size(data.size(), opt);
      DepthParams params;
      params.center = random_center(data, metric, SubsampleSpec{n, n, replicate_seed});
      return random_depth(data, metric, params).deepest_index;
    }
  }
  return 0;
}

/// Success rate of each method at picking a true deepest curve (either one
/// for even N). Replicate r draws data with seed derive_seed(seed, r).
inline ExperimentReport identification_experiment(const std::vector<SimConfig>& cfgs,
                                                  const std::vector<DepthMethod>& methods, std::size_t reps,
                                                  std::uint64_t seed, const IdentifyOptions& opt = {}) {
  if (reps < 1) throw std::invalid_argument("need at least one replicate");
  ExperimentReport report;
  report.seed = seed;
  report.reps = reps;
  for (const auto& base : cfgs) {
    base.validate();
    const auto truth = true_deepest_indices(base.N);
    // hits[r * methods + j]
    std::vector<char> hits(reps * methods.size(), 0);
    parallel_for(reps, [&](std::size_t r) {
      SimConfig cfg = base;
      cfg.seed = derive_seed(seed, r);
      const CurveSet data = sample_curves(cfg);
      for (std::size_t j = 0; j < methods.size(); ++j) {
        const Index deepest = deepest_by(methods[j], data, cfg.seed, opt);
        for (std::size_t k : truth) hits[r * methods.size() + j] |= (deepest == k - 1);
      }
    });
    for (std::size_t j = 0; j < methods.size(); ++j) {
      std::size_t count = 0;
      for (std::size_t r = 0; r < reps; ++r) count += hits[r * methods.size() + j];
      const bool is_random = methods[j] == DepthMethod::random;
      const std::size_t n = is_random ? identify_subsample_size(base.N, opt) : 0;
      report.rows.push_back(ReportRow{"identification", base.N, base.c, base.sd, n, n,
                                      std::string(method_name(methods[j])), "success_rate",
                                      static_cast<double>(count) / static_cast<double>(reps), reps, seed});
    }
  }
  return report;
}

}  // namespace rdepth
