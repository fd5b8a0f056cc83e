#pragma once

// Core value types for discretized functional data: grids, curve sets,
// subsample specifications and seeded random streams.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rdepth {

using Index = std::size_t;
using IndexList = std::vector<Index>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Malformed input file or text; message names the offending row/column.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two operands live on grids that the requested operation cannot combine.
struct IncompatibleGridError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Parameters that contradict each other or the data they are applied to.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

class Grid {
 public:
  Grid() = default;

  explicit Grid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("grid must have at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i]))
        throw std::invalid_argument("grid point " + std::to_string(i) + " is not finite");
      if (i > 0 && !(points_[i] > points_[i - 1]))
        throw std::invalid_argument("grid is not strictly increasing at point " +
                                    std::to_string(i));
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  std::span<const double> points() const noexcept { return points_; }

  /// True when all spacings agree to within a relative 1e-9.
  bool is_uniform() const noexcept {
    if (points_.size() < 3) return true;
    const double h = points_[1] - points_[0];
    for (std::size_t i = 2; i < points_.size(); ++i) {
      if (std::abs((points_[i] - points_[i - 1]) - h) > 1e-9 * std::abs(h)) return false;
    }
    return true;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::vector<double> points_;
};

// ---------------------------------------------------------------------------
// CurveSet: N curves sampled on a shared grid, stored row-major.
// ---------------------------------------------------------------------------

using Curve = std::vector<double>;
using CurveView = std::span<const double>;

class CurveSet {
 public:
  CurveSet() = default;

  CurveSet(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    const std::size_t g = grid_.size();
    if (g == 0) throw std::invalid_argument("curve set needs a non-empty grid");
    if (values_.empty() || values_.size() % g != 0)
      throw std::invalid_argument("curve set values are not a whole number of rows");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw std::invalid_argument("curve " + std::to_string(i / g) + " has a non-finite value at grid point " +
                                    std::to_string(i % g));
    }
  }

  static CurveSet from_rows(Grid grid, const std::vector<Curve>& rows) {
    std::vector<double> flat;
    flat.reserve(rows.size() * grid.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != grid.size())
        throw std::invalid_argument("curve " + std::to_string(r) + " length does not match the grid");
      flat.insert(flat.end(), rows[r].begin(), rows[r].end());
    }
    return CurveSet(std::move(grid), std::move(flat));
  }

  std::size_t size() const noexcept { return grid_.size() == 0 ? 0 : values_.size() / grid_.size(); }
  std::size_t grid_size() const noexcept { return grid_.size(); }
  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }

  CurveView row(Index i) const { return CurveView(values_).subspan(i * grid_.size(), grid_.size()); }
  double at(Index i, std::size_t t) const { return values_[i * grid_.size() + t]; }

  /// New set holding the selected rows, in the given order.
  CurveSet subset(std::span<const Index> rows) const {
    std::vector<double> flat;
    flat.reserve(rows.size() * grid_size());
    for (Index r : rows) {
      auto v = row(r);
      flat.insert(flat.end(), v.begin(), v.end());
    }
    return CurveSet(grid_, std::move(flat));
  }

  friend bool operator==(const CurveSet&, const CurveSet&) = default;

 private:
  Grid grid_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Stream ids so that independent random quantities never share a sequence.
namespace streams {
inline constexpr std::uint64_t mass_sample = 1;   // P_n
inline constexpr std::uint64_t probe_sample = 2;  // P_m
inline constexpr std::uint64_t projections = 3;
inline constexpr std::uint64_t bernoulli = 4;
inline constexpr std::uint64_t noise = 5;
inline constexpr std::uint64_t phantom = 6;
}  // namespace streams

/// splitmix64 finalizer; used to derive child seeds such as (seed, replicate).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) noexcept {
  return mix64(mix64(seed) ^ (a * 0xd6e8feb86659fd93ULL + 0x5851f42d4c957f2dULL));
}
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return derive_seed(derive_seed(seed, a), b);
}

/// A reproducible random sequence keyed by (seed, stream_id).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    const std::uint64_t key = derive_seed(seed, stream_id);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::mt19937_64& engine() noexcept { return engine_; }

  /// Uniform integer in [0, bound].
  std::uint64_t below_or_equal(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound)(engine_);
  }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

struct SubsampleSpec {
  std::size_t n = 1;  // size of the mass sample P_n
  std::size_t m = 1;  // size of the probe sample P_m
  std::uint64_t seed = 0;

  void validate(std::size_t set_size) const {
    if (n < 1 || n > set_size || m < 1 || m > set_size)
      throw std::invalid_argument("subsample sizes must satisfy 1 <= n, m <= N (N = " +
                                  std::to_string(set_size) + ", n = " + std::to_string(n) +
                                  ", m = " + std::to_string(m) + ")");
  }
};

/// `count` distinct indices from [0, population), uniformly without
/// replacement (Floyd's algorithm). Order is the draw order.
inline IndexList draw_subsample(std::size_t population, std::size_t count, RngStream& stream) {
  if (count > population)
    throw std::invalid_argument("cannot draw " + std::to_string(count) + " distinct indices from " +
                                std::to_string(population));
  IndexList out;
  out.reserve(count);
  std::vector<char> taken(population, 0);
  for (std::size_t j = population - count; j < population; ++j) {
    auto t = static_cast<Index>(stream.below_or_equal(j));
    if (taken[t]) t = j;
    taken[t] = 1;
    out.push_back(t);
  }
  return out;
}

inline IndexList draw_subsample(const CurveSet& set, std::size_t count, RngStream stream) {
  return draw_subsample(set.size(), count, stream);
}

}  // namespace rdepth
