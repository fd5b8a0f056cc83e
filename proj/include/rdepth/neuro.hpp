#pragma once

// 4D (x, y, z, t) fields: binary I/O, masks, voxel curves, the depth image,
// V_T correlation, test-retest scoring and representative-subject selection.
//
// Voxel v = x + X * (y + Y * z); sample (v, t) lives at v + X*Y*Z * t.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rdepth/csv.hpp"
#include "rdepth/depths.hpp"
#include "rdepth/fdata.hpp"
#include "rdepth/metrics.hpp"
#include "rdepth/parallel.hpp"
#include "rdepth/stats.hpp"
#include "rdepth/symmetry.hpp"

namespace rdepth {

using Dims3 = std::array<std::uint32_t, 3>;
using Dims4 = std::array<std::uint32_t, 4>;

inline std::size_t voxel_count(const Dims3& d) {
  return static_cast<std::size_t>(d[0]) * d[1] * d[2];
}

inline std::size_t voxel_index(const Dims3& d, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  return x + static_cast<std::size_t>(d[0]) * (y + static_cast<std::size_t>(d[1]) * z);
}

inline std::array<std::uint32_t, 3> voxel_coords(const Dims3& d, std::size_t v) {
  const auto x = static_cast<std::uint32_t>(v % d[0]);
  v /= d[0];
  const auto y = static_cast<std::uint32_t>(v % d[1]);
  return {x, y, static_cast<std::uint32_t>(v / d[1])};
}

struct Field4D {
  Dims4 dims{};  // X, Y, Z, T
  Grid time_grid;
  std::vector<float> values;  // x fastest, t slowest
  std::string subject_id;
  std::optional<double> input_integral;

  Dims3 spatial() const noexcept { return {dims[0], dims[1], dims[2]}; }
  std::size_t voxels() const noexcept { return voxel_count(spatial()); }
  std::size_t frames() const noexcept { return dims[3]; }
  float at(std::size_t voxel, std::size_t t) const { return values[voxel + voxels() * t]; }

  void validate() const {
    for (auto d : dims)
      if (d == 0) throw std::invalid_argument("field dimensions must be positive");
    if (time_grid.size() != dims[3]) throw std::invalid_argument("time grid length differs from T");
    if (values.size() != voxels() * frames()) throw std::invalid_argument("field value count differs from X*Y*Z*T");
    if (input_integral && !(*input_integral > 0.0 && std::isfinite(*input_integral)))
      throw std::invalid_argument("input integral must be a positive finite number");
  }
};

// ---------------------------------------------------------------------------
// Little-endian byte I/O
// ---------------------------------------------------------------------------

namespace detail {

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <class U>
  U get_le(const char* field) {
    need(sizeof(U), field);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  double get_f64(const char* field) { return std::bit_cast<double>(get_le<std::uint64_t>(field)); }
  float get_f32(const char* field) { return std::bit_cast<float>(get_le<std::uint32_t>(field)); }
  std::string get_raw(std::size_t n, const char* field) {
    need(n, field);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  void need(std::size_t n, const char* field) const {
    if (remaining() < n)
      throw ParseError(what_ + ": truncated payload (" + field + " needs " + std::to_string(n) + " bytes, " +
                       std::to_string(remaining()) + " left)");
  }

 private:
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Product of dims, rejecting zero and anything past `limit`.
template <std::size_t K>
std::size_t checked_product(const std::array<std::uint32_t, K>& dims, std::size_t limit, const std::string& what) {
  std::size_t p = 1;
  for (auto d : dims) {
    if (d == 0) throw ParseError(what + ": zero dimension");
    if (p > limit / d) throw ParseError(what + ": dimension overflow");
    p *= d;
  }
  return p;
}

}  // namespace detail

inline constexpr char field_magic[4] = {'F', 'D', '4', 'D'};
inline constexpr char mask_magic[4] = {'F', 'D', 'M', 'K'};
inline constexpr std::uint16_t field_format_version = 1;

inline std::string encode_field4d(const Field4D& f) {
  f.validate();
  std::string out(field_magic, 4);
  detail::put_le(out, field_format_version);
  for (auto d : f.dims) detail::put_le(out, d);
  for (double t : f.time_grid.points()) detail::put_le(out, std::bit_cast<std::uint64_t>(t));
  out.reserve(out.size() + 4 * f.values.size() + 9);
  for (float v : f.values) detail::put_le(out, std::bit_cast<std::uint32_t>(v));
  if (f.input_integral) {
    out.push_back('\x01');
    detail::put_le(out, std::bit_cast<std::uint64_t>(*f.input_integral));
  }
  return out;
}

inline Field4D decode_field4d(const std::string& bytes, const std::string& what = "field") {
  detail::ByteReader r(bytes, what);
  if (r.get_raw(4, "magic") != std::string(field_magic, 4)) throw ParseError(what + ": bad magic (expected FD4D)");
  const auto version = r.get_le<std::uint16_t>("version");
  if (version != field_format_version) throw ParseError(what + ": unsupported version " + std::to_string(version));
  Field4D f;
  for (auto& d : f.dims) d = r.get_le<std::uint32_t>("dims");
  const std::size_t count = detail::checked_product(f.dims, std::numeric_limits<std::size_t>::max() / 4, what);
  std::vector<double> times(f.dims[3]);
  r.need(8 * times.size(), "time grid");
  for (auto& t : times) t = r.get_f64("time grid");
  try {
    f.time_grid = Grid(std::move(times));
  } catch (const std::invalid_argument& e) {
    throw ParseError(what + ": " + e.what());
  }
  if (r.remaining() / 4 < count) throw ParseError(what + ": truncated payload (declared dims exceed the data)");
  f.values.resize(count);
  for (auto& v : f.values) v = r.get_f32("values");
  if (r.remaining() > 0) {
    const auto flag = r.get_le<std::uint8_t>("trailer flag");
    if (flag != 1) throw ParseError(what + ": unknown trailer flag");
    f.input_integral = r.get_f64("input integral");
    if (r.remaining() > 0) throw ParseError(what + ": trailing bytes after trailer");
  }
  return f;
}

inline Field4D read_field4d(const std::string& path) {
  auto f = decode_field4d(detail::slurp(path), path);
  return f;
}

inline void write_field4d(const Field4D& f, const std::string& path) { detail::spit(path, encode_field4d(f)); }

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

struct Mask {
  Dims3 dims{};
  std::vector<std::uint8_t> flags;
  double threshold_used = 0.0;

  std::size_t count() const { return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1)); }
};

/// Flags voxel v iff the sum over frames exceeds `threshold`.
inline Mask mask_threshold(const Field4D& f, double threshold) {
  f.validate();
  Mask m;
  m.dims = f.spatial();
  m.threshold_used = threshold;
  m.flags.assign(f.voxels(), 0);
  for (std::size_t v = 0; v < f.voxels(); ++v) {
    double s = 0.0;
    for (std::size_t t = 0; t < f.frames(); ++t) s += f.at(v, t);
    m.flags[v] = s > threshold ? 1 : 0;
  }
  return m;
}

inline std::string encode_mask(const Mask& m) {
  if (m.flags.size() != voxel_count(m.dims)) throw std::invalid_argument("mask flag count differs from X*Y*Z");
  std::string out(mask_magic, 4);
  for (auto d : m.dims) detail::put_le(out, d);
  for (auto b : m.flags) out.push_back(b ? '\x01' : '\x00');
  return out;
}

inline Mask decode_mask(const std::string& bytes, const std::string& what = "mask") {
  detail::ByteReader r(bytes, what);
  if (r.get_raw(4, "magic") != std::string(mask_magic, 4)) throw ParseError(what + ": bad magic (expected FDMK)");
  Mask m;
  for (auto& d : m.dims) d = r.get_le<std::uint32_t>("dims");
  const std::size_t count = detail::checked_product(m.dims, std::numeric_limits<std::size_t>::max(), what);
  if (r.remaining() < count) throw ParseError(what + ": truncated payload (declared dims exceed the data)");
  m.flags.resize(count);
  for (auto& b : m.flags) {
    b = r.get_le<std::uint8_t>("flags");
    if (b > 1) throw ParseError(what + ": mask bytes must be 0 or 1");
  }
  if (r.remaining() > 0) throw ParseError(what + ": trailing bytes");
  return m;
}

inline Mask read_mask(const std::string& path) { return decode_mask(detail::slurp(path), path); }
inline void write_mask(const Mask& m, const std::string& path) { detail::spit(path, encode_mask(m)); }

// ---------------------------------------------------------------------------
// Voxel curves
// ---------------------------------------------------------------------------

struct VoxelCurves {
  CurveSet curves;
  std::vector<std::size_t> voxels;  // row r is voxel voxels[r]; ascending
};

inline void require_mask_dims(const Field4D& f, const Mask& m) {
  if (m.dims != f.spatial() || m.flags.size() != f.voxels())
    throw IncompatibleGridError("mask dimensions do not match the field");
}

inline VoxelCurves extract_voxel_curves(const Field4D& f, const Mask& m) {
  f.validate();
  require_mask_dims(f, m);
  VoxelCurves out;
  for (std::size_t v = 0; v < f.voxels(); ++v)
    if (m.flags[v]) out.voxels.push_back(v);
  if (out.voxels.empty()) throw std::invalid_argument("mask selects no voxels");
  std::vector<double> flat;
  flat.reserve(out.voxels.size() * f.frames());
  for (std::size_t v : out.voxels)
    for (std::size_t t = 0; t < f.frames(); ++t) flat.push_back(f.at(v, t));
  out.curves = CurveSet(f.time_grid, std::move(flat));
  return out;
}

// ---------------------------------------------------------------------------
// Depth image
// ---------------------------------------------------------------------------

struct DepthImage {
  Dims3 dims{};
  std::vector<double> values;
  std::size_t deepest_voxel = 0;
  std::map<std::string, std::string> parameters;
};

/// Time-integral of each row with the grid's cell widths.
inline std::vector<double> row_integrals(const CurveSet& set) {
  const auto w = cell_widths(set.grid());
  std::vector<double> out(set.size());
  for (std::size_t r = 0; r < set.size(); ++r) out[r] = intensity(set.row(r), w).integral;
  return out;
}

/// Random depth of every masked voxel curve, with voxels whose time-integral
/// falls strictly below the deepest curve's set to 0.
inline DepthImage depth_image(const Field4D& f, const Mask& m, MetricKind kind, const SubsampleSpec& spec,
                              const CenterOptions& options = {}) {
  auto vc = extract_voxel_curves(f, m);
  if (vc.curves.size() < 2) throw std::invalid_argument("depth image needs at least two masked voxels");
  const CurveMetric metric(kind, vc.curves.grid());
  DepthParams params;
  params.center = random_center(vc.curves, metric, spec, options);
  const auto depth = random_depth(vc.curves, metric, params);
  const auto integral = row_integrals(vc.curves);
  const double floor = integral[depth.deepest_index];

  DepthImage img;
  img.dims = f.spatial();
  img.values.assign(f.voxels(), 0.0);
  for (std::size_t r = 0; r < vc.voxels.size(); ++r)
    img.values[vc.voxels[r]] = integral[r] < floor ? 0.0 : depth.values[r];
  img.deepest_voxel = vc.voxels[depth.deepest_index];
  img.parameters = depth.parameters;
  img.parameters["selected_voxel"] = std::to_string(vc.voxels[params.center.selected]);
  img.parameters["masked_voxels"] = std::to_string(vc.voxels.size());
  return img;
}

/// CSV x,y,z,value over every voxel in x-fastest order.
inline void write_depth_image_csv(const DepthImage& img, std::ostream& out) {
  out << "x,y,z,value\n";
  for (std::size_t v = 0; v < img.values.size(); ++v) {
    auto c = voxel_coords(img.dims, v);
    out << c[0] << ',' << c[1] << ',' << c[2] << ',' << format_double(img.values[v]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Voxel value maps (V_T and depth images read back from CSV)
// ---------------------------------------------------------------------------

struct VoxelValue {
  std::uint32_t x, y, z;
  double value;
};

using VtMap = std::vector<VoxelValue>;

/// Reads x,y,z,value rows; a header line starting with a letter is skipped.
inline VtMap parse_voxel_csv(std::istream& in, const std::string& what = "voxel csv") {
  VtMap out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    auto t = trim(line);
    if (t.empty()) continue;
    if (row == 1 && std::isalpha(static_cast<unsigned char>(t.front()))) continue;
    auto cells = split_commas(t);
    if (cells.size() != 4) throw ParseError(what + ": row " + std::to_string(row) + " needs 4 columns x,y,z,value");
    double n[4];
    for (int c = 0; c < 4; ++c)
      if (!parse_double(cells[c], n[c]) || !std::isfinite(n[c]))
        throw ParseError(what + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                         " is not a finite number");
    for (int c = 0; c < 3; ++c)
      if (n[c] < 0 || n[c] != std::floor(n[c]) || n[c] > 4294967295.0)
        throw ParseError(what + ": row " + std::to_string(row) + " has a non-integer coordinate");
    out.push_back({static_cast<std::uint32_t>(n[0]), static_cast<std::uint32_t>(n[1]),
                   static_cast<std::uint32_t>(n[2]), n[3]});
  }
  return out;
}

inline VtMap read_voxel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_voxel_csv(in, path);
}

inline void write_voxel_csv(const VtMap& vt, std::ostream& out) {
  out << "x,y,z,value\n";
  for (const auto& e : vt) out << e.x << ',' << e.y << ',' << e.z << ',' << format_double(e.value) << '\n';
}

/// Depth image from a full-volume voxel CSV; dims are one past the largest coordinates.
inline DepthImage depth_image_from_voxels(const VtMap& cells) {
  if (cells.empty()) throw ParseError("depth image csv has no rows");
  DepthImage img;
  for (const auto& e : cells) {
    img.dims[0] = std::max(img.dims[0], e.x + 1);
    img.dims[1] = std::max(img.dims[1], e.y + 1);
    img.dims[2] = std::max(img.dims[2], e.z + 1);
  }
  img.values.assign(voxel_count(img.dims), 0.0);
  for (const auto& e : cells) img.values[voxel_index(img.dims, e.x, e.y, e.z)] = e.value;
  img.deepest_voxel = argmax_lowest(img.values);
  return img;
}

// ---------------------------------------------------------------------------
// Correlations on top-p% voxels
// ---------------------------------------------------------------------------

/// ceil(p% of the strictly positive entries), largest first, ties by position.
inline std::vector<std::size_t> top_positive(std::span<const double> values, double p) {
  if (!(p > 0.0 && p < 100.0)) throw std::invalid_argument("percentage p must lie in (0, 100)");
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > 0.0) pos.push_back(i);
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  const auto keep = static_cast<std::size_t>(std::ceil(static_cast<double>(pos.size()) * p / 100.0 - 1e-9));
  pos.resize(std::min(keep, pos.size()));
  return pos;
}

enum class CorrelationKind { pearson, spearman };

inline double correlate(std::span<const double> a, std::span<const double> b, CorrelationKind kind) {
  return kind == CorrelationKind::pearson ? pearson(a, b) : spearman(a, b);
}

/// |corr(image, V_T)| over the voxels holding the top p% of positive V_T values.
inline double topp_correlation(const DepthImage& img, const VtMap& vt, double p,
                               CorrelationKind kind = CorrelationKind::pearson) {
  std::vector<double> vt_values;
  std::vector<double> img_values;
  vt_values.reserve(vt.size());
  img_values.reserve(vt.size());
  for (const auto& e : vt) {
    if (e.x >= img.dims[0] || e.y >= img.dims[1] || e.z >= img.dims[2])
      throw IncompatibleGridError("V_T voxel outside the depth image");
    vt_values.push_back(e.value);
    img_values.push_back(img.values[voxel_index(img.dims, e.x, e.y, e.z)]);
  }
  auto sel = top_positive(vt_values, p);
  if (sel.size() < 2) throw UndefinedCorrelation("fewer than two voxels selected");
  std::vector<double> a, b;
  for (auto i : sel) {
    a.push_back(img_values[i]);
    b.push_back(vt_values[i]);
  }
  return std::abs(correlate(a, b, kind));
}

// ---------------------------------------------------------------------------
// Test-retest
// ---------------------------------------------------------------------------

struct ScanImage {
  std::string subject;
  std::string scan;
  DepthImage image;
};

struct TestRetestRow {
  std::string subject;
  std::string scan;
  double p = 0.0;
  std::optional<double> c_same;
  std::optional<double> m_other;
  std::optional<double> f;
};

struct TestRetestReport {
  std::vector<TestRetestRow> rows;
};

/// Correlation of a and b over the top-p% voxels of `by`, or nothing when undefined.
inline std::optional<double> corr_on_top(const DepthImage& a, const DepthImage& b, const DepthImage& by, double p,
                                         CorrelationKind kind) {
  auto sel = top_positive(by.values, p);
  if (sel.size() < 2) return std::nullopt;
  std::vector<double> va, vb;
  for (auto i : sel) {
    va.push_back(a.values[i]);
    vb.push_back(b.values[i]);
  }
  try {
    return correlate(va, vb, kind);
  } catch (const UndefinedCorrelation&) {
    return std::nullopt;
  }
}

/// Mean of the two directed correlations (selection on a, then on b).
inline std::optional<double> symmetric_corr(const DepthImage& a, const DepthImage& b, double p, CorrelationKind kind) {
  auto ab = corr_on_top(a, b, a, p, kind);
  auto ba = corr_on_top(a, b, b, p, kind);
  if (!ab || !ba) return std::nullopt;
  return 0.5 * (*ab + *ba);
}

/// For each scan s and each p: c = symmetric correlation with the other scan
/// of the same subject, m = mean symmetric correlation with every scan of
/// the other subjects, f = (c - m) / c. Undefined correlations in m are
/// skipped; f is missing when c is undefined or zero.
inline TestRetestReport test_retest(const std::vector<ScanImage>& images, const std::vector<double>& p_grid,
                                    CorrelationKind kind = CorrelationKind::pearson) {
  std::vector<std::string> subjects;
  std::map<std::string, std::vector<std::size_t>> scans;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!scans.count(images[i].subject)) subjects.push_back(images[i].subject);
    scans[images[i].subject].push_back(i);
  }
  if (subjects.size() < 2) throw std::invalid_argument("test-retest needs at least two subjects");
  for (const auto& s : subjects)
    if (scans[s].size() != 2) throw std::invalid_argument("subject '" + s + "' must have exactly two scans");
  for (const auto& im : images)
    if (im.image.dims != images[0].image.dims) throw IncompatibleGridError("depth images differ in dimensions");

  TestRetestReport report;
  for (const auto& s : subjects) {
    for (int k = 0; k < 2; ++k) {
      const auto& self = images[scans[s][k]];
      const auto& partner = images[scans[s][1 - k]];
      for (double p : p_grid) {
        TestRetestRow row{self.subject, self.scan, p, {}, {}, {}};
        row.c_same = symmetric_corr(self.image, partner.image, p, kind);
        double sum = 0.0;
        std::size_t used = 0;
        for (const auto& o : subjects) {
          if (o == s) continue;
          for (auto j : scans[o]) {
            if (auto c = symmetric_corr(self.image, images[j].image, p, kind)) {
              sum += *c;
              ++used;
            }
          }
        }
        if (used) row.m_other = sum / static_cast<double>(used);
        if (row.c_same && row.m_other && *row.c_same != 0.0) row.f = (*row.c_same - *row.m_other) / *row.c_same;
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

inline void write_test_retest_csv(const TestRetestReport& r, std::ostream& out) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "subject,scan,p,c_same,m_other,f\n";
  for (const auto& row : r.rows)
    out << row.subject << ',' << row.scan << ',' << format_double(row.p) << ',' << opt(row.c_same) << ','
        << opt(row.m_other) << ',' << opt(row.f) << '\n';
}

// ---------------------------------------------------------------------------
// Representative subject
// ---------------------------------------------------------------------------

struct RepresentativeResult {
  std::vector<double> i_values;
  std::vector<std::size_t> ordering;  // ascending i-value, ties by index
  std::size_t selected = 0;           // lower median
  std::vector<double> depth;          // hyperbolic metric depth, center = selected
};

/// Median selection and hyperbolic metric depth from the intensities alone.
/// With Theta = {median} and vartheta = the field farthest from it, the depth
/// of j is 1 / (1 + |i_j - i_med| / max_k |i_k - i_med|); all ones when every
/// i-value coincides.
inline RepresentativeResult representative_from_intensities(std::vector<double> i_values) {
  if (i_values.empty()) throw std::invalid_argument("representative subject needs at least one field");
  RepresentativeResult r;
  r.i_values = std::move(i_values);
  r.ordering = all_indices(r.i_values.size());
  std::stable_sort(r.ordering.begin(), r.ordering.end(),
                   [&](std::size_t a, std::size_t b) { return r.i_values[a] < r.i_values[b]; });
  r.selected = r.ordering[(r.ordering.size() - 1) / 2];
  const double med = r.i_values[r.selected];
  double scale = 0.0;
  for (double v : r.i_values) scale = std::max(scale, std::abs(v - med));
  r.depth.resize(r.i_values.size());
  for (std::size_t j = 0; j < r.depth.size(); ++j)
    r.depth[j] = scale > 0.0 ? 1.0 / (1.0 + std::abs(r.i_values[j] - med) / scale) : 1.0;
  return r;
}

/// 4D intensity of a field after masking and input normalization. Each voxel
/// counts as a unit spatial cell; time cells use the frame cell widths.
inline IntensitySummary field_intensity(const Field4D& f, const Mask& m) {
  f.validate();
  require_mask_dims(f, m);
  if (!f.input_integral) throw ConfigError("field '" + f.subject_id + "' has no input integral");
  const auto w = cell_widths(f.time_grid);
  IntensitySummary s;
  for (std::size_t t = 0; t < f.frames(); ++t) {
    for (std::size_t v = 0; v < f.voxels(); ++v) {
      if (!m.flags[v]) continue;
      const double x = static_cast<double>(f.at(v, t)) / *f.input_integral;
      s.integral += x * w[t];
      if (x != 0.0) s.support_measure += w[t];
    }
  }
  s.i_value = s.support_measure > 0.0 ? s.integral / s.support_measure : 0.0;
  return s;
}

inline RepresentativeResult representative_subject(const std::vector<Field4D>& fields, const std::vector<Mask>& masks) {
  if (fields.empty()) throw std::invalid_argument("representative subject needs at least one field");
  if (fields.size() != masks.size()) throw std::invalid_argument("one mask per field is required");
  for (const auto& f : fields)
    if (!f.input_integral) throw ConfigError("field '" + f.subject_id + "' has no input integral");
  std::vector<double> iv(fields.size());
  parallel_for(fields.size(), [&](std::size_t j) { iv[j] = field_intensity(fields[j], masks[j]).i_value; });
  return representative_from_intensities(std::move(iv));
}

// ---------------------------------------------------------------------------
// Synthetic phantoms
// ---------------------------------------------------------------------------

enum class PhantomScenario { phantom_brain, planted_retest };

inline PhantomScenario parse_scenario(std::string_view s) {
  if (s == "phantom_brain") return PhantomScenario::phantom_brain;
  if (s == "planted_retest") return PhantomScenario::planted_retest;
  throw ConfigError("unknown scenario '" + std::string(s) + "' (expected phantom_brain or planted_retest)");
}

struct PhantomLayout {
  static constexpr double inside_total = 30000.0;
  static constexpr double outside_total = 100.0;
  static constexpr double threshold = 20000.0;
  static constexpr double retest_noise = 2e-4;
  static constexpr double retest_gain_sd = 0.05;
};

/// Ellipsoid centered in the volume with semi-axes 0.4 of each extent.
inline bool inside_phantom(const Dims3& d, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  double r = 0.0;
  const std::uint32_t p[3] = {x, y, z};
  for (int k = 0; k < 3; ++k) {
    const double c = 0.5 * (d[k] - 1.0);
    const double a = std::max(0.4 * d[k], 0.5);
    const double u = (p[k] - c) / a;
    r += u * u;
  }
  return r <= 1.0;
}

/// Deterministic 4D phantom. Inside the ellipsoid each voxel carries a
/// decaying time curve whose frame sum is 30000 * (1 + 0.3 s) with s in
/// [0, 1]; outside voxels sum to 100. For planted_retest the per-voxel
/// (s, decay) pattern depends on (seed, subject) only; each scan gets a
/// global gain (sd 5%) and tiny per-voxel jitter keyed by (seed, subject, scan).
/// Per-voxel noise much above 1e-4 reshuffles the top of the depth image,
/// since the deepest voxels sit right at the suppression cut.
inline Field4D synth_field4d(const Dims4& shape, PhantomScenario scenario, std::uint64_t seed,
                             std::uint64_t subject = 0, std::uint64_t scan = 0) {
  Field4D f;
  f.dims = shape;
  for (auto d : shape)
    if (d == 0) throw std::invalid_argument("phantom dimensions must be positive");
  const std::size_t T = shape[3];
  std::vector<double> times(T);
  for (std::size_t t = 0; t < T; ++t) times[t] = static_cast<double>(t) + 0.5;
  f.time_grid = Grid(std::move(times));
  f.subject_id = "s" + std::to_string(subject) + "-" + std::to_string(scan);
  f.input_integral = 1000.0 * (1.0 + 0.1 * static_cast<double>(subject));

  const Dims3 sp = f.spatial();
  const std::size_t V = f.voxels();
  f.values.assign(V * T, 0.0f);
  const bool retest = scenario == PhantomScenario::planted_retest;
  RngStream pattern(retest ? derive_seed(seed, subject) : seed, streams::phantom);
  RngStream noise(derive_seed(seed, subject, scan), streams::noise);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double gain = retest ? std::max(0.8, 1.0 + PhantomLayout::retest_gain_sd * noise.normal(0.0, 1.0)) : 1.0;

  std::vector<double> shape_t(T);
  for (std::size_t v = 0; v < V; ++v) {
    auto c = voxel_coords(sp, v);
    if (!inside_phantom(sp, c[0], c[1], c[2])) {
      for (std::size_t t = 0; t < T; ++t)
        f.values[v + V * t] = static_cast<float>(PhantomLayout::outside_total / static_cast<double>(T));
      continue;
    }
    const double s = unit(pattern.engine());
    const double decay = 0.5 + unit(pattern.engine());
    double amplitude = PhantomLayout::inside_total * (1.0 + 0.3 * s);
    if (retest) amplitude *= gain * std::max(0.9, 1.0 + PhantomLayout::retest_noise * noise.normal(0.0, 1.0));
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      shape_t[t] = std::exp(-decay * static_cast<double>(t) / static_cast<double>(T));
      total += shape_t[t];
    }
    for (std::size_t t = 0; t < T; ++t) f.values[v + V * t] = static_cast<float>(amplitude * shape_t[t] / total);
  }
  return f;
}

}  // namespace rdepth
