#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <sstream>

#include "rdepth/neuro.hpp"

using namespace rdepth;
using Catch::Approx;

namespace {

Field4D small_field(Dims4 dims, std::uint64_t seed) {
  Field4D f;
  f.dims = dims;
  std::vector<double> t(dims[3]);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 + static_cast<double>(i);
  f.time_grid = Grid(t);
  f.values.resize(voxel_count(f.spatial()) * dims[3]);
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<float> u(0.0f, 10.0f);
  for (auto& v : f.values) v = u(eng);
  f.subject_id = "toy";
  return f;
}

DepthImage image_of(Dims3 d, std::vector<double> v) {
  DepthImage img;
  img.dims = d;
  img.values = std::move(v);
  return img;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("rdepth_test_" + name)).string();
}

}  // namespace

TEST_CASE("voxel indexing is x fastest") {
  Dims3 d{3, 4, 5};
  CHECK(voxel_count(d) == 60);
  CHECK(voxel_index(d, 1, 0, 0) == 1);
  CHECK(voxel_index(d, 0, 1, 0) == 3);
  CHECK(voxel_index(d, 0, 0, 1) == 12);
  for (std::size_t v = 0; v < 60; ++v) {
    auto c = voxel_coords(d, v);
    CHECK(voxel_index(d, c[0], c[1], c[2]) == v);
  }
}

TEST_CASE("field validation") {
  auto f = small_field({2, 2, 1, 3}, 1);
  CHECK_NOTHROW(f.validate());
  f.values.pop_back();
  CHECK_THROWS_AS(f.validate(), std::invalid_argument);
  f = small_field({2, 2, 1, 3}, 1);
  f.input_integral = -1.0;
  CHECK_THROWS_AS(f.validate(), std::invalid_argument);
}

TEST_CASE("field binary round trip") {
  auto f = small_field({3, 2, 2, 4}, 2);
  SECTION("without input integral") {
    auto back = decode_field4d(encode_field4d(f));
    CHECK(back.dims == f.dims);
    CHECK(back.time_grid == f.time_grid);
    CHECK(back.values == f.values);
    CHECK_FALSE(back.input_integral.has_value());
  }
  SECTION("with input integral, through a file") {
    f.input_integral = 1234.5;
    const auto path = temp_path("rt.fd4d");
    write_field4d(f, path);
    auto back = read_field4d(path);
    std::filesystem::remove(path);
    CHECK(back.values == f.values);
    REQUIRE(back.input_integral.has_value());
    CHECK(*back.input_integral == 1234.5);
  }
}

TEST_CASE("field decoding errors") {
  auto f = small_field({2, 2, 2, 2}, 3);
  const auto good = encode_field4d(f);
  auto expect_error = [](const std::string& bytes, const std::string& needle) {
    try {
      decode_field4d(bytes);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error("XXXX" + good.substr(4), "bad magic");
  expect_error(good.substr(0, good.size() - 3), "truncated");
  expect_error(good.substr(0, 2), "truncated");
  expect_error(good + "\x07", "trailer");
  expect_error(good + "\x01\x02", "truncated");
  CHECK_THROWS_AS(read_field4d(temp_path("does_not_exist")), std::runtime_error);
}

TEST_CASE("mask threshold and round trip") {
  Field4D f;
  f.dims = {2, 1, 1, 2};
  f.time_grid = Grid({0.5, 1.5});
  f.values = {10, 1, 10, 1};  // voxel 0 sums to 20, voxel 1 to 2
  auto m = mask_threshold(f, 5.0);
  CHECK(m.flags == std::vector<std::uint8_t>{1, 0});
  CHECK(m.count() == 1);
  CHECK(mask_threshold(f, 20.0).count() == 0);  // strict
  auto back = decode_mask(encode_mask(m));
  CHECK(back.dims == m.dims);
  CHECK(back.flags == m.flags);
  auto bytes = encode_mask(m);
  bytes.back() = '\x02';
  CHECK_THROWS_AS(decode_mask(bytes), ParseError);
  CHECK_THROWS_AS(decode_mask("FDMK"), ParseError);
  CHECK_THROWS_AS(decode_mask(encode_mask(m) + "x"), ParseError);
  CHECK_THROWS_AS(decode_mask(encode_field4d(f)), ParseError);
}

TEST_CASE("voxel curve extraction") {
  auto f = small_field({2, 2, 1, 3}, 4);
  Mask m{{2, 2, 1}, {0, 1, 0, 1}, 0};
  auto vc = extract_voxel_curves(f, m);
  CHECK(vc.voxels == std::vector<std::size_t>{1, 3});
  CHECK(vc.curves.at(1, 2) == f.at(3, 2));
  Mask none{{2, 2, 1}, {0, 0, 0, 0}, 0};
  CHECK_THROWS_AS(extract_voxel_curves(f, none), std::invalid_argument);
  Mask wrong{{4, 1, 1}, {1, 1, 1, 1}, 0};
  CHECK_THROWS_AS(extract_voxel_curves(f, wrong), IncompatibleGridError);
}

TEST_CASE("depth image") {
  auto f = synth_field4d({8, 8, 6, 6}, PhantomScenario::phantom_brain, 3);
  auto m = mask_threshold(f, PhantomLayout::threshold);
  REQUIRE(m.count() > 10);
  auto img = depth_image(f, m, MetricKind::grid_l2_unweighted, {m.count(), m.count(), 1});
  auto vc = extract_voxel_curves(f, m);
  auto integral = row_integrals(vc.curves);
  const auto deep_row =
      static_cast<std::size_t>(std::find(vc.voxels.begin(), vc.voxels.end(), img.deepest_voxel) - vc.voxels.begin());
  REQUIRE(deep_row < vc.voxels.size());
  for (std::size_t v = 0; v < img.values.size(); ++v) {
    CHECK(img.values[v] >= 0.0);
    CHECK(img.values[v] <= 1.0);
    if (!m.flags[v]) CHECK(img.values[v] == 0.0);
  }
  for (std::size_t r = 0; r < vc.voxels.size(); ++r) {
    if (integral[r] < integral[deep_row])
      CHECK(img.values[vc.voxels[r]] == 0.0);
    else
      CHECK(img.values[vc.voxels[r]] > 0.0);
  }
  CHECK(img.values[img.deepest_voxel] == 1.0);
  CHECK(img.parameters.at("masked_voxels") == std::to_string(m.count()));

  Mask one(m);
  std::fill(one.flags.begin(), one.flags.end(), 0);
  one.flags[img.deepest_voxel] = 1;
  CHECK_THROWS_AS(depth_image(f, one, MetricKind::grid_l2_unweighted, {1, 1, 1}), std::invalid_argument);
}

TEST_CASE("depth image csv round trip") {
  auto img = image_of({2, 2, 1}, {0.0, 0.5, 1.0, 0.25});
  std::stringstream io;
  write_depth_image_csv(img, io);
  auto back = depth_image_from_voxels(parse_voxel_csv(io));
  CHECK(back.dims == img.dims);
  CHECK(back.values == img.values);
  CHECK(back.deepest_voxel == 2);
}

TEST_CASE("voxel csv parsing") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_voxel_csv(in);
  };
  auto vt = parse("x,y,z,value\n0,0,0,1.5\n1,2,3,-2\n");
  REQUIRE(vt.size() == 2);
  CHECK(vt[1].z == 3);
  CHECK(vt[1].value == -2);
  CHECK(parse("0,0,0,1\n").size() == 1);
  CHECK_THROWS_AS(parse("0,0,1\n"), ParseError);
  CHECK_THROWS_AS(parse("0.5,0,0,1\n"), ParseError);
  CHECK_THROWS_AS(parse("-1,0,0,1\n"), ParseError);
  CHECK_THROWS_AS(parse("0,0,0,nan\n"), ParseError);
  CHECK_THROWS_AS(depth_image_from_voxels({}), ParseError);
  VtMap m{{1, 0, 0, 2.5}, {0, 1, 0, 3}};
  std::stringstream io;
  write_voxel_csv(m, io);
  auto back = parse_voxel_csv(io);
  CHECK(back.size() == 2);
  CHECK(back[0].value == 2.5);
}

TEST_CASE("top positive selection") {
  std::vector<double> v{5, -1, 0, 3, 3, 9, 1, 2, 7, 4, 6};
  // 9 positives; ceil(9 * 0.5) = 5
  CHECK(top_positive(v, 50) == std::vector<std::size_t>{5, 8, 10, 0, 9});
  CHECK(top_positive(v, 10).size() == 1);
  CHECK(top_positive(v, 99).size() == 9);
  std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(top_positive(ten, 30).size() == 3);  // exact multiple stays put
  CHECK(top_positive(ten, 90).size() == 9);
  CHECK_THROWS(top_positive(v, 0));
  CHECK_THROWS(top_positive(v, 100));
}

TEST_CASE("top-p correlation with V_T") {
  Dims3 d{4, 1, 1};
  auto img = image_of(d, {0.1, 0.2, 0.3, 0.4});
  VtMap vt{{0, 0, 0, 1}, {1, 0, 0, 2}, {2, 0, 0, 3}, {3, 0, 0, 4}};
  CHECK(topp_correlation(img, vt, 50) == Approx(1.0));
  VtMap anti{{0, 0, 0, 4}, {1, 0, 0, 3}, {2, 0, 0, 2}, {3, 0, 0, 1}};
  CHECK(topp_correlation(img, anti, 90) == Approx(1.0));  // absolute value
  CHECK_THROWS_AS(topp_correlation(img, vt, 10), UndefinedCorrelation);
  VtMap outside{{9, 0, 0, 1}, {1, 0, 0, 2}};
  CHECK_THROWS_AS(topp_correlation(img, outside, 50), IncompatibleGridError);
  auto flat = image_of(d, {0.5, 0.5, 0.5, 0.5});
  CHECK_THROWS_AS(topp_correlation(flat, vt, 50), UndefinedCorrelation);
  // spearman sees a monotone but non-linear relation as perfect
  auto curved = image_of(d, {0.001, 0.01, 0.1, 1.0});
  CHECK(topp_correlation(curved, vt, 99, CorrelationKind::spearman) == Approx(1.0));
  CHECK(topp_correlation(curved, vt, 99, CorrelationKind::pearson) < 0.99);
}

TEST_CASE("test-retest report") {
  Dims3 d{6, 1, 1};
  std::vector<ScanImage> images{
      {"a", "1", image_of(d, {1, 2, 3, 4, 5, 6})},
      {"a", "2", image_of(d, {1.1, 2.1, 2.9, 4.2, 5, 6.1})},
      {"b", "1", image_of(d, {6, 5, 4, 3, 2, 1})},
      {"b", "2", image_of(d, {6, 5.1, 3.9, 3, 2.2, 1})},
  };
  auto rep = test_retest(images, {50, 90});
  REQUIRE(rep.rows.size() == 8);
  for (const auto& row : rep.rows) {
    REQUIRE(row.c_same.has_value());
    REQUIRE(row.m_other.has_value());
    REQUIRE(row.f.has_value());
    CHECK(*row.c_same > 0.9);
    CHECK(*row.m_other < 0.0);
    CHECK(*row.f == Approx((*row.c_same - *row.m_other) / *row.c_same));
    CHECK(*row.f > 0.0);
  }
  // oracle for one cell: a1 vs a2 at p = 50 selects the top 3 of each
  auto dir = [](std::vector<double> x, std::vector<double> y) { return pearson(x, y); };
  const double ab = dir({6, 5, 4}, {6.1, 5, 4.2});
  const double ba = dir({6, 5, 4}, {6.1, 5, 4.2});
  CHECK(*rep.rows[0].c_same == Approx(0.5 * (ab + ba)));

  std::ostringstream out;
  write_test_retest_csv(rep, out);
  CHECK(out.str().rfind("subject,scan,p,c_same,m_other,f\n", 0) == 0);

  auto bad = images;
  bad.pop_back();
  CHECK_THROWS_AS(test_retest(bad, {50}), std::invalid_argument);
  std::vector<ScanImage> one_subject(images.begin(), images.begin() + 2);
  CHECK_THROWS_AS(test_retest(one_subject, {50}), std::invalid_argument);
}

TEST_CASE("test-retest leaves f empty when c is undefined") {
  Dims3 d{3, 1, 1};
  std::vector<ScanImage> images{
      {"a", "1", image_of(d, {1, 1, 1})},
      {"a", "2", image_of(d, {1, 2, 3})},
      {"b", "1", image_of(d, {3, 2, 1})},
      {"b", "2", image_of(d, {1, 3, 2})},
  };
  auto rep = test_retest(images, {90});
  CHECK_FALSE(rep.rows[0].c_same.has_value());
  CHECK_FALSE(rep.rows[0].f.has_value());
  std::ostringstream out;
  write_test_retest_csv(rep, out);
  CHECK(out.str().find("a,1,90,,") != std::string::npos);
}

TEST_CASE("representative from intensities") {
  auto r = representative_from_intensities({3.0, 1.0, 2.0, 10.0, 2.5});
  CHECK(r.ordering == std::vector<std::size_t>{1, 2, 4, 0, 3});
  CHECK(r.selected == 4);
  CHECK(r.depth[4] == 1.0);
  CHECK(r.depth[3] == 0.5);  // the farthest one
  CHECK(r.depth[1] == Approx(1.0 / (1.0 + 1.5 / 7.5)));
  auto even = representative_from_intensities({4, 1, 3, 2});
  CHECK(even.selected == 3);  // lower median value 2
  auto same = representative_from_intensities({2, 2, 2});
  CHECK(same.selected == 1);
  CHECK(same.depth == std::vector<double>{1, 1, 1});
  CHECK_THROWS(representative_from_intensities({}));
}

TEST_CASE("field intensity") {
  Field4D f;
  f.dims = {2, 1, 1, 2};
  f.time_grid = Grid({0.5, 1.5});
  f.values = {4, 0, 2, 0};  // voxel 0: 4, 2; voxel 1: zeros
  f.input_integral = 2.0;
  Mask m{{2, 1, 1}, {1, 1}, 0};
  auto s = field_intensity(f, m);
  // cells of width 1; normalized values 2 and 1
  CHECK(s.integral == Approx(3.0));
  CHECK(s.support_measure == Approx(2.0));
  CHECK(s.i_value == Approx(1.5));
  f.input_integral.reset();
  CHECK_THROWS_AS(field_intensity(f, m), ConfigError);
}

TEST_CASE("representative subject over phantoms picks the median input scaling") {
  std::vector<Field4D> fields;
  std::vector<Mask> masks;
  for (std::uint64_t s = 0; s < 5; ++s) {
    fields.push_back(synth_field4d({6, 6, 4, 5}, PhantomScenario::phantom_brain, 8, s));
    masks.push_back(mask_threshold(fields.back(), PhantomLayout::threshold));
  }
  auto r = representative_subject(fields, masks);
  // identical patterns, input integral grows with the subject index
  CHECK(r.ordering == std::vector<std::size_t>{4, 3, 2, 1, 0});
  CHECK(r.selected == 2);
  masks.pop_back();
  CHECK_THROWS(representative_subject(fields, masks));
}

TEST_CASE("phantom synthesis") {
  const Dims4 shape{10, 10, 8, 6};
  auto a = synth_field4d(shape, PhantomScenario::phantom_brain, 1);
  auto b = synth_field4d(shape, PhantomScenario::phantom_brain, 1);
  CHECK(a.values == b.values);
  CHECK_NOTHROW(a.validate());
  CHECK(a.input_integral.has_value());
  auto m = mask_threshold(a, PhantomLayout::threshold);
  for (std::size_t v = 0; v < a.voxels(); ++v) {
    auto c = voxel_coords(a.spatial(), v);
    CHECK(static_cast<bool>(m.flags[v]) == inside_phantom(a.spatial(), c[0], c[1], c[2]));
  }
  CHECK(m.count() > 0);
  CHECK(m.count() < a.voxels());

  auto s1 = synth_field4d(shape, PhantomScenario::planted_retest, 1, 0, 0);
  auto s2 = synth_field4d(shape, PhantomScenario::planted_retest, 1, 0, 1);
  auto o = synth_field4d(shape, PhantomScenario::planted_retest, 1, 1, 0);
  CHECK_FALSE(s1.values == s2.values);
  CHECK(mask_threshold(s1, PhantomLayout::threshold).flags == m.flags);
  // same-subject scans share the pattern: closer than scans of another subject
  double same = 0, other = 0;
  for (std::size_t i = 0; i < s1.values.size(); ++i) {
    same += std::abs(s1.values[i] - s2.values[i]);
    other += std::abs(s1.values[i] - o.values[i]);
  }
  CHECK(same < other);
  CHECK(parse_scenario("planted_retest") == PhantomScenario::planted_retest);
  CHECK_THROWS_AS(parse_scenario("brain"), ConfigError);
  CHECK_THROWS(synth_field4d({0, 1, 1, 1}, PhantomScenario::phantom_brain, 1));
}

TEST_CASE("depth image is invariant to voxel enumeration order") {
  auto f = synth_field4d({6, 6, 4, 5}, PhantomScenario::phantom_brain, 12);
  auto m = mask_threshold(f, PhantomLayout::threshold);
  const std::size_t V = f.voxels();
  // mirror x: a permutation of voxel positions
  std::vector<std::size_t> perm(V);
  for (std::size_t v = 0; v < V; ++v) {
    auto c = voxel_coords(f.spatial(), v);
    perm[v] = voxel_index(f.spatial(), f.dims[0] - 1 - c[0], c[1], c[2]);
  }
  Field4D g = f;
  Mask mg = m;
  for (std::size_t v = 0; v < V; ++v) {
    mg.flags[perm[v]] = m.flags[v];
    for (std::size_t t = 0; t < f.frames(); ++t) g.values[perm[v] + V * t] = f.values[v + V * t];
  }
  const SubsampleSpec spec{m.count(), m.count(), 4};
  auto a = depth_image(f, m, MetricKind::grid_l2_unweighted, spec, {true});
  auto b = depth_image(g, mg, MetricKind::grid_l2_unweighted, spec, {true});
  for (std::size_t v = 0; v < V; ++v) CHECK(b.values[perm[v]] == a.values[v]);
  CHECK(b.deepest_voxel == perm[a.deepest_voxel]);
}

TEST_CASE("representative selection survives a common rescaling of all fields") {
  std::vector<Field4D> fields;
  std::vector<Mask> masks;
  for (std::uint64_t s = 0; s < 5; ++s) {
    fields.push_back(synth_field4d({6, 6, 4, 5}, PhantomScenario::planted_retest, 2, s));
    masks.push_back(mask_threshold(fields.back(), PhantomLayout::threshold));
  }
  auto base = representative_subject(fields, masks);
  for (auto& f : fields)
    for (auto& v : f.values) v *= 3.5f;
  auto scaled = representative_subject(fields, masks);
  CHECK(scaled.selected == base.selected);
  CHECK(scaled.ordering == base.ordering);
}

TEST_CASE("top-p correlation is invariant to positive affine maps of V_T") {
  std::mt19937_64 eng(6);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  Dims3 d{5, 4, 3};
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> vals(voxel_count(d));
    for (auto& v : vals) v = u(eng);
    auto img = image_of(d, vals);
    VtMap vt, mapped;
    const double a = u(eng), b = u(eng);
    for (std::size_t v = 0; v < vals.size(); ++v) {
      auto c = voxel_coords(d, v);
      const double x = u(eng);
      vt.push_back({c[0], c[1], c[2], x});
      mapped.push_back({c[0], c[1], c[2], a * x + b});
    }
    for (double p : {20.0, 50.0, 90.0}) {
      CHECK(topp_correlation(img, mapped, p) == Approx(topp_correlation(img, vt, p)).margin(1e-12));
      CHECK(topp_correlation(img, mapped, p, CorrelationKind::spearman) ==
            Approx(topp_correlation(img, vt, p, CorrelationKind::spearman)).margin(1e-12));
    }
  }
}
