#pragma once

// Command-line front end. Every subcommand parses flags, calls the library,
// and serializes the result next to a run manifest.
//
// Exit codes: 0 success, 2 usage error, 1 runtime error. Errors go to the
// error stream as one line of JSON.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rdepth/rdepth.hpp"

namespace rdepth::cli {

inline constexpr const char* tool_version = "0.1.0";

using ordered_json = nlohmann::ordered_json;

/// A flag combination the parser cannot express (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Tabular output in CSV or JSON
// ---------------------------------------------------------------------------

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<ordered_json>> rows;
};

inline std::string csv_cell(const ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline void write_table(const Table& t, std::ostream& out, std::string_view format) {
  if (format == "json") {
    ordered_json arr = ordered_json::array();
    for (const auto& r : t.rows) {
      ordered_json o;
      for (std::size_t c = 0; c < t.columns.size(); ++c) o[t.columns[c]] = r[c];
      arr.push_back(std::move(o));
    }
    out << arr.dump(2) << '\n';
    return;
  }
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << csv_cell(r[c]);
    out << '\n';
  }
}

inline ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

// ---------------------------------------------------------------------------
// Run context: output directory, inputs touched, outputs written
// ---------------------------------------------------------------------------

class Run {
 public:
  Run(std::string subcommand, std::vector<std::string> argv, std::filesystem::path out_dir, std::string format)
      : subcommand_(std::move(subcommand)),
        argv_(std::move(argv)),
        out_dir_(std::move(out_dir)),
        format_(std::move(format)),
        start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(out_dir_);
  }

  const std::string& format() const noexcept { return format_; }
  std::string table_ext() const { return format_ == "json" ? ".json" : ".csv"; }

  std::filesystem::path output_path(const std::string& name) const {
    std::filesystem::path p(name);
    return p.is_absolute() ? p : out_dir_ / p;
  }

  /// Registers an input file and returns its bytes.
  std::string input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    inputs_.push_back({{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}});
    return bytes;
  }

  void add_seed(std::uint64_t s) { seeds_.push_back(s); }

  /// Writes `content` to the named output file.
  void emit(const std::string& name, const std::string& content) {
    auto path = output_path(name);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
    outputs_.push_back(path.filename().string());
  }

  void emit_table(const std::string& name, const Table& t) {
    std::ostringstream s;
    write_table(t, s, format_);
    emit(name, s.str());
  }

  void emit_json(const std::string& name, const ordered_json& j) { emit(name, j.dump(2) + "\n"); }

  void finish(const CLI::App& sub) {
    ordered_json flags = ordered_json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      if (opt->count() == 0 || opt->get_name() == "--help") continue;
      const auto& res = opt->results();
      flags[opt->get_name()] = res.size() == 1 ? ordered_json(res[0]) : ordered_json(res);
    }
    ordered_json m;
    m["tool"] = "rdepth";
    m["version"] = tool_version;
    m["subcommand"] = subcommand_;
    m["argv"] = argv_;
    m["flags"] = flags;
    m["format"] = format_;
    m["seeds"] = seeds_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["threads"] = thread_count();
    m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    auto path = output_path(subcommand_ + ".manifest.json");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
    out << m.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  std::vector<std::string> argv_;
  std::filesystem::path out_dir_;
  std::string format_;
  std::chrono::steady_clock::time_point start_;
  ordered_json inputs_ = ordered_json::array();
  std::vector<std::string> outputs_;
  std::vector<std::uint64_t> seeds_;
};

// ---------------------------------------------------------------------------
// Shared parsing helpers
// ---------------------------------------------------------------------------

inline CurveSet load_curves(Run& run, const std::string& path) {
  std::istringstream in(run.input(path));
  try {
    return parse_curveset_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline Field4D load_field(Run& run, const std::string& path) { return decode_field4d(run.input(path), path); }
inline Mask load_mask(Run& run, const std::string& path) { return decode_mask(run.input(path), path); }
inline VtMap load_voxels(Run& run, const std::string& path) {
  std::istringstream in(run.input(path));
  return parse_voxel_csv(in, path);
}

inline const std::vector<std::string> metric_names = {"l2", "l2riemann", "sup", "hyperbolic"};

inline std::vector<double> default_p_grid() {
  std::vector<double> p;
  for (int i = 10; i <= 90; i += 10) p.push_back(i);
  return p;
}

inline Table depth_table(const DepthResult& r) {
  Table t{{"index", "depth"}, {}};
  for (std::size_t i = 0; i < r.values.size(); ++i) t.rows.push_back({i, r.values[i]});
  return t;
}

inline ordered_json center_json(const SymmetrySolution& s) {
  ordered_json j;
  j["selected"] = s.selected;
  j["center_indices"] = s.center_indices;
  j["delta"] = s.delta;
  j["n"] = s.n_used;
  j["m"] = s.m_used;
  j["seed"] = s.seed;
  j["metric"] = metric_name(s.metric);
  return j;
}

inline Table report_table(const ExperimentReport& rep) {
  Table t{{"experiment", "N", "c", "sd", "n", "m", "method", "statistic", "value", "reps", "seed"}, {}};
  auto or_null = [](std::size_t v) { return v ? ordered_json(v) : ordered_json(nullptr); };
  for (const auto& r : rep.rows)
    t.rows.push_back({r.experiment, r.N, r.c, r.sd, or_null(r.n), or_null(r.m), r.method, r.statistic, r.value, r.reps,
                      r.seed});
  return t;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline std::string error_line(std::string_view kind, std::string_view message, int code) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  return j.dump();
}

/// Drops global flags (and their values) from a stored argument list.
inline std::vector<std::string> strip_globals(const std::vector<std::string>& args) {
  static const std::vector<std::string> globals = {"--threads", "--out-dir", "--format"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    bool skip = false;
    for (const auto& g : globals) {
      if (args[i] == g) {
        ++i;
        skip = true;
      } else if (args[i].rfind(g + "=", 0) == 0) {
        skip = true;
      }
    }
    if (!skip) out.push_back(args[i]);
  }
  return out;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

namespace detail {

struct Options {
  std::size_t threads = 0;
  std::string out_dir = ".";
  std::string format = "csv";

  // shared
  std::string input, query, metric = "l2";
  std::size_t n = 0, m = 0;
  std::optional<std::uint64_t> seed;
  bool full_candidates = false;

  // depth
  std::string method = "random";
  std::size_t projections = 10;
  std::optional<std::size_t> vartheta, vartheta_prime;

  // sim
  std::vector<std::size_t> N_list, n_list, m_list;
  double c = 10.0, sd = 0.0, bernoulli_p = 1.0 / 3.0;
  std::size_t reps = 20, random_n = 0;
  std::vector<std::string> methods = {"idt", "mbd", "band", "rtukey1", "rtukey10", "random"};
  std::string out;

  // neuro
  std::string field, mask, image, vt;
  std::vector<std::string> fields, masks, images;
  std::optional<double> threshold;
  std::vector<double> p_list;
  bool spearman = false;
  std::vector<double> i_values;
  std::vector<std::uint32_t> shape = {16, 16, 12, 8};
  std::string scenario = "phantom_brain";
  std::uint64_t subject = 0, scan = 0;

  // replay
  std::string manifest;
};

inline std::uint64_t need_seed(const Options& o, Run& run) {
  if (!o.seed) throw UsageError("--seed is required for randomized subcommands");
  run.add_seed(*o.seed);
  return *o.seed;
}

inline std::string out_name(const Options& o, const std::string& fallback) { return o.out.empty() ? fallback : o.out; }

inline void cmd_center(const Options& o, Run& run, std::ostream& out) {
  const auto seed = need_seed(o, run);
  const auto set = load_curves(run, o.input);
  const CurveMetric metric(parse_metric(o.metric), set.grid());
  const auto sol = random_center(set, metric, SubsampleSpec{o.n, o.m, seed}, CenterOptions{o.full_candidates});
  const auto j = center_json(sol);
  run.emit_json(out_name(o, "center.json"), j);
  out << j.dump() << '\n';
}

inline VarthetaRule vartheta_rule(const Options& o) {
  if (o.vartheta.has_value() != o.vartheta_prime.has_value())
    throw UsageError("--vartheta and --vartheta-prime must be given together");
  if (o.vartheta) return ExplicitPair{*o.vartheta, *o.vartheta_prime};
  return DefaultScale{};
}

inline void cmd_depth(const Options& o, Run& run) {
  const auto set = load_curves(run, o.input);
  const CurveSet query = o.query.empty() ? set : load_curves(run, o.query);
  const auto kind = parse_metric(o.metric);
  const CurveMetric metric(kind, set.grid());
  DepthResult r;
  ordered_json side;
  if (o.method == "random" || o.method == "simple") {
    const auto seed = need_seed(o, run);
    const std::size_t n = o.n ? o.n : set.size();
    const std::size_t m = o.m ? o.m : set.size();
    DepthParams params;
    params.rule = vartheta_rule(o);
    params.center = random_center(set, metric, SubsampleSpec{n, m, seed}, CenterOptions{o.full_candidates});
    r = o.method == "random" ? random_depth(set, metric, params, query)
                             : simple_random_depth(set, metric, params.center, query);
    side["center"] = center_json(params.center);
  } else if (o.method == "metric") {
    // Exact center set: every curve is mass, probe and candidate.
    const auto sol = random_center(set, metric, SubsampleSpec{set.size(), set.size(), 0}, CenterOptions{true});
    ExplicitPair pair{0, sol.selected};
    if (o.vartheta) {
      auto rule = vartheta_rule(o);
      pair = std::get<ExplicitPair>(rule);
    } else {
      auto choice = resolve_scale(set, metric, sol, DefaultScale{});
      pair = ExplicitPair{choice.vartheta, choice.vartheta_prime};
    }
    r = metric_depth(set, metric, sol.center_indices, pair, query);
    side["center"] = center_json(sol);
  } else if (o.method == "idt" || o.method == "ids") {
    r = integrated_depth(set, o.method == "idt" ? IntegratedFlavor::tukey : IntegratedFlavor::simplicial, query);
  } else if (o.method == "band") {
    r = band_depth_j2(set, query);
  } else if (o.method == "mbd") {
    r = modified_band_depth_j2(set, query);
  } else if (o.method == "rtukey") {
    const auto seed = need_seed(o, run);
    r = random_tukey_depth(set, ProjectionSpec{o.projections, seed}, query);
  }
  run.emit_table("depth" + run.table_ext(), depth_table(r));
  side["method"] = r.method;
  side["deepest_index"] = r.deepest_index;
  side["parameters"] = r.parameters;
  run.emit_json("depth.sidecar.json", side);
}

inline void cmd_sim_convergence(const Options& o, Run& run) {
  const auto seed = need_seed(o, run);
  if (o.N_list.size() != 1) throw UsageError("sim-convergence takes exactly one --N");
  SimConfig cfg;
  cfg.N = o.N_list[0];
  cfg.c = o.c;
  cfg.sd = o.sd;
  cfg.bernoulli_p = o.bernoulli_p;
  if (o.n_list.empty() || o.m_list.empty()) throw UsageError("--n and --m lists are required");
  const auto rep = convergence_experiment(cfg, o.n_list, o.m_list, o.reps, seed);
  run.emit_table(out_name(o, "convergence" + run.table_ext()), report_table(rep));
}

inline void cmd_sim_identify(const Options& o, Run& run) {
  const auto seed = need_seed(o, run);
  if (o.N_list.empty()) throw UsageError("--N is required");
  std::vector<SimConfig> cfgs;
  for (auto N : o.N_list) {
    SimConfig cfg;
    cfg.N = N;
    cfg.c = o.c;
    cfg.sd = o.sd;
    cfg.bernoulli_p = o.bernoulli_p;
    cfgs.push_back(cfg);
  }
  std::vector<DepthMethod> methods;
  for (const auto& s : o.methods) methods.push_back(parse_depth_method(s));
  IdentifyOptions opt;
  opt.random_n = o.random_n;
  opt.metric = parse_metric(o.metric);
  const auto rep = identification_experiment(cfgs, methods, o.reps, seed, opt);
  run.emit_table(out_name(o, "identification" + run.table_ext()), report_table(rep));
}

inline void cmd_mask(const Options& o, Run& run) {
  const auto f = load_field(run, o.field);
  const auto m = mask_threshold(f, o.threshold.value_or(PhantomLayout::threshold));
  run.emit(out_name(o, "mask.fdmk"), encode_mask(m));
  ordered_json j;
  j["dims"] = m.dims;
  j["threshold"] = m.threshold_used;
  j["flagged"] = m.count();
  j["voxels"] = m.flags.size();
  run.emit_json("mask.json", j);
}

inline void cmd_deconvolve(const Options& o, Run& run) {
  const auto seed = need_seed(o, run);
  const auto f = load_field(run, o.field);
  const Mask m = o.mask.empty() ? mask_threshold(f, o.threshold.value_or(PhantomLayout::threshold)) : load_mask(run, o.mask);
  require_mask_dims(f, m);
  const std::size_t count = m.count();
  const std::size_t n = o.n ? o.n : std::min<std::size_t>(500, count);
  const std::size_t mm = o.m ? o.m : std::min<std::size_t>(500, count);
  const auto img = depth_image(f, m, parse_metric(o.metric), SubsampleSpec{n, mm, seed}, CenterOptions{o.full_candidates});
  std::ostringstream csv;
  write_depth_image_csv(img, csv);
  run.emit(out_name(o, "depth_image.csv"), csv.str());
  ordered_json side;
  side["dims"] = img.dims;
  side["deepest_voxel"] = voxel_coords(img.dims, img.deepest_voxel);
  side["parameters"] = img.parameters;
  run.emit_json("depth_image.sidecar.json", side);
}

inline void cmd_corr_vt(const Options& o, Run& run) {
  const auto img = depth_image_from_voxels(load_voxels(run, o.image));
  const auto vt = load_voxels(run, o.vt);
  const auto kind = o.spearman ? CorrelationKind::spearman : CorrelationKind::pearson;
  Table t{{"p", "abs_correlation"}, {}};
  for (double p : o.p_list.empty() ? default_p_grid() : o.p_list) {
    std::optional<double> c;
    try {
      c = topp_correlation(img, vt, p, kind);
    } catch (const UndefinedCorrelation&) {
    }
    t.rows.push_back({p, opt_json(c)});
  }
  run.emit_table(out_name(o, "corr_vt" + run.table_ext()), t);
}

inline void cmd_testretest(const Options& o, Run& run) {
  std::vector<ScanImage> scans;
  for (const auto& spec : o.images) {
    const auto a = spec.find(':');
    const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
    if (b == std::string::npos) throw UsageError("--image expects subject:scan:path, got '" + spec + "'");
    scans.push_back({spec.substr(0, a), spec.substr(a + 1, b - a - 1),
                     depth_image_from_voxels(load_voxels(run, spec.substr(b + 1)))});
  }
  const auto kind = o.spearman ? CorrelationKind::spearman : CorrelationKind::pearson;
  const auto rep = test_retest(scans, o.p_list.empty() ? default_p_grid() : o.p_list, kind);
  Table t{{"subject", "scan", "p", "c_same", "m_other", "f"}, {}};
  for (const auto& r : rep.rows)
    t.rows.push_back({r.subject, r.scan, r.p, opt_json(r.c_same), opt_json(r.m_other), opt_json(r.f)});
  run.emit_table(out_name(o, "testretest" + run.table_ext()), t);
}

inline void cmd_representative(const Options& o, Run& run) {
  RepresentativeResult r;
  std::vector<std::string> names;
  if (!o.i_values.empty()) {
    if (!o.fields.empty()) throw UsageError("give either --i-values or --field, not both");
    r = representative_from_intensities(o.i_values);
    for (std::size_t j = 0; j < o.i_values.size(); ++j) names.push_back("x" + std::to_string(j + 1));
  } else {
    if (o.fields.empty()) throw UsageError("representative needs --field (repeatable) or --i-values");
    if (!o.masks.empty() && o.masks.size() != o.fields.size()) throw UsageError("give one --mask per --field");
    std::vector<Field4D> fs;
    std::vector<Mask> ms;
    for (std::size_t j = 0; j < o.fields.size(); ++j) {
      fs.push_back(load_field(run, o.fields[j]));
      ms.push_back(o.masks.empty() ? mask_threshold(fs.back(), o.threshold.value_or(PhantomLayout::threshold))
                                   : load_mask(run, o.masks[j]));
      names.push_back(fs.back().subject_id);
    }
    r = representative_from_intensities([&] {
      std::vector<double> iv(fs.size());
      parallel_for(fs.size(), [&](std::size_t j) { iv[j] = field_intensity(fs[j], ms[j]).i_value; });
      return iv;
    }());
  }
  Table t{{"rank", "index", "subject", "i_value", "depth", "selected"}, {}};
  for (std::size_t k = 0; k < r.ordering.size(); ++k) {
    const auto j = r.ordering[k];
    t.rows.push_back({k + 1, j, names[j], r.i_values[j], r.depth[j], j == r.selected});
  }
  run.emit_table(out_name(o, "representative" + run.table_ext()), t);
  ordered_json j;
  j["selected"] = r.selected;
  j["selected_subject"] = names[r.selected];
  j["ordering"] = r.ordering;
  run.emit_json("representative.json", j);
}

inline void cmd_synth(const Options& o, Run& run) {
  const auto seed = need_seed(o, run);
  if (o.shape.size() != 4) throw UsageError("--shape expects X,Y,Z,T");
  const Dims4 shape{o.shape[0], o.shape[1], o.shape[2], o.shape[3]};
  const auto f = synth_field4d(shape, parse_scenario(o.scenario), seed, o.subject, o.scan);
  run.emit(out_name(o, "synth.fd4d"), encode_field4d(f));
}

}  // namespace detail

/// Runs one invocation; `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  detail::Options o;
  CLI::App app{"Random depth for functional data and 4D fields", "rdepth"};
  app.require_subcommand(1);
  app.add_option("--threads", o.threads, "worker threads (0 = available parallelism)");
  app.add_option("--out-dir", o.out_dir, "directory for outputs and manifests");
  app.add_option("--format", o.format, "table output format")->check(CLI::IsMember({"csv", "json"}));

  auto add_metric = [&](CLI::App* s) {
    s->add_option("--metric", o.metric, "l2, l2riemann, sup or hyperbolic")->check(CLI::IsMember(metric_names));
  };
  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "64-bit seed (required when randomized)"); };
  auto add_out = [&](CLI::App* s) { s->add_option("--out", o.out, "output file name (under --out-dir when relative)"); };

  auto* center = app.add_subcommand("center", "random center of symmetry of a curve CSV");
  center->add_option("--input", o.input, "curve CSV")->required();
  add_metric(center);
  center->add_option("--n", o.n, "mass sample size")->required();
  center->add_option("--m", o.m, "probe sample size")->required();
  add_seed(center);
  center->add_flag("--full-candidates", o.full_candidates, "search every curve as a candidate center");
  add_out(center);

  auto* depth = app.add_subcommand("depth", "depth of every curve");
  depth->add_option("--input", o.input, "curve CSV")->required();
  depth->add_option("--query", o.query, "query curve CSV (default: the input)");
  depth->add_option("--method", o.method, "depth method")
      ->check(CLI::IsMember({"random", "simple", "metric", "idt", "ids", "band", "mbd", "rtukey"}));
  add_metric(depth);
  depth->add_option("--n", o.n, "mass sample size (default N)");
  depth->add_option("--m", o.m, "probe sample size (default N)");
  add_seed(depth);
  depth->add_option("--projections", o.projections, "random Tukey projections")->check(CLI::PositiveNumber);
  depth->add_option("--vartheta", o.vartheta, "explicit vartheta index");
  depth->add_option("--vartheta-prime", o.vartheta_prime, "explicit vartheta' index");
  depth->add_flag("--full-candidates", o.full_candidates, "search every curve as a candidate center");

  auto add_sim = [&](CLI::App* s) {
    s->add_option("--N", o.N_list, "number of curves (comma list for sim-identify)")->delimiter(',')->required();
    s->add_option("--c", o.c, "family constant c")->check(CLI::PositiveNumber);
    s->add_option("--sd", o.sd, "noise standard deviation")->check(CLI::NonNegativeNumber);
    s->add_option("--p", o.bernoulli_p, "probability a curve is perturbed")->check(CLI::Range(0.0, 1.0));
    s->add_option("--reps", o.reps, "replicates")->check(CLI::PositiveNumber);
    add_seed(s);
    add_out(s);
  };
  auto* simc = app.add_subcommand("sim-convergence", "distance of the random deepest curve to the true one");
  add_sim(simc);
  simc->add_option("--n", o.n_list, "mass sample sizes")->delimiter(',');
  simc->add_option("--m", o.m_list, "probe sample sizes")->delimiter(',');

  auto* simi = app.add_subcommand("sim-identify", "how often each depth finds the true deepest curve");
  add_sim(simi);
  simi->add_option("--methods", o.methods, "idt, mbd, band, rtukey1, rtukey10, random")
      ->delimiter(',')
      ->check(CLI::IsMember({"idt", "mbd", "band", "rtukey1", "rtukey10", "random"}));
  simi->add_option("--random-n", o.random_n, "subsample size for random depth (0 = automatic)");
  add_metric(simi);

  auto* mask = app.add_subcommand("mask", "threshold the time-summed field");
  mask->add_option("--field", o.field, "FD4D field")->required();
  mask->add_option("--threshold", o.threshold, "sum threshold (default 20000)");
  add_out(mask);

  auto* deconv = app.add_subcommand("deconvolve", "voxelwise depth image");
  deconv->add_option("--field", o.field, "FD4D field")->required();
  deconv->add_option("--mask", o.mask, "FDMK mask (default: threshold the field)");
  deconv->add_option("--threshold", o.threshold, "sum threshold when no mask is given");
  add_metric(deconv);
  deconv->add_option("--n", o.n, "mass sample size (default min(500, voxels))");
  deconv->add_option("--m", o.m, "probe sample size (default min(500, voxels))");
  add_seed(deconv);
  deconv->add_flag("--full-candidates", o.full_candidates, "search every voxel curve as a candidate center");
  add_out(deconv);

  auto* corr = app.add_subcommand("corr-vt", "|correlation| of a depth image with V_T over top-p% voxels");
  corr->add_option("--image", o.image, "depth image CSV x,y,z,value")->required();
  corr->add_option("--vt", o.vt, "V_T CSV x,y,z,value")->required();
  corr->add_option("--p", o.p_list, "percentages (default 10,...,90)")->delimiter(',');
  corr->add_flag("--spearman", o.spearman, "rank correlation instead of Pearson");
  add_out(corr);

  auto* tr = app.add_subcommand("testretest", "test-retest score f(p)");
  tr->add_option("--image", o.images, "subject:scan:path to a depth image CSV (repeatable)")->required();
  tr->add_option("--p", o.p_list, "percentages (default 10,...,90)")->delimiter(',');
  tr->add_flag("--spearman", o.spearman, "rank correlation instead of Pearson");
  add_out(tr);

  auto* repr = app.add_subcommand("representative", "representative subject by median intensity");
  repr->add_option("--field", o.fields, "FD4D field with input integral (repeatable)");
  repr->add_option("--mask", o.masks, "FDMK mask per field (repeatable)");
  repr->add_option("--threshold", o.threshold, "sum threshold when no masks are given");
  repr->add_option("--i-values", o.i_values, "precomputed intensities instead of fields")->delimiter(',');
  add_out(repr);

  auto* synth = app.add_subcommand("synth", "write a synthetic FD4D phantom");
  synth->add_option("--shape", o.shape, "X,Y,Z,T")->delimiter(',')->expected(4);
  synth->add_option("--scenario", o.scenario, "phantom_brain or planted_retest")
      ->check(CLI::IsMember({"phantom_brain", "planted_retest"}));
  add_seed(synth);
  synth->add_option("--subject", o.subject, "subject number");
  synth->add_option("--scan", o.scan, "scan number");
  add_out(synth);

  auto* replay = app.add_subcommand("replay", "re-run the invocation recorded in a manifest");
  replay->add_option("--manifest", o.manifest, "manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", e.what(), 2) << '\n';
    return 2;
  }

  set_thread_count(o.threads);
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "replay") {
      std::ifstream in(o.manifest);
      if (!in) throw std::runtime_error("cannot open manifest '" + o.manifest + "'");
      const auto m = nlohmann::json::parse(in);
      auto stored = strip_globals(m.at("argv").get<std::vector<std::string>>());
      std::vector<std::string> next;
      if (app.get_option("--threads")->count()) next.insert(next.end(), {"--threads", std::to_string(o.threads)});
      if (app.get_option("--out-dir")->count()) next.insert(next.end(), {"--out-dir", o.out_dir});
      next.insert(next.end(), {"--format", m.value("format", std::string("csv"))});
      next.insert(next.end(), stored.begin(), stored.end());
      if (!stored.empty() && stored.front() == "replay") throw UsageError("a manifest cannot replay a replay");
      return run(next, out, err);
    }
    Run r(name, args, o.out_dir, o.format);
    if (name == "center") detail::cmd_center(o, r, out);
    else if (name == "depth") detail::cmd_depth(o, r);
    else if (name == "sim-convergence") detail::cmd_sim_convergence(o, r);
    else if (name == "sim-identify") detail::cmd_sim_identify(o, r);
    else if (name == "mask") detail::cmd_mask(o, r);
    else if (name == "deconvolve") detail::cmd_deconvolve(o, r);
    else if (name == "corr-vt") detail::cmd_corr_vt(o, r);
    else if (name == "testretest") detail::cmd_testretest(o, r);
    else if (name == "representative") detail::cmd_representative(o, r);
    else if (name == "synth") detail::cmd_synth(o, r);
    r.finish(*sub);
  } catch (const UsageError& e) {
    err << error_line("usage", e.what(), 2) << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << error_line("config", e.what(), 2) << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << error_line("parse", e.what(), 1) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << error_line("runtime", e.what(), 1) << '\n';
    return 1;
  }
  return 0;
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), std::cout, std::cerr);
}

}  // namespace rdepth::cli
