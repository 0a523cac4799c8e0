#pragma once

// Batch experiment driver: every library pipeline as a reproducible command.
//
// Each command is a pure function of a resolved configuration: it computes,
// writes plain CSV/JSON files under the configured output directory, and
// returns a manifest listing every emitted file with a content hash.  Reruns
// with the same configuration and seed produce byte-identical data files;
// the only nondeterministic quantity is the wall-clock entry of the
// manifest, which callers must exclude when comparing runs.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "billiards/development.hpp"
#include "billiards/partition.hpp"
#include "billiards/rotation.hpp"
#include "billiards/unfolding.hpp"

namespace billiards {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kLibraryVersion = "0.1.0";

// Exit-code contract shared by every command: 0 success, 2 precondition
// failure, 3 resource budget exceeded.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitBudget = 3;

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string shape = "rhombus";   // "rhombus" or "triangle"
  std::string angle_spec = "0.7";  // radians, or "seeded-random"
  std::uint64_t seed = 0;
  bool has_seed = false;
  double leg = 1.0;  // side length (rhombus) or adjacent leg (triangle)

  int n_max = 6;
  int fit_n_min = 2;
  int apex = 0;
  std::vector<double> mu_grid = {0.125,     0.0625,    0.03125,  0.015625,
                                 0.0078125, 0.00390625, 0.001953125,
                                 0.0009765625};
  double gamma = 0.1;
  double c = 1.0;
  double growth_constant = 4.0;  // step-bound constant for beam searches
  double epsilon = 0.1;          // step-bound exponent slack
  double synthetic_exponent = 0.0;  // > 0: fit a synthetic power law instead
  bool drag = true;                 // dev-orbit: drag a found orbit

  double vertex_rel = 1e-9;
  double line_rel = 1e-12;
  long node_budget = 10'000'000;
  long long hitting_cap = 4'000'000;
  long long search_max_steps = 400'000;
  int max_drags = 4000;

  std::string out_dir = "out";
};

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.shape != "rhombus" && cfg.shape != "triangle")
    throw PreconditionError("config: shape must be 'rhombus' or 'triangle'");
  if (cfg.angle_spec == "seeded-random" && !cfg.has_seed)
    throw PreconditionError(
        "config: 'seeded-random' angle requires an explicit seed");
  if (!(cfg.leg > 0.0)) throw PreconditionError("config: leg must be positive");
  if (cfg.n_max < 0) throw PreconditionError("config: n_max must be >= 0");
  if (cfg.apex < 0) throw PreconditionError("config: apex must be >= 0");
  if (!(cfg.gamma > 0.0))
    throw PreconditionError("config: gamma must be positive");
  if (!(cfg.c > 0.0)) throw PreconditionError("config: c must be positive");
  if (!(cfg.growth_constant > 0.0))
    throw PreconditionError("config: growth_constant must be positive");
  if (!(cfg.epsilon > 0.0))
    throw PreconditionError("config: epsilon must be positive");
  if (!(cfg.vertex_rel > 0.0) || !(cfg.line_rel > 0.0))
    throw PreconditionError("config: tolerances must be positive");
  if (cfg.node_budget < 1)
    throw PreconditionError("config: node_budget must be >= 1");
  if (cfg.mu_grid.empty())
    throw PreconditionError("config: mu_grid must not be empty");
  for (double mu : cfg.mu_grid)
    if (!(mu > 0.0)) throw PreconditionError("config: mu values must be > 0");
}

// Merge a JSON document into a config.  Unknown keys are precondition
// errors: a typo must not silently fall back to a default.
inline ExperimentConfig config_from_json(const ordered_json& j,
                                         ExperimentConfig base = {}) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const ordered_json& v = it.value();
    try {
      if (k == "shape") base.shape = v.get<std::string>();
      else if (k == "angle") {
        if (v.is_string()) base.angle_spec = v.get<std::string>();
        else base.angle_spec = ordered_json(v.get<double>()).dump();
      } else if (k == "seed") {
        base.seed = v.get<std::uint64_t>();
        base.has_seed = true;
      } else if (k == "leg") base.leg = v.get<double>();
      else if (k == "n_max") base.n_max = v.get<int>();
      else if (k == "fit_n_min") base.fit_n_min = v.get<int>();
      else if (k == "apex") base.apex = v.get<int>();
      else if (k == "mu_grid") base.mu_grid = v.get<std::vector<double>>();
      else if (k == "gamma") base.gamma = v.get<double>();
      else if (k == "c") base.c = v.get<double>();
      else if (k == "growth_constant") base.growth_constant = v.get<double>();
      else if (k == "epsilon") base.epsilon = v.get<double>();
      else if (k == "synthetic_exponent")
        base.synthetic_exponent = v.get<double>();
      else if (k == "drag") base.drag = v.get<bool>();
      else if (k == "vertex_rel") base.vertex_rel = v.get<double>();
      else if (k == "line_rel") base.line_rel = v.get<double>();
      else if (k == "node_budget") base.node_budget = v.get<long>();
      else if (k == "hitting_cap") base.hitting_cap = v.get<long long>();
      else if (k == "search_max_steps")
        base.search_max_steps = v.get<long long>();
      else if (k == "max_drags") base.max_drags = v.get<int>();
      else if (k == "out_dir") base.out_dir = v.get<std::string>();
      else
        throw PreconditionError("config: unknown key '" + k + "'");
    } catch (const nlohmann::json::exception& e) {
      throw PreconditionError("config: bad value for '" + k + "': " +
                              e.what());
    }
  }
  return base;
}

inline ExperimentConfig config_from_file(const std::string& path,
                                         ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("config: cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError("config: " + path + " is not valid JSON: " +
                            e.what());
  }
  return config_from_json(j, std::move(base));
}

// Configuration with the angle drawn and the tables built.
struct ResolvedExperiment {
  ExperimentConfig cfg;
  double angle = 0.0;  // radians actually used
  bool angle_was_seeded = false;
  Rhombus rhombus{1.0, 1.0};
  std::optional<RightTriangle> triangle;
  Tolerances tol;
};

inline ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ResolvedExperiment rx;
  rx.cfg = cfg;
  rx.tol = Tolerances{cfg.vertex_rel, cfg.line_rel};

  if (cfg.angle_spec == "seeded-random") {
    std::mt19937_64 rng(cfg.seed);
    double u = (rng() >> 11) * 0x1.0p-53;
    rx.angle = u * kPi / 2.0;  // uniform on (0, pi/2); seed recorded
    rx.angle_was_seeded = true;
  } else {
    try {
      std::size_t used = 0;
      rx.angle = std::stod(cfg.angle_spec, &used);
      if (used != cfg.angle_spec.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw PreconditionError("config: angle '" + cfg.angle_spec +
                              "' is neither a number nor 'seeded-random'");
    }
  }

  if (cfg.shape == "triangle") {
    if (!(rx.angle > 0.0 && rx.angle < kPi / 2.0))
      throw PreconditionError("config: triangle acute angle outside (0, pi/2)");
    rx.triangle = RightTriangle(Angle(rx.angle), cfg.leg);
    rx.rhombus = triangle_to_rhombus(*rx.triangle);
  } else {
    if (!(rx.angle > 0.0 && rx.angle < kPi))
      throw PreconditionError("config: rhombus angle outside (0, pi)");
    rx.rhombus = Rhombus(cfg.leg * std::cos(rx.angle / 2.0),
                         cfg.leg * std::sin(rx.angle / 2.0));
  }
  return rx;
}

// The polygon the complexity commands enumerate on.
inline ConvexPolygon shape_polygon(const ResolvedExperiment& rx) {
  if (rx.triangle) return rx.triangle->polygon();
  return rx.rhombus.polygon();
}

inline ordered_json config_echo(const ResolvedExperiment& rx) {
  const ExperimentConfig& c = rx.cfg;
  ordered_json j;
  j["shape"] = c.shape;
  j["angle_spec"] = c.angle_spec;
  j["angle_radians"] = rx.angle;
  j["angle_was_seeded"] = rx.angle_was_seeded;
  if (c.has_seed) j["seed"] = c.seed;
  j["leg"] = c.leg;
  j["n_max"] = c.n_max;
  j["fit_n_min"] = c.fit_n_min;
  j["apex"] = c.apex;
  j["mu_grid"] = c.mu_grid;
  j["gamma"] = c.gamma;
  j["c"] = c.c;
  j["growth_constant"] = c.growth_constant;
  j["epsilon"] = c.epsilon;
  j["synthetic_exponent"] = c.synthetic_exponent;
  j["drag"] = c.drag;
  j["vertex_rel"] = c.vertex_rel;
  j["line_rel"] = c.line_rel;
  j["node_budget"] = c.node_budget;
  j["hitting_cap"] = c.hitting_cap;
  j["search_max_steps"] = c.search_max_steps;
  j["max_drags"] = c.max_drags;
  j["out_dir"] = c.out_dir;
  return j;
}

// ---------------------------------------------------------------------------
// Serialization helpers

// 64-bit FNV-1a over the raw bytes, as a fixed-width hex string.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// Shortest exact decimal form of a double, stable across reruns.
inline std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// RFC-style CSV quoting: quote when the field contains a comma, a quote,
// or a line break; double embedded quotes.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

// Unit coordinate of a line direction within an angular sector.  A line is
// a direction mod a half turn; the sector of a convex corner is narrower
// than that, so the reduced angle lands in the sector exactly when the
// line does.  0 is the sector's lower edge, 1 its upper edge.
inline double sector_coordinate(double direction_angle, double theta_lo,
                                double theta_hi) {
  if (!(theta_hi > theta_lo))
    throw std::invalid_argument("sector_coordinate: empty sector");
  double rel = std::fmod(direction_angle - theta_lo, kPi);
  if (rel < 0.0) rel += kPi;
  return rel / (theta_hi - theta_lo);
}

struct FileRecord {
  std::string path;
  std::uint64_t bytes = 0;
  std::string fnv1a;
};

struct RunManifest {
  std::string command;
  ordered_json config;
  std::string library_version = kLibraryVersion;
  double wall_clock_ms = 0.0;  // excluded from determinism comparisons
  int exit_code = kExitSuccess;
  ordered_json outputs;  // command-specific summary
  std::vector<FileRecord> files;
  std::vector<std::string> warnings;

  ordered_json to_json(bool include_wall_clock = true) const {
    ordered_json j;
    j["command"] = command;
    j["library_version"] = library_version;
    j["exit_code"] = exit_code;
    if (include_wall_clock) j["wall_clock_ms"] = wall_clock_ms;
    j["config"] = config;
    j["outputs"] = outputs;
    ordered_json files_j = ordered_json::array();
    for (const FileRecord& f : files) {
      ordered_json fj;
      fj["path"] = f.path;
      fj["bytes"] = f.bytes;
      fj["fnv1a"] = f.fnv1a;
      files_j.push_back(fj);
    }
    j["files"] = files_j;
    j["warnings"] = warnings;
    return j;
  }
};

// Writes one data file under the run's output directory and records it.
inline void emit_file(RunManifest& man, const std::string& out_dir,
                      const std::string& name, const std::string& content) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::path p = fs::path(out_dir) / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  out.close();
  man.files.push_back({p.string(), content.size(), fnv1a_hex(content)});
}

// The manifest itself is always the last file of a run; its own entry is
// not listed (a file cannot contain its own hash).  The on-disk form drops
// the wall-clock entry so that a rerun with the same configuration and
// seed reproduces every file in the output directory byte for byte; the
// timing is still reported on standard output.
inline void write_manifest(const RunManifest& man, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
  out << man.to_json(false).dump(2) << "\n";
}

namespace exp_detail {

inline RunManifest start_manifest(const ResolvedExperiment& rx,
                                  const std::string& command) {
  RunManifest man;
  man.command = command;
  man.config = config_echo(rx);
  return man;
}

inline ordered_json interval_json(const GoodIntervalSearch& s) {
  ordered_json j;
  j["found"] = s.interval.has_value();
  j["failure"] = to_string(s.failure);
  if (s.interval) {
    const GoodInterval& g = *s.interval;
    j["left"] = g.left;
    j["right"] = g.right;
    j["length"] = g.length();
    j["left_index"] = g.left_index;
    j["right_index"] = g.right_index;
    j["left_position"] = g.left_position;
    j["right_position"] = g.right_position;
  }
  j["piece_length_bar"] = s.piece_length_bar;
  j["index_bar"] = s.index_bar;
  j["crowding_bar"] = s.crowding_bar;
  j["cells"] = s.cells;
  j["family_intervals"] = s.family_intervals;
  j["sparse_intervals"] = s.sparse_intervals;
  j["candidates"] = s.candidates;
  j["survivors"] = s.survivors;
  return j;
}

// Enumerates the apex's diagonals and builds the indexed partition of its
// direction sector.  Shared by the partition-facing commands.
struct ApexPartition {
  BeamForest forest;
  IndexedPartition partition{{}, 0, Angle(1.0)};
};

inline ApexPartition apex_partition(const ResolvedExperiment& rx,
                                    const ConvexPolygon& poly) {
  if (rx.cfg.apex >= poly.size())
    throw PreconditionError("config: apex vertex out of range");
  BeamOptions opts;
  opts.node_budget = rx.cfg.node_budget;
  opts.tol = rx.tol;
  ApexPartition ap;
  ap.forest = propagate_beams(poly, rx.cfg.apex, rx.cfg.n_max, opts);
  ap.partition =
      build_partition(ap.forest.diagonals,
                      Angle(poly.vertex_angle(rx.cfg.apex)), rx.cfg.n_max);
  return ap;
}

}  // namespace exp_detail

// ---------------------------------------------------------------------------
// Commands

// Full enumeration: per-vertex counts and the unoriented total, cumulative
// in the reflection count.  On budget exhaustion the deepest completed
// level is emitted and a warning recorded.
inline RunManifest cmd_complexity(const ResolvedExperiment& rx) {
  RunManifest man = exp_detail::start_manifest(rx, "complexity");
  ConvexPolygon poly = shape_polygon(rx);
  BeamOptions opts;
  opts.node_budget = rx.cfg.node_budget;
  opts.tol = rx.tol;

  int n_done = -1;
  ComplexityTable table;
  for (int n = rx.cfg.n_max; n >= 0; --n) {
    try {
      table = count_complexity(poly, n, opts);
      n_done = n;
      break;
    } catch (const BudgetExceeded&) {
      continue;  // retry shallower: emit the deepest affordable table
    }
  }
  if (n_done < 0) {
    man.exit_code = kExitBudget;
    man.warnings.push_back("node budget exhausted before any level completed");
    return man;
  }
  if (n_done < rx.cfg.n_max)
    man.warnings.push_back("node budget exhausted: table truncated to n = " +
                           std::to_string(n_done));

  std::ostringstream csv;
  csv << "n";
  for (int v = 0; v < poly.size(); ++v) csv << ",q_vertex" << v;
  csv << ",p\n";
  for (int n = 0; n <= n_done; ++n) {
    csv << n;
    for (int v = 0; v < poly.size(); ++v)
      csv << ',' << table.q_per_vertex[v][n];
    csv << ',' << table.p[n] << "\n";
  }
  emit_file(man, rx.cfg.out_dir, "complexity.csv", csv.str());

  man.outputs["n_completed"] = n_done;
  man.outputs["p_final"] = table.p.empty() ? 0 : table.p.back();
  return man;
}

// Growth-exponent fit of the complexity series, reported next to the
// combinatorial target exponent and its balance point.
inline RunManifest cmd_exponent(const ResolvedExperiment& rx) {
  RunManifest man = exp_detail::start_manifest(rx, "exponent");
  std::map<int, long> series;

  if (rx.cfg.synthetic_exponent > 0.0) {
    // Synthetic power law: exercises the fit in isolation.
    for (int n = std::max(1, rx.cfg.fit_n_min); n <= rx.cfg.n_max; ++n)
      series[n] = static_cast<long>(
          std::llround(std::pow(n, rx.cfg.synthetic_exponent)));
  } else {
    ConvexPolygon poly = shape_polygon(rx);
    BeamOptions opts;
    opts.node_budget = rx.cfg.node_budget;
    opts.tol = rx.tol;
    std::vector<long> p;
    try {
      p = count_P(poly, rx.cfg.n_max, opts);
    } catch (const BudgetExceeded&) {
      man.exit_code = kExitBudget;
      man.warnings.push_back("node budget exhausted during enumeration");
      return man;
    }
    for (int n = std::max(1, rx.cfg.fit_n_min); n <= rx.cfg.n_max; ++n)
      if (p[n] >= 1) series[n] = p[n];
  }

  if (series.size() < 5)
    throw PreconditionError(
        "exponent: fewer than 5 usable points; raise n_max");
  GrowthFit fit = fit_growth_exponent(series);

  std::ostringstream csv;
  csv << "n,p\n";
  for (auto [n, pn] : series) csv << n << ',' << pn << "\n";
  emit_file(man, rx.cfg.out_dir, "exponent_series.csv", csv.str());

  double target = 2.0 / std::sqrt(3.0);
  ordered_json rep;
  rep["fitted_exponent"] = fit.exponent;
  rep["r_squared"] = fit.r_squared;
  rep["degenerate"] = fit.degenerate;
  rep["critical_gamma"] = critical_gamma();
  rep["target_exponent"] = target;
  rep["margin"] = fit.exponent - target;
  rep["points"] = series.size();
  // A rational angle puts the shape in the quadratic-growth regime.
  double ratio = rx.angle / kPi;
  bool rational = false;
  for (int q = 1; q <= 64 && !rational; ++q)
    rational = std::abs(ratio * q - std::llround(ratio * q)) < 1e-12;
  rep["rational_angle"] = rational;
  emit_file(man, rx.cfg.out_dir, "exponent.json", rep.dump(2) + "\n");

  man.outputs = rep;
  return man;
}

// Indexed partition of the apex's direction sector.
inline RunManifest cmd_partition(const ResolvedExperiment& rx) {
  RunManifest man = exp_detail::start_manifest(rx, "partition");
  ConvexPolygon poly = shape_polygon(rx);
  exp_detail::ApexPartition ap;
  try {
    ap = exp_detail::apex_partition(rx, poly);
  } catch (const BudgetExceeded&) {
    man.exit_code = kExitBudget;
    man.warnings.push_back("node budget exhausted during enumeration");
    return man;
  }

  std::ostringstream csv;
  csv << "x,index\n";
  const std::vector<double>& xs = ap.partition.cut_points();
  const std::vector<int>& idx = ap.partition.indices();
  for (std::size_t i = 0; i < xs.size(); ++i)
    csv << g17(xs[i]) << ',' << idx[i] << "\n";
  emit_file(man, rx.cfg.out_dir, "partition.csv", csv.str());

  man.outputs["cuts"] = ap.partition.size();
  man.outputs["level"] = ap.partition.n();
  man.outputs["diameter"] = partition_diameter(ap.partition);
  man.outputs["sector_lo"] = ap.forest.theta_lo;
  man.outputs["sector_hi"] = ap.forest.theta_hi;
  man.outputs["nodes_processed"] = ap.forest.nodes_processed;
  return man;
}

// Partition plus the constructive long-high-index-piece search.
inline RunManifest cmd_good_interval(const ResolvedExperiment& rx) {
  RunManifest man = exp_detail::start_manifest(rx, "good-interval");
  ConvexPolygon poly = shape_polygon(rx);
  exp_detail::ApexPartition ap;
  try {
    ap = exp_detail::apex_partition(rx, poly);
  } catch (const BudgetExceeded&) {
    man.exit_code = kExitBudget;
    man.warnings.push_back("node budget exhausted during enumeration");
    return man;
  }
  GoodIntervalSearch s =
      find_good_interval(ap.partition, rx.cfg.gamma, rx.cfg.c);
  ordered_json rep = exp_detail::interval_json(s);
  rep["cuts"] = ap.partition.size();
  rep["level"] = ap.partition.n();
  emit_file(man, rx.cfg.out_dir, "good_interval.json", rep.dump(2) + "\n");
  man.outputs = rep;
  return man;
}

// Exact and bounded circle-rotation hitting numbers over the mu grid.  The
// rotation number is the level rotation as a fraction of the half turn.
inline RunManifest cmd_hitting(const ResolvedExperiment& rx) {
  RunManifest man = exp_detail::start_manifest(rx, "hitting");
  RotatedFamily fam(rx.rhombus, VertexPair::Horizontal, rx.tol);
  double alpha = fam.alpha() / kPi;
  alpha -= std::floor(alpha);
  if (alpha <= 0.0 || alpha >= 1.0)
    throw PreconditionError("hitting: degenerate rotation number");

  ContinuedFraction cf = cf_expand(alpha, 40);

  std::ostringstream csv;
  csv << "mu,l_exact,l_bound\n";
  ordered_json rows = ordered_json::array();
  for (double mu : rx.cfg.mu_grid) {
    if (mu >= 1.0) {
      man.warnings.push_back("hitting: skipped mu >= 1");
      continue;
    }
    HittingResult r = hitting_result(cf, mu, rx.cfg.hitting_cap);
    csv << g17(mu) << ',';
    if (r.L_exact) csv << *r.L_exact;
    else {
      csv << "";
      man.warnings.push_back("hitting: simulation cap exceeded at mu = " +
                             g17(mu));
    }
    csv << ',' << r.L_bound << "\n";
    ordered_json row;
    row["mu"] = mu;
    if (r.L_exact) row["l_exact"] = *r.L_exact;
    else row["l_exact"] = nullptr;
    row["l_bound"] = r.L_bound;
    rows.push_back(row);
  }
  emit_file(man, rx.cfg.out_dir, "hitting.csv", csv.str());

  ordered_json rep;
  rep["alpha"] = alpha;
  rep["quotients"] = cf.partial_quotients;
  rep["q"] = cf.q;
  rep["truncated"] = cf.truncated;
  if (cf.depth() >= 5) {
    ordered_json diag = ordered_json::array();
    for (auto [n, v] : khintchin_diagnostic(cf))
      diag.push_back(ordered_json{{"n", n}, {"value", v}});
    rep["khintchin_diagnostic"] = diag;
  }
  rep["rows"] = rows;
  emit_file(man, rx.cfg.out_dir, "hitting.json", rep.dump(2) + "\n");
  man.outputs["alpha"] = alpha;
  man.outputs["rows"] = rows.size();
  return man;
}

namespace exp_detail {

inline ordered_json point_json(Point2 p) {
  return ordered_json{{"x", p.x}, {"y", p.y}};
}

inline ordered_json certificate_json(const OrbitCertificate& c) {
  ordered_json j;
  j["first_visit_step"] = c.p;
  j["second_visit_step"] = c.q;
  j["period"] = c.period;
  j["even_period"] = c.even_period();
  j["level"] = c.point.level;
  j["side_id"] = c.point.side_id;
  j["s"] = c.point.s;
  j["closure_residual"] = c.closure_residual;
  j["closing"] = point_json(c.closing);
  return j;
}

inline ordered_json orbit_json(const PeriodicOrbit& o) {
  ordered_json j;
  j["start"] = point_json(o.start);
  j["direction"] = point_json(o.direction);
  j["period"] = o.period;
  j["length"] = o.length;
  j["closure_residual"] = o.closure_residual;
  j["itinerary"] = o.itinerary;
  return j;
}

inline ordered_json encounter_json(const VertexEncounter& e) {
  ordered_json j;
  j["drag_distance"] = e.drag_distance;
  j["vertex"] = e.vertex;
  j["after_reflections"] = e.after_reflections;
  j["point"] = point_json(e.point);
  ordered_json d;
  d["source_vertex"] = e.diagonal.source_vertex;
  d["target_vertex"] = e.diagonal.target_vertex;
  d["reflections"] = e.diagonal.reflections;
  d["direction"] = point_json(e.diagonal.direction);
  d["through_loop"] = e.diagonal.through_loop;
  d["verified"] = e.diagonal.verified;
  j["diagonal"] = d;
  return j;
}

// Beam interval of vertical measure mu hugging `corner` on an adjacent
// inflow side of level 0.  Returns nullopt when neither adjacent side is
// an inflow side (the corner faces away from the ray direction).
inline std::optional<BeamInterval> beam_at_corner(const RotatedFamily& fam,
                                                  int corner, double mu,
                                                  std::string* note) {
  ConvexPolygon poly = fam.level_polygon(0);
  int n = poly.size();
  std::vector<int> in = fam.inflow_sides(0);
  auto is_inflow = [&](int s) {
    return std::find(in.begin(), in.end(), s) != in.end();
  };
  for (int cand : {corner % n, (corner + n - 1) % n}) {
    if (!is_inflow(cand)) continue;
    double len = poly.side_length(cand);
    double slope = std::abs(poly.side_vector(cand).y) / len;  // dy per ds
    if (slope < 1e-12) continue;
    double ds = mu / slope;
    double off = 1e-6 * len;  // stay clear of the corner itself
    if (ds > len - 2.0 * off) {
      ds = len - 2.0 * off;
      if (note)
        *note = "beam clipped to the side: requested mu exceeds the side";
    }
    if (ds <= 0.0) continue;
    bool at_start = (cand == corner % n);  // sides start at their vertex
    double lo = at_start ? off : len - off - ds;
    return make_beam_interval(fam, 0, cand, lo, lo + ds);
  }
  return std::nullopt;
}

}  // namespace exp_detail

// Periodic-orbit search in a parallel beam of the development, optionally
// dragged to its first vertex encounter.
inline RunManifest cmd_dev_orbit(const ResolvedExperiment& rx) {
  RunManifest man = exp_detail::start_manifest(rx, "dev-orbit");
  RotatedFamily fam(rx.rhombus, VertexPair::Horizontal, rx.tol);
  double mu = rx.cfg.mu_grid.front() * fam.lambda_total(0);

  // The beam must hug a corner of the inflow boundary; starting from the
  // configured vertex, take the first corner with an inflow side.
  std::string note;
  std::optional<BeamInterval> iv;
  int corner_used = -1;
  int n_vertices = fam.level_polygon(0).size();
  for (int off = 0; off < n_vertices && !iv; ++off) {
    corner_used = (rx.cfg.apex + off) % n_vertices;
    iv = exp_detail::beam_at_corner(fam, corner_used, mu, &note);
  }
  if (!note.empty()) man.warnings.push_back(note);
  if (!iv)
    throw PreconditionError("dev-orbit: no corner on the inflow boundary");

  BeamSearchOptions opts;
  opts.max_steps = rx.cfg.search_max_steps;
  opts.growth_constant = rx.cfg.growth_constant;
  opts.growth_epsilon = rx.cfg.epsilon;
  BeamSearchResult r = find_periodic_in_beam(fam, *iv, opts);

  ordered_json rep;
  rep["corner"] = corner_used;
  rep["mu"] = iv->mu;
  rep["step_bound"] = r.step_bound;
  rep["steps"] = r.steps;
  switch (r.outcome) {
    case SearchOutcome::Found: rep["outcome"] = "found"; break;
    case SearchOutcome::Split: rep["outcome"] = "split"; break;
    case SearchOutcome::NotFound: rep["outcome"] = "not_found"; break;
  }
  if (r.outcome == SearchOutcome::Found) {
    rep["certificate"] = exp_detail::certificate_json(*r.certificate);
    PeriodicOrbit o = certificate_to_billiard_orbit(fam, *r.certificate);
    rep["orbit"] = exp_detail::orbit_json(o);
    if (rx.cfg.drag && o.period % 2 == 0) {
      double step = fam.diameter() / std::max(50, 10 * o.period);
      DragOutcome d =
          drag_orbit(fam.level_polygon(0), o, step, rx.cfg.max_drags, rx.tol);
      rep["drags_done"] = d.drags_done;
      rep["drag_max_residual"] = d.max_residual;
      if (d.encounter)
        rep["encounter"] = exp_detail::encounter_json(*d.encounter);
    }
  } else if (r.split) {
    ordered_json sj;
    sj["at_step"] = r.split->at_step;
    sj["level"] = r.split->level;
    sj["vertex"] = r.split->vertex;
    sj["lower_fraction"] = r.split->lower_fraction;
    rep["split"] = sj;
  }
  emit_file(man, rx.cfg.out_dir, "dev_orbit.json", rep.dump(2) + "\n");
  man.outputs = rep;
  return man;
}

// End-to-end narrative: enumerate, partition, search for a good interval,
// pick the beam width from (gamma, c, n), hunt a periodic orbit in a beam
// aligned with the interval's middle direction, drag it to a vertex, and
// check whether the induced connector's direction lands back inside the
// interval.  Every stage reports its outcome; only the exponent gate and
// the node budget abort the run.
inline RunManifest cmd_pipeline(const ResolvedExperiment& rx) {
  RunManifest man = exp_detail::start_manifest(rx, "pipeline");
  ordered_json rep;

  // Feasibility gate: the whole construction balances only below the
  // critical exponent.
  double gcrit = critical_gamma();
  rep["gamma"] = rx.cfg.gamma;
  rep["critical_gamma"] = gcrit;
  if (rx.cfg.gamma >= gcrit)
    throw PreconditionError(
        "pipeline: gamma must be below the critical exponent 2/sqrt(3) - 1");

  ConvexPolygon poly = rx.rhombus.polygon();
  exp_detail::ApexPartition ap;
  try {
    ap = exp_detail::apex_partition(rx, poly);
  } catch (const BudgetExceeded&) {
    man.exit_code = kExitBudget;
    man.warnings.push_back("node budget exhausted during enumeration");
    return man;
  }
  const int n = rx.cfg.n_max;
  ordered_json stage_enum;
  stage_enum["diagonals"] = ap.forest.diagonals.size();
  stage_enum["cuts"] = ap.partition.size();
  stage_enum["diameter"] = partition_diameter(ap.partition);
  stage_enum["nodes_processed"] = ap.forest.nodes_processed;
  rep["enumeration"] = stage_enum;

  GoodIntervalSearch gi =
      find_good_interval(ap.partition, rx.cfg.gamma, rx.cfg.c);
  rep["good_interval"] = exp_detail::interval_json(gi);

  // Beam width from the exponent bookkeeping.
  double t = rx.cfg.gamma + 1.0;
  double mu = 0.5 * rx.cfg.c * std::pow(n, 1.0 / t - t);
  rep["mu"] = mu;

  bool ran_search = false;
  if (gi.interval) {
    // Align the development with the interval's middle direction: rotate
    // the table so that direction becomes the horizontal ray direction.
    double mid = 0.5 * (gi.interval->left + gi.interval->right);
    double theta =
        ap.forest.theta_lo + mid * (ap.forest.theta_hi - ap.forest.theta_lo);
    rep["beam_direction"] = theta;
    Rhombus posed(rx.rhombus.half_horizontal, rx.rhombus.half_vertical,
                  PlanarIsometry::rotation(-theta, {0.0, 0.0}));
    RotatedFamily fam(posed, VertexPair::Horizontal, rx.tol);

    std::string note;
    std::optional<BeamInterval> iv = exp_detail::beam_at_corner(
        fam, rx.cfg.apex, mu * fam.lambda_total(0), &note);
    if (!note.empty()) man.warnings.push_back(note);
    if (!iv) {
      rep["search"] = {{"outcome", "no_inflow_side_at_apex"}};
    } else {
      ran_search = true;
      BeamSearchOptions opts;
      opts.max_steps = rx.cfg.search_max_steps;
      opts.growth_constant = rx.cfg.growth_constant;
      opts.growth_epsilon = rx.cfg.epsilon;
      BeamSearchResult r = find_periodic_in_beam(fam, *iv, opts);
      ordered_json sj;
      sj["mu_beam"] = iv->mu;
      sj["step_bound"] = r.step_bound;
      sj["steps"] = r.steps;
      switch (r.outcome) {
        case SearchOutcome::Found: sj["outcome"] = "found"; break;
        case SearchOutcome::Split: sj["outcome"] = "split"; break;
        case SearchOutcome::NotFound: sj["outcome"] = "not_found"; break;
      }
      if (r.outcome == SearchOutcome::Found) {
        sj["certificate"] = exp_detail::certificate_json(*r.certificate);
        PeriodicOrbit o = certificate_to_billiard_orbit(fam, *r.certificate);
        sj["orbit"] = exp_detail::orbit_json(o);

        double step = fam.diameter() / std::max(50, 10 * o.period);
        DragOutcome d = drag_orbit(fam.level_polygon(0), o, step,
                                   rx.cfg.max_drags, rx.tol);
        sj["drags_done"] = d.drags_done;
        sj["drag_max_residual"] = d.max_residual;
        if (d.encounter) {
          sj["encounter"] = exp_detail::encounter_json(*d.encounter);
          // Containment: map the connector's direction back to the
          // original frame and into the sector's unit coordinate.
          Point2 dir = d.encounter->diagonal.direction;
          double back = std::atan2(dir.y, dir.x) + theta;
          double unit = sector_coordinate(back, ap.forest.theta_lo,
                                          ap.forest.theta_hi);
          ordered_json cj;
          cj["direction_original_frame"] = back;
          cj["sector_coordinate"] = unit;
          cj["from_apex"] =
              d.encounter->diagonal.source_vertex == rx.cfg.apex;
          cj["inside_good_interval"] = gi.interval->left <= unit &&
                                       unit <= gi.interval->right &&
                                       d.encounter->diagonal.verified;
          sj["containment"] = cj;
        }
      } else if (r.split) {
        ordered_json spj;
        spj["at_step"] = r.split->at_step;
        spj["level"] = r.split->level;
        spj["vertex"] = r.split->vertex;
        sj["split"] = spj;
      }
      rep["search"] = sj;
    }
  }
  rep["search_ran"] = ran_search;

  emit_file(man, rx.cfg.out_dir, "pipeline.json", rep.dump(2) + "\n");
  man.outputs = rep;
  return man;
}

// Dispatch by command name, time the run, and write the manifest.  This is
// the single entry point the command-line tool and the tests go through.
inline RunManifest run_command(const ResolvedExperiment& rx,
                               const std::string& command) {
  auto t0 = std::chrono::steady_clock::now();
  RunManifest man;
  if (command == "complexity") man = cmd_complexity(rx);
  else if (command == "exponent") man = cmd_exponent(rx);
  else if (command == "partition") man = cmd_partition(rx);
  else if (command == "good-interval") man = cmd_good_interval(rx);
  else if (command == "hitting") man = cmd_hitting(rx);
  else if (command == "dev-orbit") man = cmd_dev_orbit(rx);
  else if (command == "pipeline") man = cmd_pipeline(rx);
  else
    throw PreconditionError("unknown command '" + command + "'");
  man.wall_clock_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  write_manifest(man, rx.cfg.out_dir);
  return man;
}

}  // namespace billiards
