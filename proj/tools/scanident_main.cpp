// scanident command-line front end: grid statistics, Monte Carlo
// calibration of critical values, block/rectangle identification, and the
// simulation experiments, all seeded and reproducible.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scanident/calibrate.hpp"
#include "scanident/csv.hpp"
#include "scanident/grid.hpp"
#include "scanident/identify.hpp"
#include "scanident/simulate.hpp"

namespace {

using namespace scanident;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;
constexpr int kExitMissingCalibration = 5;

constexpr std::uint64_t kDefaultCalibSeed = 123456789;

struct CommonOpts {
  index_t n = 10000;
  int dim = 1;
  double alpha = 0.05;
  double c = 6.0;
  double zeta = 0.5;
  index_t min_length = 0;
  std::string cache;
  int threads = default_threads();

  CalibrationStore store() const {
    return CalibrationStore(cache.empty() ? CalibrationStore::default_path()
                                          : std::filesystem::path(cache));
  }
};

void add_grid_flags(CLI::App* cmd, CommonOpts& o, bool with_alpha = true) {
  cmd->add_option("--n", o.n, "Domain side length");
  cmd->add_option("--dim", o.dim, "Dimension (1 or 2)")->check(CLI::IsMember({1, 2}));
  if (with_alpha) cmd->add_option("--alpha", o.alpha, "Significance level in (0,1)");
  cmd->add_option("--c", o.c, "Grid spacing constant c > 0");
  cmd->add_option("--zeta", o.zeta, "Grid spacing exponent zeta >= 0.5");
  cmd->add_option("--min-length", o.min_length,
                  "Drop candidates with |I| below this size (0 = off)");
  cmd->add_option("--cache", o.cache, "Calibration cache file (default $SCANIDENT_CACHE)");
  cmd->add_option("--threads", o.threads, "Worker thread cap");
}

CalibrationRecord obtain_record(const CalibrationKey& key, CalibrationStore& store, int threads,
                                bool auto_calibrate) {
  if (auto cached = store.lookup(key)) return *cached;
  if (!auto_calibrate) {
    throw MissingCalibrationError(
        "no calibration record for " + key.canonical() +
        "; run `scanident calibrate` with matching parameters first");
  }
  auto result = calibrate(key, store, threads);
  if (!result.warning.empty()) std::cerr << "warning: " << result.warning << "\n";
  return result.record;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse " + what + " entry '" + cell + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(what + " list is empty");
  return out;
}

std::vector<std::pair<index_t, index_t>> parse_shape_list(const std::string& text) {
  std::vector<std::pair<index_t, index_t>> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    const auto x = cell.find('x');
    if (x == std::string::npos) throw std::invalid_argument("shape must look like 30x40: " + cell);
    out.push_back({std::stoll(cell.substr(0, x)), std::stoll(cell.substr(x + 1))});
  }
  if (out.empty()) throw std::invalid_argument("shape list is empty");
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

// ---------------------------------------------------------------- calibrate

int cmd_calibrate(const CommonOpts& o, int reps, std::uint64_t seed, bool unpenalized) {
  CalibrationKey key{o.n, o.dim, !unpenalized, o.alpha, reps, seed, o.c, o.zeta, o.min_length};
  key.validate();
  auto store = o.store();
  auto result = calibrate(key, store, o.threads);
  if (!result.warning.empty()) std::cerr << "warning: " << result.warning << "\n";
  std::cerr << (result.from_cache ? "cache hit: " : "computed: ") << key.canonical() << "\n";
  std::cout << format_double(result.record.quantile) << "\n";
  return 0;
}

// ----------------------------------------------------------------- identify

struct IdentifyOpts {
  std::string input;
  std::string output;
  int calib_reps = 10000;
  std::uint64_t calib_seed = kDefaultCalibSeed;
  bool unpenalized = false;
  bool multi = false;
  int known_k = 0;
  int max_iterations = 100;
  bool negate = false;
};

int cmd_identify(const CommonOpts& o, const IdentifyOpts& io) {
  if (io.multi && o.dim == 2) {
    throw std::invalid_argument("--multi supports 1D data only");
  }
  CalibrationKey key{o.n,   o.dim, !io.unpenalized, o.alpha,     io.calib_reps,
                     io.calib_seed, o.c,   o.zeta,          o.min_length};
  key.validate();

  std::vector<std::pair<std::string, std::string>> kv = {
      {"command", "identify"},
      {"input", io.input},
      {"n", std::to_string(o.n)},
      {"dim", std::to_string(o.dim)},
      {"alpha", format_double(o.alpha)},
      {"penalized", io.unpenalized ? "0" : "1"},
      {"calib_reps", std::to_string(io.calib_reps)},
      {"calib_seed", std::to_string(io.calib_seed)},
      {"c", format_double(o.c)},
      {"zeta", format_double(o.zeta)},
      {"min_length", std::to_string(o.min_length)},
      {"negate", io.negate ? "1" : "0"},
      {"multi", io.multi ? "1" : "0"},
  };

  std::string csv;
  bool found = false;
  std::size_t regions = 0;
  if (o.dim == 1) {
    // Input problems surface as data errors before any calibration lookup.
    auto data = read_data_1d(io.input);
    if (static_cast<index_t>(data.size()) != o.n) {
      throw DataError("input has " + std::to_string(data.size()) + " values, expected n=" +
                      std::to_string(o.n));
    }
    if (io.negate) {
      for (auto& v : data) v = -v;
    }
    auto store = o.store();
    const auto record = obtain_record(key, store, o.threads, /*auto_calibrate=*/false);
    const auto set = ApproxSet::build(key.grid_params());
    if (io.multi) {
      MultiConfig cfg{0.0, io.max_iterations, io.known_k};
      const auto est = identify_multi(data, set, record, cfg, o.threads);
      csv = identification_to_csv(est, kv);
      found = est.found();
      regions = est.picks.size();
    } else {
      const auto est = identify_single(data, set, record, o.threads);
      csv = identification_to_csv(est, kv);
      found = est.found();
      regions = est.picks.size();
    }
  } else {
    auto field = read_data_2d(io.input);
    if (field.n != o.n) {
      throw DataError("input is " + std::to_string(field.n) + "x" + std::to_string(field.n) +
                      ", expected n=" + std::to_string(o.n));
    }
    if (io.negate) {
      for (auto& v : field.values) v = -v;
    }
    auto store = o.store();
    const auto record = obtain_record(key, store, o.threads, /*auto_calibrate=*/false);
    const auto set = ApproxSet::build(key.grid_params());
    const auto est = identify_single(field, set, record, o.threads);
    csv = identification_to_csv(est, kv);
    found = est.found();
    regions = est.picks.size();
  }

  atomic_write(io.output, csv);
  std::cout << "found=" << (found ? 1 : 0) << " regions=" << regions << " output=" << io.output
            << "\n";
  return 0;
}

// ----------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string experiment = "figure1";
  std::string spec_file;
  std::string output;
  int reps = 2000;
  std::uint64_t seed = 1;
  bool auto_calibrate = false;
  int calib_reps = 10000;
  std::uint64_t calib_seed = kDefaultCalibSeed;
};

struct CustomSpec {
  std::string kind = "mu";
  ExperimentSpec spec;
  std::vector<std::string> lines;  // verbatim, echoed into the output header
};

CustomSpec parse_spec_file(const std::string& path, double alpha, int reps, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file: " + path);
  CustomSpec cs;
  cs.spec.alpha = alpha;
  cs.spec.reps = reps;
  cs.spec.seed = seed;
  std::string line;
  while (std::getline(in, line)) {
    cs.lines.push_back(line);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("spec file: expected key=value: " + t);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "kind") {
      cs.kind = value;
    } else if (key == "n") {
      cs.spec.n = std::stoll(value);
    } else if (key == "dim") {
      cs.spec.dim = std::stoi(value);
    } else if (key == "alpha") {
      cs.spec.alpha = std::stod(value);
    } else if (key == "xs" || key == "ratios") {
      cs.spec.xs = parse_double_list(value, key);
    } else if (key == "lengths") {
      cs.spec.lengths.clear();
      for (double v : parse_double_list(value, key)) {
        cs.spec.lengths.push_back(static_cast<index_t>(v));
      }
    } else if (key == "shapes") {
      cs.spec.shapes = parse_shape_list(value);
    } else if (key == "reps") {
      cs.spec.reps = std::stoi(value);
    } else if (key == "seed") {
      cs.spec.seed = std::stoull(value);
    } else if (key == "c") {
      cs.spec.c = std::stod(value);
    } else if (key == "zeta") {
      cs.spec.zeta = std::stod(value);
    } else if (key == "min_length") {
      cs.spec.min_length = std::stoll(value);
    } else {
      throw std::invalid_argument("spec file: unknown key '" + key + "'");
    }
  }
  if (cs.kind != "mu" && cs.kind != "ratio" && cs.kind != "2d") {
    throw std::invalid_argument("spec file: kind must be mu, ratio, or 2d");
  }
  cs.spec.dim = cs.kind == "2d" ? 2 : 1;
  return cs;
}

std::vector<double> steps(double from, double to, double step) {
  std::vector<double> out;
  for (double x = from; x <= to + 1e-9; x += step) out.push_back(x);
  return out;
}

int cmd_simulate(const CommonOpts& o, const SimulateOpts& so) {
  CustomSpec cs;
  if (so.experiment == "figure1") {
    cs.kind = "mu";
    cs.spec = ExperimentSpec{10000, 1,  o.alpha, steps(1.5, 5.0, 0.5), {1000, 100},
                             {},    so.reps, so.seed, o.c, o.zeta, o.min_length};
  } else if (so.experiment == "figure2") {
    cs.kind = "ratio";
    cs.spec = ExperimentSpec{10000, 1, o.alpha, {10, 20, 50, 100, 200, 500, 1000}, {},
                             {},    so.reps, so.seed, o.c, o.zeta, o.min_length};
  } else if (so.experiment == "figure3") {
    cs.kind = "2d";
    cs.spec = ExperimentSpec{100, 2, o.alpha, steps(2.5, 6.0, 0.5), {},
                             {{30, 40}, {15, 80}}, so.reps, so.seed, o.c, o.zeta, o.min_length};
  } else if (so.experiment == "custom") {
    if (so.spec_file.empty()) throw std::invalid_argument("--experiment custom requires --spec");
    cs = parse_spec_file(so.spec_file, o.alpha, so.reps, so.seed);
  } else {
    throw std::invalid_argument("unknown experiment '" + so.experiment +
                                "' (figure1|figure2|figure3|custom)");
  }

  const auto& spec = cs.spec;
  CalibrationKey gamma_key{spec.n, spec.dim, true,  spec.alpha, so.calib_reps,
                           so.calib_seed, spec.c, spec.zeta, spec.min_length};
  gamma_key.validate();
  auto store = o.store();
  const auto gamma = obtain_record(gamma_key, store, o.threads, so.auto_calibrate);
  const auto tau = obtain_record(gamma_key.twin(), store, o.threads, so.auto_calibrate);

  SimilarityCurve curve;
  if (cs.kind == "mu") {
    curve = run_curve_mu(spec, gamma, tau, o.threads);
  } else if (cs.kind == "ratio") {
    curve = run_curve_ratio(spec, gamma, tau, o.threads);
  } else {
    curve = run_curve_2d(spec, gamma, tau, o.threads);
  }

  curve.provenance.insert(curve.provenance.begin(), {"experiment", so.experiment});
  curve.provenance.emplace_back("calib_reps", std::to_string(so.calib_reps));
  curve.provenance.emplace_back("calib_seed", std::to_string(so.calib_seed));
  curve.provenance.emplace_back("gamma", format_double(gamma.quantile));
  curve.provenance.emplace_back("tau", format_double(tau.quantile));
  for (const auto& line : cs.lines) curve.provenance.emplace_back("spec", line);

  atomic_write(so.output, curve_to_csv(curve));
  std::cout << "wrote " << so.output << " (" << curve.xs.size() << " points, " << curve.series.size()
            << " series)\n";
  return 0;
}

// --------------------------------------------------------------- grid-stats

int cmd_grid_stats(const CommonOpts& o, const std::string& output) {
  GridParams params{o.n, o.dim, o.c, o.zeta, o.min_length};
  params.validate();
  const auto set = ApproxSet::build(params);
  const auto stats = grid_stats(set);
  const std::vector<std::pair<std::string, std::string>> kv = {
      {"command", "grid-stats"},
      {"n", std::to_string(o.n)},
      {"dim", std::to_string(o.dim)},
      {"c", format_double(o.c)},
      {"zeta", format_double(o.zeta)},
      {"min_length", std::to_string(o.min_length)},
      {"ell_max", std::to_string(set.ell_max())},
      {"small_cutoff", std::to_string(set.small_cutoff())},
  };
  const std::string csv = grid_stats_to_csv(stats, kv);
  if (output.empty()) {
    std::cout << csv;
  } else {
    atomic_write(output, csv);
    std::cout << "wrote " << output << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized multiscale scan identification of block and rectangular signals"};
  app.require_subcommand(1);

  CommonOpts copt;
  int calib_reps = 10000;
  std::uint64_t calib_seed = kDefaultCalibSeed;
  bool calib_unpenalized = false;
  auto* cal = app.add_subcommand("calibrate", "Estimate the critical value by Monte Carlo");
  add_grid_flags(cal, copt);
  cal->add_option("--reps", calib_reps, "Monte Carlo replicates (>= 100)");
  cal->add_option("--seed", calib_seed, "Replicate stream seed");
  cal->add_flag("--unpenalized", calib_unpenalized, "Calibrate tau (max without penalty)");

  CommonOpts iopt;
  IdentifyOpts io;
  auto* ident = app.add_subcommand("identify", "Identify signal support in a data file");
  add_grid_flags(ident, iopt);
  ident->add_option("--input", io.input, "Input data file")->required();
  ident->add_option("--output", io.output, "Result CSV path")->required();
  ident->add_option("--calib-reps", io.calib_reps, "Calibration record: replicates");
  ident->add_option("--calib-seed", io.calib_seed, "Calibration record: seed");
  ident->add_flag("--unpenalized", io.unpenalized, "Use the unpenalized procedure");
  ident->add_flag("--multi", io.multi, "Iterative multi-signal identification (1D only)");
  ident->add_option("--known-k", io.known_k, "Stop after this many selections (0 = off)");
  ident->add_option("--max-iterations", io.max_iterations, "Safety cap for --multi");
  ident->add_flag("--negate", io.negate, "Negate the input (non-positive signals)");

  CommonOpts sopt;
  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Run a similarity-curve experiment");
  add_grid_flags(sim, sopt);
  sim->add_option("--experiment", so.experiment, "figure1 | figure2 | figure3 | custom");
  sim->add_option("--spec", so.spec_file, "Spec file for --experiment custom");
  sim->add_option("--output", so.output, "Curve CSV path")->required();
  sim->add_option("--reps", so.reps, "Replicates per grid point");
  sim->add_option("--seed", so.seed, "Experiment stream seed");
  sim->add_flag("--auto-calibrate", so.auto_calibrate, "Compute missing critical values");
  sim->add_option("--calib-reps", so.calib_reps, "Calibration replicates");
  sim->add_option("--calib-seed", so.calib_seed, "Calibration seed");

  CommonOpts gopt;
  std::string gs_output;
  auto* gs = app.add_subcommand("grid-stats", "Summarize the approximation set");
  add_grid_flags(gs, gopt, /*with_alpha=*/false);
  gs->add_option("--output", gs_output, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (cal->parsed()) return cmd_calibrate(copt, calib_reps, calib_seed, calib_unpenalized);
    if (ident->parsed()) return cmd_identify(iopt, io);
    if (sim->parsed()) return cmd_simulate(sopt, so);
    if (gs->parsed()) return cmd_grid_stats(gopt, gs_output);
  } catch (const MissingCalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingCalibration;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
