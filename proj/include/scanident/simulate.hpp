#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scanident/calibrate.hpp"
#include "scanident/common.hpp"
#include "scanident/grid.hpp"
#include "scanident/identify.hpp"
#include "scanident/parallel.hpp"
#include "scanident/prefix.hpp"
#include "scanident/rng.hpp"
#include "scanident/scan.hpp"

namespace scanident {

enum class Placement { Fixed, UniformRandom };

struct PlantedInterval {
  Interval region;  // under random placement only the length is kept
  double mu = 0.0;
};

struct PlantedRect {
  Rect region;  // under random placement only the shape is kept
  double mu = 0.0;
};

struct SignalSpec1D {
  std::vector<PlantedInterval> regions;
  Placement placement = Placement::Fixed;
  // Minimum index gap enforced between regions under random placement.
  index_t min_spacing = 0;
};

struct SignalSpec2D {
  std::vector<PlantedRect> regions;
  Placement placement = Placement::Fixed;
};

struct GeneratedData1D {
  std::vector<double> values;
  std::vector<Interval> regions;  // as placed
};

struct GeneratedData2D {
  Field2D field;
  std::vector<Rect> regions;
};

namespace detail {

inline index_t gap_between(const Interval& a, const Interval& b) {
  if (intersects(a, b)) return -1;
  return a.start < b.start ? b.start - a.end : a.start - b.end;
}

inline std::vector<Interval> place_1d(index_t n, const SignalSpec1D& spec, GaussianStream& g) {
  std::vector<Interval> placed;
  placed.reserve(spec.regions.size());
  if (spec.placement == Placement::Fixed) {
    for (const auto& r : spec.regions) {
      if (!r.region.valid_in(n)) throw std::invalid_argument("generate: region does not fit in domain");
      for (const auto& p : placed) {
        if (intersects(p, r.region)) throw std::invalid_argument("generate: regions overlap");
      }
      placed.push_back(r.region);
    }
    return placed;
  }
  // Uniform over feasible configurations via rejection sampling.
  constexpr int kMaxAttempts = 200000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    placed.clear();
    bool ok = true;
    for (const auto& r : spec.regions) {
      const index_t len = r.region.length();
      if (len < 1 || len > n) throw std::invalid_argument("generate: region does not fit in domain");
      const index_t start = static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(n - len + 1)));
      const Interval cand{start, start + len};
      for (const auto& p : placed) {
        if (gap_between(p, cand) < spec.min_spacing) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
      placed.push_back(cand);
    }
    if (ok) return placed;
  }
  throw std::invalid_argument("generate: could not place regions with required spacing");
}

inline std::vector<Rect> place_2d(index_t n, const SignalSpec2D& spec, GaussianStream& g) {
  std::vector<Rect> placed;
  placed.reserve(spec.regions.size());
  if (spec.placement == Placement::Fixed) {
    for (const auto& r : spec.regions) {
      if (!r.region.valid_in(n)) throw std::invalid_argument("generate: region does not fit in domain");
      for (const auto& p : placed) {
        if (intersects(p, r.region)) throw std::invalid_argument("generate: regions overlap");
      }
      placed.push_back(r.region);
    }
    return placed;
  }
  constexpr int kMaxAttempts = 200000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    placed.clear();
    bool ok = true;
    for (const auto& r : spec.regions) {
      const index_t w = r.region.width();
      const index_t h = r.region.height();
      if (w < 1 || w > n || h < 1 || h > n) {
        throw std::invalid_argument("generate: region does not fit in domain");
      }
      const index_t j1 = static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(n - w + 1)));
      const index_t k1 = static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(n - h + 1)));
      const Rect cand{j1, j1 + w, k1, k1 + h};
      for (const auto& p : placed) {
        if (intersects(p, cand)) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
      placed.push_back(cand);
    }
    if (ok) return placed;
  }
  throw std::invalid_argument("generate: could not place disjoint regions");
}

}  // namespace detail

// Standard normal field plus the specified amplitude on each region.
// Placement draws happen before the noise, so a (spec, n, seed) triple names
// one dataset regardless of caller.
inline GeneratedData1D generate(const SignalSpec1D& spec, index_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate: n must be positive");
  GaussianStream g(derive_stream(seed, 0x1d));
  GeneratedData1D out;
  out.regions = detail::place_1d(n, spec, g);
  out.values.resize(static_cast<std::size_t>(n));
  for (auto& v : out.values) v = g();
  for (std::size_t r = 0; r < out.regions.size(); ++r) {
    const auto& region = out.regions[r];
    for (index_t i = region.start; i < region.end; ++i) {
      out.values[static_cast<std::size_t>(i)] += spec.regions[r].mu;
    }
  }
  return out;
}

inline GeneratedData2D generate(const SignalSpec2D& spec, index_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate: n must be positive");
  GaussianStream g(derive_stream(seed, 0x2d));
  GeneratedData2D out;
  out.regions = detail::place_2d(n, spec, g);
  out.field.n = n;
  out.field.values.resize(static_cast<std::size_t>(n * n));
  for (auto& v : out.field.values) v = g();
  for (std::size_t r = 0; r < out.regions.size(); ++r) {
    const auto& region = out.regions[r];
    for (index_t j = region.j1; j < region.j2; ++j) {
      for (index_t k = region.k1; k < region.k2; ++k) {
        out.field.at(j, k) += spec.regions[r].mu;
      }
    }
  }
  return out;
}

// One experiment sweep: signal strengths (or size ratios) against mean
// similarity for the penalized and unpenalized procedures.
struct ExperimentSpec {
  index_t n = 10000;
  int dim = 1;
  double alpha = 0.05;
  // Strength grid mu*sqrt(|I*|) for the mu sweeps, or the n/|I*| ratios for
  // the ratio sweep.
  std::vector<double> xs;
  std::vector<index_t> lengths;                      // 1D panels
  std::vector<std::pair<index_t, index_t>> shapes;   // 2D panels (width, height)
  int reps = 2000;
  std::uint64_t seed = 1;
  double c = 6.0;
  double zeta = 0.5;
  index_t min_length = 0;

  GridParams grid() const { return GridParams{n, dim, c, zeta, min_length}; }
};

struct Series {
  std::string name;
  std::vector<double> mean;
  std::vector<double> se;
};

struct SimilarityCurve {
  std::string x_label;
  std::vector<double> xs;
  std::vector<Series> series;
  int reps = 0;
  std::vector<std::pair<std::string, std::string>> provenance;
};

namespace detail {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe summarize(const std::vector<double>& values) {
  MeanSe out;
  const auto count = static_cast<double>(values.size());
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / count;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
  }
  return out;
}

inline void check_records(const ExperimentSpec& spec, const CalibrationRecord& gamma,
                          const CalibrationRecord& tau) {
  if (!gamma.key.penalized || tau.key.penalized) {
    throw std::invalid_argument("run_curve: need a penalized (gamma) and an unpenalized (tau) record");
  }
  for (const auto* rec : {&gamma, &tau}) {
    if (rec->key.grid_params() != spec.grid() || rec->key.alpha != spec.alpha) {
      throw MissingCalibrationError("run_curve: calibration record does not match experiment spec");
    }
  }
}

inline void spec_provenance(const ExperimentSpec& spec, SimilarityCurve& curve) {
  auto add = [&](std::string k, std::string v) { curve.provenance.emplace_back(std::move(k), std::move(v)); };
  add("n", std::to_string(spec.n));
  add("dim", std::to_string(spec.dim));
  add("alpha", std::to_string(spec.alpha));
  add("reps", std::to_string(spec.reps));
  add("seed", std::to_string(spec.seed));
  add("c", std::to_string(spec.c));
  add("zeta", std::to_string(spec.zeta));
  add("min_length", std::to_string(spec.min_length));
}

// Shared 1D panel sweep. mu_of(point) fixes the amplitude, len_of(point) the
// signal length; signal location is redrawn uniformly in every replicate.
template <typename MuOf, typename LenOf>
void sweep_1d(const ExperimentSpec& spec, const ApproxSet& set, const CalibrationRecord& gamma,
              const CalibrationRecord& tau, std::uint64_t panel_tag, const MuOf& mu_of,
              const LenOf& len_of, int threads, Series& pen, Series& unpen) {
  const auto reps = static_cast<std::size_t>(spec.reps);
  std::vector<double> psim(reps), usim(reps);
  for (std::size_t point = 0; point < spec.xs.size(); ++point) {
    const index_t len = len_of(point);
    const double mu = mu_of(point, len);
    parallel_for(reps, threads, [&](std::size_t r) {
      const SignalSpec1D sig{{{Interval{0, len}, mu}}, Placement::UniformRandom};
      const auto data =
          generate(sig, spec.n, derive_stream(spec.seed, panel_tag, point, r));
      const PrefixSum1D agg(data.values);
      const auto dual = scan_both(agg, set);
      const Interval& truth = data.regions.front();
      psim[r] = dual.penalized.value >= gamma.quantile
                    ? 1.0 - hamming_distance(*dual.penalized.argmax, truth)
                    : 0.0;
      usim[r] = dual.unpenalized.value >= tau.quantile
                    ? 1.0 - hamming_distance(*dual.unpenalized.argmax, truth)
                    : 0.0;
    });
    const auto p = summarize(psim);
    const auto u = summarize(usim);
    pen.mean.push_back(p.mean);
    pen.se.push_back(p.se);
    unpen.mean.push_back(u.mean);
    unpen.se.push_back(u.se);
  }
}

}  // namespace detail

// Similarity against signal strength mu*sqrt(|I*|), one panel per length.
inline SimilarityCurve run_curve_mu(const ExperimentSpec& spec, const CalibrationRecord& gamma,
                                    const CalibrationRecord& tau, int threads = default_threads()) {
  if (spec.dim != 1) throw std::invalid_argument("run_curve_mu: dim must be 1");
  if (spec.xs.empty() || spec.lengths.empty()) {
    throw std::invalid_argument("run_curve_mu: xs and lengths must be non-empty");
  }
  if (spec.reps < 1) throw std::invalid_argument("run_curve_mu: reps must be positive");
  detail::check_records(spec, gamma, tau);

  const ApproxSet set = ApproxSet::build(spec.grid());
  SimilarityCurve curve;
  curve.x_label = "mu_sqrt_size";
  curve.xs = spec.xs;
  curve.reps = spec.reps;
  detail::spec_provenance(spec, curve);

  for (std::size_t panel = 0; panel < spec.lengths.size(); ++panel) {
    const index_t len = spec.lengths[panel];
    Series pen{"penalized_len" + std::to_string(len), {}, {}};
    Series unpen{"unpenalized_len" + std::to_string(len), {}, {}};
    detail::sweep_1d(
        spec, set, gamma, tau, panel,
        [&](std::size_t point, index_t l) { return spec.xs[point] / std::sqrt(static_cast<double>(l)); },
        [&](std::size_t) { return len; }, threads, pen, unpen);
    curve.series.push_back(std::move(pen));
    curve.series.push_back(std::move(unpen));
  }
  return curve;
}

// The ratio experiment's strength rule mu*sqrt(|I*|) as a function of the
// signal length, exposed for tests.
inline double strength_rule(index_t n, index_t len) {
  return 1.2 * penalty(n, len, 1) + 0.1;
}

// Similarity against the ratio n/|I*| at the prescribed strength
// mu*sqrt(|I*|) = 1.2 sqrt(2 log(e n / |I*|)) + 0.1.
inline SimilarityCurve run_curve_ratio(const ExperimentSpec& spec, const CalibrationRecord& gamma,
                                       const CalibrationRecord& tau, int threads = default_threads()) {
  if (spec.dim != 1) throw std::invalid_argument("run_curve_ratio: dim must be 1");
  if (spec.xs.empty()) throw std::invalid_argument("run_curve_ratio: xs (ratios) must be non-empty");
  if (spec.reps < 1) throw std::invalid_argument("run_curve_ratio: reps must be positive");
  detail::check_records(spec, gamma, tau);

  const ApproxSet set = ApproxSet::build(spec.grid());
  SimilarityCurve curve;
  curve.x_label = "ratio";
  curve.xs = spec.xs;
  curve.reps = spec.reps;
  detail::spec_provenance(spec, curve);

  auto len_of = [&](std::size_t point) {
    const double ratio = spec.xs[point];
    if (!(ratio > 1.0)) throw std::invalid_argument("run_curve_ratio: ratios must exceed 1");
    const auto len = static_cast<index_t>(std::llround(static_cast<double>(spec.n) / ratio));
    if (len < 1 || len > spec.n) throw std::invalid_argument("run_curve_ratio: ratio out of range");
    return len;
  };
  Series pen{"penalized", {}, {}};
  Series unpen{"unpenalized", {}, {}};
  detail::sweep_1d(
      spec, set, gamma, tau, 0,
      [&](std::size_t, index_t len) {
        return strength_rule(spec.n, len) / std::sqrt(static_cast<double>(len));
      },
      len_of, threads, pen, unpen);
  curve.series.push_back(std::move(pen));
  curve.series.push_back(std::move(unpen));
  return curve;
}

// 2D similarity against mu*sqrt(|I*|), one panel per rectangle shape.
inline SimilarityCurve run_curve_2d(const ExperimentSpec& spec, const CalibrationRecord& gamma,
                                    const CalibrationRecord& tau, int threads = default_threads()) {
  if (spec.dim != 2) throw std::invalid_argument("run_curve_2d: dim must be 2");
  if (spec.xs.empty() || spec.shapes.empty()) {
    throw std::invalid_argument("run_curve_2d: xs and shapes must be non-empty");
  }
  if (spec.reps < 1) throw std::invalid_argument("run_curve_2d: reps must be positive");
  detail::check_records(spec, gamma, tau);

  const ApproxSet set = ApproxSet::build(spec.grid());
  SimilarityCurve curve;
  curve.x_label = "mu_sqrt_size";
  curve.xs = spec.xs;
  curve.reps = spec.reps;
  detail::spec_provenance(spec, curve);

  const auto reps = static_cast<std::size_t>(spec.reps);
  std::vector<double> psim(reps), usim(reps);
  for (std::size_t panel = 0; panel < spec.shapes.size(); ++panel) {
    const auto [w, h] = spec.shapes[panel];
    const std::string tag = std::to_string(w) + "x" + std::to_string(h);
    Series pen{"penalized_" + tag, {}, {}};
    Series unpen{"unpenalized_" + tag, {}, {}};
    for (std::size_t point = 0; point < spec.xs.size(); ++point) {
      const double mu = spec.xs[point] / std::sqrt(static_cast<double>(w * h));
      parallel_for(reps, threads, [&](std::size_t r) {
        const SignalSpec2D sig{{{Rect{0, w, 0, h}, mu}}, Placement::UniformRandom};
        const auto data = generate(sig, spec.n, derive_stream(spec.seed, panel, point, r));
        const SummedAreaTable agg(data.field);
        const auto dual = scan_both(agg, set);
        const Rect& truth = data.regions.front();
        psim[r] = dual.penalized.value >= gamma.quantile
                      ? 1.0 - hamming_distance(*dual.penalized.argmax, truth)
                      : 0.0;
        usim[r] = dual.unpenalized.value >= tau.quantile
                      ? 1.0 - hamming_distance(*dual.unpenalized.argmax, truth)
                      : 0.0;
      });
      const auto p = detail::summarize(psim);
      const auto u = detail::summarize(usim);
      pen.mean.push_back(p.mean);
      pen.se.push_back(p.se);
      unpen.mean.push_back(u.mean);
      unpen.se.push_back(u.se);
    }
    curve.series.push_back(std::move(pen));
    curve.series.push_back(std::move(unpen));
  }
  return curve;
}

}  // namespace scanident
