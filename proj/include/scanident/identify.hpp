#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "scanident/calibrate.hpp"
#include "scanident/common.hpp"
#include "scanident/grid.hpp"
#include "scanident/prefix.hpp"
#include "scanident/scan.hpp"

namespace scanident {

enum class IdentificationKind { Empty, Single, Multi };

template <typename Region>
struct Pick {
  Region region;
  double stat = 0.0;
  int iteration = 0;
};

// Outcome of an identification procedure. Empty exactly when the first-scan
// maximum fell below the threshold; multi picks are pairwise disjoint and
// listed in selection order with non-increasing statistics.
template <typename Region>
struct Identification {
  IdentificationKind kind = IdentificationKind::Empty;
  std::vector<Pick<Region>> picks;
  double max_stat = 0.0;
  double threshold = 0.0;

  bool found() const { return kind != IdentificationKind::Empty; }
};

struct MultiConfig {
  // 0 = take alpha from the calibration record; otherwise must match it.
  double alpha = 0.0;
  int max_iterations = 100;
  // Stop after this many selections when the true signal count is known;
  // 0 = threshold-only stopping.
  int known_k = 0;

  void validate() const {
    if (alpha != 0.0 && !(alpha > 0.0 && alpha < 1.0)) {
      throw std::invalid_argument("MultiConfig: alpha must be in (0,1)");
    }
    if (max_iterations < 1) {
      throw std::invalid_argument("MultiConfig: max_iterations must be at least 1");
    }
    if (known_k < 0) {
      throw std::invalid_argument("MultiConfig: known_k must be non-negative");
    }
  }
};

// Similarity used by the experiment harness: 1 - D for a single recovered
// region, 0 when nothing was identified. Multi results need per-signal
// matching instead.
template <typename Region>
double similarity(const Identification<Region>& est, const Region& truth) {
  if (est.kind == IdentificationKind::Multi) {
    throw std::invalid_argument("similarity: defined for empty/single results only");
  }
  if (est.kind == IdentificationKind::Empty) return 0.0;
  return 1.0 - hamming_distance(est.picks.front().region, truth);
}

// Multi-signal evaluation metric: max over true signals of the distance to
// the closest estimate. 1 when nothing was recovered.
template <typename Region>
double max_min_distance(const Identification<Region>& est, std::span<const Region> truths) {
  double worst = 0.0;
  for (const Region& t : truths) {
    double best = 1.0;
    for (const auto& pick : est.picks) {
      best = std::min(best, hamming_distance(pick.region, t));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

namespace detail {

inline void check_calibration(const ApproxSet& set, const CalibrationRecord& calib) {
  if (calib.key.grid_params() != set.params()) {
    throw std::invalid_argument("identify: calibration key does not match grid parameters");
  }
}

template <typename Region, typename Aggregate>
Identification<Region> single_from_scan(const Aggregate& agg, const ApproxSet& set,
                                        const CalibrationRecord& calib, int threads) {
  check_calibration(set, calib);
  const auto out = scan_max(agg, set, calib.key.penalized, {}, threads);
  Identification<Region> result;
  result.max_stat = out.value;
  result.threshold = calib.quantile;
  if (!out.empty() && out.value >= calib.quantile) {
    result.kind = IdentificationKind::Single;
    result.picks.push_back({*out.argmax, out.value, 1});
  }
  return result;
}

}  // namespace detail

// Single-signal identification: empty when the maximal (un)penalized
// statistic stays below the calibrated threshold, otherwise the argmax
// candidate.
inline Identification<Interval> identify_single(std::span<const double> data, const ApproxSet& set,
                                                const CalibrationRecord& calib, int threads = 1) {
  if (!set.is_1d()) throw std::invalid_argument("identify_single: set is not 1D");
  if (static_cast<index_t>(data.size()) != set.params().n) {
    throw DataError("identify_single: data length does not match n");
  }
  const PrefixSum1D agg(data);
  return detail::single_from_scan<Interval>(agg, set, calib, threads);
}

inline Identification<Rect> identify_single(const Field2D& data, const ApproxSet& set,
                                            const CalibrationRecord& calib, int threads = 1) {
  if (set.is_1d()) throw std::invalid_argument("identify_single: set is not 2D");
  if (data.n != set.params().n ||
      static_cast<index_t>(data.values.size()) != data.n * data.n) {
    throw DataError("identify_single: field shape does not match n x n");
  }
  const SummedAreaTable agg(data);
  return detail::single_from_scan<Rect>(agg, set, calib, threads);
}

// Multi-signal identification: repeatedly select the penalized argmax and
// remove every candidate intersecting it, until the running maximum drops
// below gamma_n(alpha), candidates run out, or the iteration cap is hit.
inline Identification<Interval> identify_multi(std::span<const double> data, const ApproxSet& set,
                                               const CalibrationRecord& calib,
                                               const MultiConfig& config = {}, int threads = 1) {
  if (!set.is_1d()) {
    throw std::invalid_argument("identify_multi: multivariate multi-signal identification is unsupported");
  }
  if (!calib.key.penalized) {
    throw std::invalid_argument("identify_multi: requires a penalized calibration record");
  }
  config.validate();
  if (config.alpha != 0.0 && config.alpha != calib.key.alpha) {
    throw std::invalid_argument("identify_multi: config alpha disagrees with calibration record");
  }
  detail::check_calibration(set, calib);
  if (static_cast<index_t>(data.size()) != set.params().n) {
    throw DataError("identify_multi: data length does not match n");
  }

  const PrefixSum1D agg(data);
  Identification<Interval> result;
  result.threshold = calib.quantile;

  std::vector<Interval> excluded;
  for (int it = 1; it <= config.max_iterations; ++it) {
    const auto out = scan_max(agg, set, true, excluded, threads);
    if (it == 1) result.max_stat = out.value;
    if (out.empty() || out.value < calib.quantile) break;
    result.picks.push_back({*out.argmax, out.value, it});
    excluded.push_back(*out.argmax);
    if (config.known_k > 0 && static_cast<int>(result.picks.size()) >= config.known_k) break;
  }
  result.kind = result.picks.empty() ? IdentificationKind::Empty : IdentificationKind::Multi;
  return result;
}

}  // namespace scanident
