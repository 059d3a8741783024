#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "scanident/grid.hpp"
#include "scanident/parallel.hpp"
#include "scanident/prefix.hpp"

namespace scanident {

// Scale penalty sqrt(2 log(e n^dim / size)), natural log.
inline double penalty(index_t n, index_t size, int dim) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("penalty: dim must be 1 or 2");
  const double max_size = std::pow(static_cast<double>(n), dim);
  if (size < 1 || static_cast<double>(size) > max_size) {
    throw std::invalid_argument("penalty: size out of range [1, n^dim]");
  }
  const double log_term =
      1.0 + dim * std::log(static_cast<double>(n)) - std::log(static_cast<double>(size));
  return std::sqrt(2.0 * log_term);
}

// Normalized window sum Y(I) = sum of data over I / sqrt(|I|).
inline double window_stat(const PrefixSum1D& agg, const Interval& region) {
  return agg.sum(region) / std::sqrt(static_cast<double>(region.length()));
}

inline double window_stat(const SummedAreaTable& agg, const Rect& region) {
  return agg.sum(region) / std::sqrt(static_cast<double>(region.area()));
}

template <typename Region>
struct ScanOutcome {
  double value = -std::numeric_limits<double>::infinity();
  std::optional<Region> argmax;

  // True when every candidate was excluded (or the set is empty).
  bool empty() const { return !argmax.has_value(); }
};

// Penalized and unpenalized maxima from a single pass over the candidates.
template <typename Region>
struct DualScan {
  ScanOutcome<Region> penalized;
  ScanOutcome<Region> unpenalized;
};

namespace detail {

template <typename Region>
struct Best {
  double value = -std::numeric_limits<double>::infinity();
  std::optional<Region> argmax;

  void offer(double v, const Region& r) {
    if (v > value || (v == value && (!argmax || tie_break_less(r, *argmax)))) {
      value = v;
      argmax = r;
    }
  }

  // Merging two partial results applies the same order as offer(), so the
  // combined outcome is independent of how candidates were partitioned.
  void merge(const Best& other) {
    if (other.argmax) offer(other.value, *other.argmax);
  }
};

template <typename Region>
inline bool hits_exclusion(const Region& r, std::span<const Region> exclude) {
  for (const Region& e : exclude) {
    if (intersects(r, e)) return true;
  }
  return false;
}

// --- 1D kernels. Penalties and 1/sqrt(len) are hoisted per length.

struct Kernel1D {
  const PrefixSum1D& agg;
  const ApproxSet& set;
  std::span<const Interval> exclude;

  template <bool Dual>
  void lengths_pass(std::span<const index_t> lengths, index_t spacing, Best<Interval>& pen,
                    Best<Interval>& unpen, bool penalized) const {
    const index_t n = set.params().n;
    const double* cum = agg.raw();
    for (index_t len : lengths) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(len));
      const double shift = (Dual || penalized) ? penalty(n, len, 1) : 0.0;
      if (exclude.empty()) {
        // Track the best raw window sum; normalization is monotone for a
        // fixed length so one running max serves both statistics.
        double best_sum = -std::numeric_limits<double>::infinity();
        index_t best_j = -1;
        for (index_t j = 0; j + len <= n; j += spacing) {
          const double s = cum[j + len] - cum[j];
          if (s > best_sum) {
            best_sum = s;
            best_j = j;
          }
        }
        if (best_j < 0) continue;
        const Interval cand{best_j, best_j + len};
        const double y = best_sum * inv;
        if constexpr (Dual) {
          pen.offer(y - shift, cand);
          unpen.offer(y, cand);
        } else {
          pen.offer(penalized ? y - shift : y, cand);
        }
      } else {
        for (index_t j = 0; j + len <= n; j += spacing) {
          const Interval cand{j, j + len};
          if (hits_exclusion<Interval>(cand, exclude)) continue;
          const double y = (cum[j + len] - cum[j]) * inv;
          if constexpr (Dual) {
            pen.offer(y - shift, cand);
            unpen.offer(y, cand);
          } else {
            pen.offer(penalized ? y - shift : y, cand);
          }
        }
      }
    }
  }
};

// Fixed-length max with ascending-j ties resolving to the smallest start:
// strict > above keeps the earliest j, which matches tie_break_less because
// within one length the end is determined by the start.

// --- 2D kernels. Constants are hoisted per (width, height) pair; clipped
// edge rectangles recompute their own area and penalty.

struct Kernel2D {
  const SummedAreaTable& agg;
  const ApproxSet& set;
  std::span<const Rect> exclude;

  template <bool Dual>
  void layer_pass(const ScaleLayer2D& layer, Best<Rect>& pen, Best<Rect>& unpen,
                  bool penalized) const {
    const index_t n = set.params().n;
    const index_t min_len = set.params().min_length;
    for (index_t dr = 1; dr <= layer.dr_hi; ++dr) {
      for (index_t ds = 1; ds <= layer.ds_hi; ++ds) {
        const index_t w = dr * layer.d1;
        const index_t h = ds * layer.d2;
        double inv = 0.0;
        double shift = 0.0;
        if (w <= n && h <= n) {
          inv = 1.0 / std::sqrt(static_cast<double>(w * h));
          shift = (Dual || penalized) ? penalty(n, w * h, 2) : 0.0;
        }
        for (index_t r1 = 0; r1 <= layer.r1_hi; ++r1) {
          const index_t j1 = r1 * layer.d1;
          const index_t j2 = std::min(j1 + w, n);
          const bool jc = (j2 != j1 + w);
          const double* rowa = agg.row(j1);
          const double* rowb = agg.row(j2);
          for (index_t s1 = 0; s1 <= layer.s1_hi; ++s1) {
            const index_t k1 = s1 * layer.d2;
            const index_t k2 = std::min(k1 + h, n);
            const Rect cand{j1, j2, k1, k2};
            if (min_len > 0 && cand.area() < min_len) continue;
            if (!exclude.empty() && hits_exclusion<Rect>(cand, exclude)) continue;
            const double sum = rowb[k2] - rowb[k1] - rowa[k2] + rowa[k1];
            double y;
            double cand_shift;
            if (jc || k2 != k1 + h) {
              const index_t area = cand.area();
              y = sum / std::sqrt(static_cast<double>(area));
              cand_shift = (Dual || penalized) ? penalty(n, area, 2) : 0.0;
            } else {
              y = sum * inv;
              cand_shift = shift;
            }
            if constexpr (Dual) {
              pen.offer(y - cand_shift, cand);
              unpen.offer(y, cand);
            } else {
              pen.offer(penalized ? y - cand_shift : y, cand);
            }
          }
        }
      }
    }
  }

  template <bool Dual>
  void small_pass(index_t w, Best<Rect>& pen, Best<Rect>& unpen, bool penalized) const {
    const index_t n = set.params().n;
    const index_t cutoff = set.small_cutoff();
    const index_t min_len = set.params().min_length;
    const index_t hmax = std::min(n, cutoff / w);
    for (index_t h = 1; h <= hmax; ++h) {
      if (min_len > 0 && w * h < min_len) continue;
      const double inv = 1.0 / std::sqrt(static_cast<double>(w * h));
      const double shift = (Dual || penalized) ? penalty(n, w * h, 2) : 0.0;
      for (index_t j1 = 0; j1 + w <= n; ++j1) {
        const double* rowa = agg.row(j1);
        const double* rowb = agg.row(j1 + w);
        if (exclude.empty()) {
          double best_sum = -std::numeric_limits<double>::infinity();
          index_t best_k = -1;
          for (index_t k1 = 0; k1 + h <= n; ++k1) {
            const double s = rowb[k1 + h] - rowb[k1] - rowa[k1 + h] + rowa[k1];
            if (s > best_sum) {
              best_sum = s;
              best_k = k1;
            }
          }
          if (best_k < 0) continue;
          const Rect cand{j1, j1 + w, best_k, best_k + h};
          const double y = best_sum * inv;
          if constexpr (Dual) {
            pen.offer(y - shift, cand);
            unpen.offer(y, cand);
          } else {
            pen.offer(penalized ? y - shift : y, cand);
          }
        } else {
          for (index_t k1 = 0; k1 + h <= n; ++k1) {
            const Rect cand{j1, j1 + w, k1, k1 + h};
            if (hits_exclusion<Rect>(cand, exclude)) continue;
            const double s = rowb[k1 + h] - rowb[k1] - rowa[k1 + h] + rowa[k1];
            const double y = s * inv;
            if constexpr (Dual) {
              pen.offer(y - shift, cand);
              unpen.offer(y, cand);
            } else {
              pen.offer(penalized ? y - shift : y, cand);
            }
          }
        }
      }
    }
  }
};

}  // namespace detail

// Maximize Y(I) - penalty(|I|) (or plain Y(I) when penalized is false) over
// the candidate set, skipping candidates that intersect any excluded region.
// Ties resolve deterministically (smallest start then end in 1D,
// lexicographic in 2D). Layers may be scanned concurrently; the merged
// outcome does not depend on the schedule.
inline ScanOutcome<Interval> scan_max(const PrefixSum1D& agg, const ApproxSet& set,
                                      bool penalized, std::span<const Interval> exclude = {},
                                      int threads = 1) {
  if (!set.is_1d()) throw std::invalid_argument("scan_max: set is not 1D");
  if (agg.n() != set.params().n) throw std::invalid_argument("scan_max: aggregate/set size mismatch");
  detail::Kernel1D kernel{agg, set, exclude};

  const auto& layers = set.layers_1d();
  const index_t lmin = std::max<index_t>(1, set.params().min_length);
  std::vector<index_t> small_lengths;
  for (index_t len = lmin; len <= set.small_cutoff(); ++len) small_lengths.push_back(len);

  const std::size_t tasks = layers.size() + small_lengths.size();
  std::vector<detail::Best<Interval>> partial(tasks);
  parallel_for(tasks, threads, [&](std::size_t t) {
    detail::Best<Interval> unused;
    if (t < layers.size()) {
      kernel.lengths_pass<false>(layers[t].lengths, layers[t].spacing, partial[t], unused, penalized);
    } else {
      const index_t len = small_lengths[t - layers.size()];
      kernel.lengths_pass<false>(std::span<const index_t>(&len, 1), 1, partial[t], unused, penalized);
    }
  });

  detail::Best<Interval> best;
  for (const auto& p : partial) best.merge(p);
  return {best.value, best.argmax};
}

inline ScanOutcome<Rect> scan_max(const SummedAreaTable& agg, const ApproxSet& set,
                                  bool penalized, std::span<const Rect> exclude = {},
                                  int threads = 1) {
  if (set.is_1d()) throw std::invalid_argument("scan_max: set is not 2D");
  if (agg.n() != set.params().n) throw std::invalid_argument("scan_max: aggregate/set size mismatch");
  detail::Kernel2D kernel{agg, set, exclude};

  const auto& layers = set.layers_2d();
  const index_t small_wmax = std::min(set.params().n, set.small_cutoff());
  const std::size_t tasks = layers.size() + static_cast<std::size_t>(small_wmax);
  std::vector<detail::Best<Rect>> partial(tasks);
  parallel_for(tasks, threads, [&](std::size_t t) {
    detail::Best<Rect> unused;
    if (t < layers.size()) {
      kernel.layer_pass<false>(layers[t], partial[t], unused, penalized);
    } else {
      kernel.small_pass<false>(static_cast<index_t>(t - layers.size()) + 1, partial[t], unused,
                               penalized);
    }
  });

  detail::Best<Rect> best;
  for (const auto& p : partial) best.merge(p);
  return {best.value, best.argmax};
}

// Both statistics from one sweep; used by calibration and the experiment
// harness where each replicate feeds the penalized and unpenalized
// procedures on the same noise field.
inline DualScan<Interval> scan_both(const PrefixSum1D& agg, const ApproxSet& set,
                                    int threads = 1) {
  if (!set.is_1d()) throw std::invalid_argument("scan_both: set is not 1D");
  if (agg.n() != set.params().n) throw std::invalid_argument("scan_both: aggregate/set size mismatch");
  detail::Kernel1D kernel{agg, set, {}};

  const auto& layers = set.layers_1d();
  const index_t lmin = std::max<index_t>(1, set.params().min_length);
  std::vector<index_t> small_lengths;
  for (index_t len = lmin; len <= set.small_cutoff(); ++len) small_lengths.push_back(len);

  const std::size_t tasks = layers.size() + small_lengths.size();
  std::vector<detail::Best<Interval>> pen(tasks), unpen(tasks);
  parallel_for(tasks, threads, [&](std::size_t t) {
    if (t < layers.size()) {
      kernel.lengths_pass<true>(layers[t].lengths, layers[t].spacing, pen[t], unpen[t], true);
    } else {
      const index_t len = small_lengths[t - layers.size()];
      kernel.lengths_pass<true>(std::span<const index_t>(&len, 1), 1, pen[t], unpen[t], true);
    }
  });

  detail::Best<Interval> bp, bu;
  for (std::size_t t = 0; t < tasks; ++t) {
    bp.merge(pen[t]);
    bu.merge(unpen[t]);
  }
  return {{bp.value, bp.argmax}, {bu.value, bu.argmax}};
}

inline DualScan<Rect> scan_both(const SummedAreaTable& agg, const ApproxSet& set,
                                int threads = 1) {
  if (set.is_1d()) throw std::invalid_argument("scan_both: set is not 2D");
  if (agg.n() != set.params().n) throw std::invalid_argument("scan_both: aggregate/set size mismatch");
  detail::Kernel2D kernel{agg, set, {}};

  const auto& layers = set.layers_2d();
  const index_t small_wmax = std::min(set.params().n, set.small_cutoff());
  const std::size_t tasks = layers.size() + static_cast<std::size_t>(small_wmax);
  std::vector<detail::Best<Rect>> pen(tasks), unpen(tasks);
  parallel_for(tasks, threads, [&](std::size_t t) {
    if (t < layers.size()) {
      kernel.layer_pass<true>(layers[t], pen[t], unpen[t], true);
    } else {
      kernel.small_pass<true>(static_cast<index_t>(t - layers.size()) + 1, pen[t], unpen[t], true);
    }
  });

  detail::Best<Rect> bp, bu;
  for (std::size_t t = 0; t < tasks; ++t) {
    bp.merge(pen[t]);
    bu.merge(unpen[t]);
  }
  return {{bp.value, bp.argmax}, {bu.value, bu.argmax}};
}

// Streamed per-candidate statistics: f(region, y_stat, penalty_term).
// Nothing is materialized; intended for diagnostics and test oracles.
template <typename F>
void scan_visit(const PrefixSum1D& agg, const ApproxSet& set, F&& f) {
  const index_t n = set.params().n;
  set.for_each_interval([&](const Interval& c) {
    f(c, window_stat(agg, c), penalty(n, c.length(), 1));
  });
}

template <typename F>
void scan_visit(const SummedAreaTable& agg, const ApproxSet& set, F&& f) {
  const index_t n = set.params().n;
  set.for_each_rect([&](const Rect& c) {
    f(c, window_stat(agg, c), penalty(n, c.area(), 2));
  });
}

}  // namespace scanident
