#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scanident/common.hpp"
#include "scanident/interval.hpp"

namespace scanident {

// Parameters of the multiscale approximation set. All logarithms are natural;
// scale widths m_ell are kept as exact reals while grid spacings are integer
// ceilings, so rounding is explicit and testable.
struct GridParams {
  index_t n = 0;
  int dim = 1;
  double c = 6.0;
  double zeta = 0.5;
  // 0 = no restriction; otherwise candidates with |I| < min_length are
  // dropped (the exponential-family grid restriction).
  index_t min_length = 0;

  void validate() const {
    if (dim != 1 && dim != 2) {
      throw std::invalid_argument("GridParams: dim must be 1 or 2");
    }
    if (n < 2) {
      throw std::invalid_argument("GridParams: n must be at least 2");
    }
    if (!(c > 0.0)) {
      throw std::invalid_argument("GridParams: c must be positive");
    }
    if (!(zeta >= 0.5)) {
      throw std::invalid_argument("GridParams: zeta must be at least 0.5");
    }
    if (min_length < 0) {
      throw std::invalid_argument("GridParams: min_length must be non-negative");
    }
    if (dim == 2 && n > 65535) {
      // Candidate coordinates are packed into 16-bit lanes for
      // deduplication; O(n^2 log^2 n) scans are impractical beyond this
      // size regardless.
      throw std::invalid_argument("GridParams: 2D grids support n <= 65535");
    }
  }

  friend bool operator==(const GridParams&, const GridParams&) = default;
};

// One dyadic scale of the 1D set: intervals (j, k] with j, k on the spacing
// grid and m < k - j <= 2m.
struct ScaleLayer1D {
  int ell = 0;
  double m = 0.0;        // n * 2^-ell, exact
  index_t spacing = 1;   // d_ell = ceil(m / (c * ell^zeta))
  std::vector<index_t> lengths;  // admissible lengths, ascending
};

// One (ell, i) sublayer of the 2D set. Coordinates are integer multiples of
// the two spacings; the multiplier ranges below reproduce the per-layer
// cardinality 2 ell^3 2^ell. Out-of-domain corners are clipped to [0, n].
struct ScaleLayer2D {
  int ell = 0;
  int sub = 0;           // i in 0..ell
  double m = 0.0;        // area scale n^2 * 2^-ell, exact
  index_t d1 = 1;
  index_t d2 = 1;
  index_t r1_hi = 0;     // j1 = r1 * d1, r1 in 0..r1_hi
  index_t dr_hi = 0;     // j2 = (r1 + dr) * d1 clipped, dr in 1..dr_hi
  index_t s1_hi = 0;     // k1 = s1 * d2, s1 in 0..s1_hi
  index_t ds_hi = 0;     // k2 = (s1 + ds) * d2 clipped, ds in 1..ds_hi
};

// The enumerated candidate family. Construction is deterministic; a built
// set is immutable and safe to share across threads. Candidates are streamed
// on demand rather than materialized, so memory stays proportional to the
// layer metadata even when the set has O(n log n) members.
class ApproxSet {
 public:
  static ApproxSet build(const GridParams& params) {
    params.validate();
    ApproxSet set;
    set.params_ = params;
    if (params.dim == 1) {
      set.build_1d();
    } else {
      set.build_2d();
    }
    set.count_cache_ = std::make_shared<std::atomic<std::uint64_t>>(0);
    if (params.dim == 1) {
      set.count_cache_->store(set.count_1d_dedup());
    }
    return set;
  }

  const GridParams& params() const { return params_; }
  bool is_1d() const { return params_.dim == 1; }
  int ell_max() const { return ell_max_; }

  // 1D: largest admissible length in I_small. 2D: largest admissible area.
  index_t small_cutoff() const { return small_cutoff_; }

  const std::vector<ScaleLayer1D>& layers_1d() const { return layers1d_; }
  const std::vector<ScaleLayer2D>& layers_2d() const { return layers2d_; }

  // Deduplicated cardinality. 1D layers are length-disjoint so this is a
  // closed form; 2D sets are deduplicated by streaming once (memoized).
  std::uint64_t total_count() const {
    std::uint64_t cached = count_cache_->load();
    if (cached != 0) return cached;
    const std::uint64_t computed = is_1d() ? count_1d_dedup() : count_2d_dedup();
    count_cache_->store(computed);
    return computed;
  }

  // --- streaming enumeration (raw: 2D layers may repeat clipped duplicates)

  template <typename F>
  void for_each_interval(F&& f) const {
    for (const auto& layer : layers1d_) layer_candidates(layer, f);
    small_candidates_1d(f);
  }

  template <typename F>
  void for_each_rect(F&& f) const {
    for (const auto& layer : layers2d_) layer_candidates(layer, f);
    small_candidates_2d(f);
  }

  template <typename F>
  void layer_candidates(const ScaleLayer1D& layer, F&& f) const {
    const index_t n = params_.n;
    for (index_t len : layer.lengths) {
      for (index_t j = 0; j + len <= n; j += layer.spacing) {
        f(Interval{j, j + len});
      }
    }
  }

  template <typename F>
  void layer_candidates(const ScaleLayer2D& layer, F&& f) const {
    const index_t n = params_.n;
    const index_t min_len = params_.min_length;
    for (index_t r1 = 0; r1 <= layer.r1_hi; ++r1) {
      const index_t j1 = r1 * layer.d1;
      for (index_t dr = 1; dr <= layer.dr_hi; ++dr) {
        const index_t j2 = std::min((r1 + dr) * layer.d1, n);
        for (index_t s1 = 0; s1 <= layer.s1_hi; ++s1) {
          const index_t k1 = s1 * layer.d2;
          for (index_t ds = 1; ds <= layer.ds_hi; ++ds) {
            const index_t k2 = std::min((s1 + ds) * layer.d2, n);
            const Rect r{j1, j2, k1, k2};
            if (min_len > 0 && r.area() < min_len) continue;
            f(r);
          }
        }
      }
    }
  }

  template <typename F>
  void small_candidates_1d(F&& f) const {
    const index_t n = params_.n;
    const index_t lmin = std::max<index_t>(1, params_.min_length);
    for (index_t len = lmin; len <= small_cutoff_; ++len) {
      for (index_t j = 0; j + len <= n; ++j) {
        f(Interval{j, j + len});
      }
    }
  }

  template <typename F>
  void small_candidates_2d(F&& f) const {
    const index_t n = params_.n;
    const index_t min_len = params_.min_length;
    for (index_t w = 1; w <= std::min(n, small_cutoff_); ++w) {
      const index_t hmax = std::min(n, small_cutoff_ / w);
      for (index_t h = 1; h <= hmax; ++h) {
        if (min_len > 0 && w * h < min_len) continue;
        for (index_t j1 = 0; j1 + w <= n; ++j1) {
          for (index_t k1 = 0; k1 + h <= n; ++k1) {
            f(Rect{j1, j1 + w, k1, k1 + h});
          }
        }
      }
    }
  }

  // --- materialized, deduplicated candidate lists (tests and small n)

  std::vector<Interval> collect_intervals() const {
    std::vector<Interval> out;
    for_each_interval([&](const Interval& i) { out.push_back(i); });
    std::sort(out.begin(), out.end(),
              [](const Interval& a, const Interval& b) { return tie_break_less(a, b); });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<Rect> collect_rects() const {
    std::vector<std::uint64_t> packed;
    for_each_rect([&](const Rect& r) { packed.push_back(pack(r)); });
    std::sort(packed.begin(), packed.end());
    packed.erase(std::unique(packed.begin(), packed.end()), packed.end());
    std::vector<Rect> out;
    out.reserve(packed.size());
    for (std::uint64_t p : packed) out.push_back(unpack(p));
    return out;
  }

  // Raw (pre-dedup) candidate count of one layer or of the small layer.
  std::uint64_t raw_count(const ScaleLayer1D& layer) const {
    std::uint64_t count = 0;
    const index_t n = params_.n;
    for (index_t len : layer.lengths) {
      count += static_cast<std::uint64_t>((n - len) / layer.spacing) + 1;
    }
    return count;
  }

  std::uint64_t raw_count(const ScaleLayer2D& layer) const {
    if (params_.min_length == 0) {
      return static_cast<std::uint64_t>(layer.r1_hi + 1) * static_cast<std::uint64_t>(layer.dr_hi) *
             static_cast<std::uint64_t>(layer.s1_hi + 1) * static_cast<std::uint64_t>(layer.ds_hi);
    }
    std::uint64_t count = 0;
    layer_candidates(layer, [&](const Rect&) { ++count; });
    return count;
  }

  std::uint64_t raw_count_small() const {
    std::uint64_t count = 0;
    if (is_1d()) {
      small_candidates_1d([&](const Interval&) { ++count; });
    } else {
      small_candidates_2d([&](const Rect&) { ++count; });
    }
    return count;
  }

  // Distinct candidates within one 2D layer (clipping can collide tuples).
  std::uint64_t dedup_count(const ScaleLayer2D& layer) const {
    std::vector<std::uint64_t> packed;
    layer_candidates(layer, [&](const Rect& r) { packed.push_back(pack(r)); });
    std::sort(packed.begin(), packed.end());
    return static_cast<std::uint64_t>(
        std::unique(packed.begin(), packed.end()) - packed.begin());
  }

  static std::uint64_t pack(const Rect& r) {
    return (static_cast<std::uint64_t>(r.j1) << 48) | (static_cast<std::uint64_t>(r.k1) << 32) |
           (static_cast<std::uint64_t>(r.j2) << 16) | static_cast<std::uint64_t>(r.k2);
  }

  static Rect unpack(std::uint64_t p) {
    Rect r;
    r.j1 = static_cast<index_t>((p >> 48) & 0xffff);
    r.k1 = static_cast<index_t>((p >> 32) & 0xffff);
    r.j2 = static_cast<index_t>((p >> 16) & 0xffff);
    r.k2 = static_cast<index_t>(p & 0xffff);
    return r;
  }

 private:
  void build_1d() {
    const index_t n = params_.n;
    ell_max_ = floor_log2(static_cast<double>(n) / std::log(static_cast<double>(n)));
    double m = static_cast<double>(n);
    for (int ell = 1; ell <= ell_max_; ++ell) {
      m = static_cast<double>(n) * std::ldexp(1.0, -ell);
      ScaleLayer1D layer;
      layer.ell = ell;
      layer.m = m;
      layer.spacing =
          std::max<index_t>(1, static_cast<index_t>(std::ceil(m / (params_.c * std::pow(static_cast<double>(ell), params_.zeta)))));
      const index_t lmin = std::max<index_t>(1, params_.min_length);
      index_t r = std::max<index_t>(1, static_cast<index_t>(m / static_cast<double>(layer.spacing)));
      for (;; ++r) {
        const index_t len = r * layer.spacing;
        if (static_cast<double>(len) <= m) continue;
        if (static_cast<double>(len) > 2.0 * m || len > n) break;
        if (len >= lmin) layer.lengths.push_back(len);
      }
      if (!layer.lengths.empty()) layers1d_.push_back(std::move(layer));
    }
    const double m_small = static_cast<double>(n) * std::ldexp(1.0, -ell_max_);
    small_cutoff_ = std::min<index_t>(static_cast<index_t>(std::floor(m_small)), n);
  }

  void build_2d() {
    const index_t n = params_.n;
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    ell_max_ = floor_log2(n2 / std::log(static_cast<double>(n)));
    for (int ell = 1; ell <= ell_max_; ++ell) {
      const double sqrt_ell = std::sqrt(static_cast<double>(ell));
      for (int i = 0; i <= ell; ++i) {
        ScaleLayer2D layer;
        layer.ell = ell;
        layer.sub = i;
        layer.m = n2 * std::ldexp(1.0, -ell);
        layer.d1 = std::max<index_t>(
            1, static_cast<index_t>(std::ceil(static_cast<double>(n) * std::ldexp(1.0, i - ell) / sqrt_ell)));
        layer.d2 = std::max<index_t>(
            1, static_cast<index_t>(std::ceil(static_cast<double>(n) * std::ldexp(1.0, -i) / sqrt_ell)));
        layer.dr_hi = static_cast<index_t>(std::floor(sqrt_ell));
        layer.ds_hi = static_cast<index_t>(std::floor(2.0 * sqrt_ell));
        const index_t r1_cap = static_cast<index_t>(std::floor(sqrt_ell * std::ldexp(1.0, ell - i)));
        const index_t s1_cap = static_cast<index_t>(std::floor(sqrt_ell * std::ldexp(1.0, i)));
        // Keep j1, k1 strictly inside the domain; multipliers beyond that
        // would only produce zero-area rectangles after clipping.
        layer.r1_hi = std::min(r1_cap, (n - 1) / layer.d1);
        layer.s1_hi = std::min(s1_cap, (n - 1) / layer.d2);
        layers2d_.push_back(layer);
      }
    }
    const double m_small = n2 * std::ldexp(1.0, -ell_max_);
    small_cutoff_ = std::min<index_t>(static_cast<index_t>(std::floor(m_small)), n * n);
  }

  // Largest ell >= 0 with 2^ell <= x; avoids log2 edge cases near powers of 2.
  static int floor_log2(double x) {
    int ell = 0;
    while (std::ldexp(1.0, ell + 1) <= x) ++ell;
    return ell;
  }

  std::uint64_t count_1d_dedup() const {
    // Scale layers have pairwise disjoint length windows and the small layer
    // sits below all of them, so raw counts add up without duplication.
    std::uint64_t total = raw_count_small();
    for (const auto& layer : layers1d_) total += raw_count(layer);
    return total;
  }

  std::uint64_t count_2d_dedup() const {
    std::vector<std::uint64_t> packed;
    for_each_rect([&](const Rect& r) { packed.push_back(pack(r)); });
    std::sort(packed.begin(), packed.end());
    return static_cast<std::uint64_t>(
        std::unique(packed.begin(), packed.end()) - packed.begin());
  }

  GridParams params_;
  int ell_max_ = 0;
  index_t small_cutoff_ = 0;
  std::vector<ScaleLayer1D> layers1d_;
  std::vector<ScaleLayer2D> layers2d_;
  std::shared_ptr<std::atomic<std::uint64_t>> count_cache_;
};

inline ApproxSet build_grid_1d(const GridParams& params) {
  if (params.dim != 1) throw std::invalid_argument("build_grid_1d: params.dim must be 1");
  return ApproxSet::build(params);
}

inline ApproxSet build_grid_2d(const GridParams& params) {
  if (params.dim != 2) throw std::invalid_argument("build_grid_2d: params.dim must be 2");
  return ApproxSet::build(params);
}

namespace detail {

template <typename Region, typename ForEach>
Region best_approximation_impl(const ForEach& for_each, const Region& target) {
  double best_d = std::numeric_limits<double>::infinity();
  std::optional<Region> best;
  for_each([&](const Region& cand) {
    const double d = hamming_distance(cand, target);
    if (d < best_d || (d == best_d && best && tie_break_less(cand, *best))) {
      best_d = d;
      best = cand;
    }
  });
  if (!best) throw std::runtime_error("best_approximation: approximation set is empty");
  return *best;
}

}  // namespace detail

// Candidate minimizing D(., target), ties broken lexicographically. Used by
// the approximation-quality property tests, not by the identification path.
inline Interval best_approximation(const ApproxSet& set, const Interval& target) {
  if (!set.is_1d()) throw std::invalid_argument("best_approximation: set is not 1D");
  if (!target.valid_in(set.params().n)) {
    throw std::invalid_argument("best_approximation: target outside domain");
  }
  return detail::best_approximation_impl<Interval>(
      [&](auto&& f) { set.for_each_interval(f); }, target);
}

inline Rect best_approximation(const ApproxSet& set, const Rect& target) {
  if (set.is_1d()) throw std::invalid_argument("best_approximation: set is not 2D");
  if (!target.valid_in(set.params().n)) {
    throw std::invalid_argument("best_approximation: target outside domain");
  }
  return detail::best_approximation_impl<Rect>(
      [&](auto&& f) { set.for_each_rect(f); }, target);
}

// Per-layer summary of a built set.
struct LayerStats {
  std::string scale;    // "ell" (1D), "ell:i" (2D), or "small"
  std::string spacing;  // "d" (1D) or "d1:d2" (2D)
  std::uint64_t raw = 0;
  std::uint64_t dedup = 0;
};

struct GridStats {
  std::vector<LayerStats> layers;
  std::uint64_t total_raw = 0;
  std::uint64_t total_dedup = 0;
  std::uint64_t memory_bytes = 0;
};

inline GridStats grid_stats(const ApproxSet& set) {
  GridStats stats;
  std::uint64_t memory = sizeof(ApproxSet);
  if (set.is_1d()) {
    for (const auto& layer : set.layers_1d()) {
      const std::uint64_t raw = set.raw_count(layer);
      stats.layers.push_back({std::to_string(layer.ell), std::to_string(layer.spacing), raw, raw});
      stats.total_raw += raw;
      memory += sizeof(layer) + layer.lengths.capacity() * sizeof(index_t);
    }
  } else {
    for (const auto& layer : set.layers_2d()) {
      const std::uint64_t raw = set.raw_count(layer);
      const std::uint64_t dedup = set.dedup_count(layer);
      stats.layers.push_back({std::to_string(layer.ell) + ":" + std::to_string(layer.sub),
                              std::to_string(layer.d1) + ":" + std::to_string(layer.d2), raw, dedup});
      stats.total_raw += raw;
      memory += sizeof(layer);
    }
  }
  const std::uint64_t small_raw = set.raw_count_small();
  stats.layers.push_back({"small", "1", small_raw, small_raw});
  stats.total_raw += small_raw;
  stats.total_dedup = set.total_count();
  stats.memory_bytes = memory;
  return stats;
}

}  // namespace scanident
