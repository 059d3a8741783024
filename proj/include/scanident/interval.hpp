#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "scanident/common.hpp"

namespace scanident {

// Half-open 1D index range (start, end]; length = end - start >= 1.
struct Interval {
  index_t start = 0;
  index_t end = 0;

  index_t length() const { return end - start; }
  bool valid_in(index_t n) const { return 0 <= start && start < end && end <= n; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Axis-aligned half-open rectangle (j1, j2] x (k1, k2]; area >= 1.
struct Rect {
  index_t j1 = 0;
  index_t j2 = 0;
  index_t k1 = 0;
  index_t k2 = 0;

  index_t width() const { return j2 - j1; }
  index_t height() const { return k2 - k1; }
  index_t area() const { return width() * height(); }
  bool valid_in(index_t n) const {
    return 0 <= j1 && j1 < j2 && j2 <= n && 0 <= k1 && k1 < k2 && k2 <= n;
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Deterministic selection order: smallest start, then smallest end.
inline bool tie_break_less(const Interval& a, const Interval& b) {
  return std::tie(a.start, a.end) < std::tie(b.start, b.end);
}

// Deterministic selection order: lexicographic (j1, k1, j2, k2).
inline bool tie_break_less(const Rect& a, const Rect& b) {
  return std::tie(a.j1, a.k1, a.j2, a.k2) < std::tie(b.j1, b.k1, b.j2, b.k2);
}

inline index_t intersection_size(const Interval& a, const Interval& b) {
  const index_t lo = std::max(a.start, b.start);
  const index_t hi = std::min(a.end, b.end);
  return hi > lo ? hi - lo : 0;
}

inline index_t intersection_size(const Rect& a, const Rect& b) {
  const index_t w = std::min(a.j2, b.j2) - std::max(a.j1, b.j1);
  const index_t h = std::min(a.k2, b.k2) - std::max(a.k1, b.k1);
  return (w > 0 && h > 0) ? w * h : 0;
}

// Half-open overlap test: (a,b] meets (c,d] iff a < d and c < b.
inline bool intersects(const Interval& a, const Interval& b) {
  return a.start < b.end && b.start < a.end;
}

inline bool intersects(const Rect& a, const Rect& b) {
  return a.j1 < b.j2 && b.j1 < a.j2 && a.k1 < b.k2 && b.k1 < a.k2;
}

inline index_t region_size(const Interval& a) { return a.length(); }
inline index_t region_size(const Rect& a) { return a.area(); }

// D(I1, I2) = 1 - |I1 n I2| / sqrt(|I1| |I2|), in [0, 1].
// 0 iff the regions coincide, 1 iff they are disjoint.
template <typename Region>
inline double hamming_distance(const Region& a, const Region& b) {
  const index_t inter = intersection_size(a, b);
  if (inter == 0) return 1.0;
  const double sa = static_cast<double>(region_size(a));
  const double sb = static_cast<double>(region_size(b));
  return 1.0 - static_cast<double>(inter) / std::sqrt(sa * sb);
}

inline std::string to_string(const Interval& i) {
  return "(" + std::to_string(i.start) + "," + std::to_string(i.end) + "]";
}

inline std::string to_string(const Rect& r) {
  return "(" + std::to_string(r.j1) + "," + std::to_string(r.j2) + "]x(" +
         std::to_string(r.k1) + "," + std::to_string(r.k2) + "]";
}

}  // namespace scanident
