#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "scanident/common.hpp"
#include "scanident/interval.hpp"

namespace scanident {

// Cumulative sums over a 1D sequence; window sums in O(1).
// Built with compensated (Kahan) accumulation so round-off stays bounded for
// long sequences.
class PrefixSum1D {
 public:
  explicit PrefixSum1D(std::span<const double> data) : cum_(data.size() + 1, 0.0) {
    double sum = 0.0;
    double carry = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double y = data[i] - carry;
      const double t = sum + y;
      carry = (t - sum) - y;
      sum = t;
      cum_[i + 1] = sum;
    }
  }

  index_t n() const { return static_cast<index_t>(cum_.size()) - 1; }

  double sum(const Interval& region) const {
    if (!region.valid_in(n())) {
      throw std::out_of_range("PrefixSum1D: region " + to_string(region) +
                              " out of bounds for n=" + std::to_string(n()));
    }
    return sum_unchecked(region.start, region.end);
  }

  double sum_unchecked(index_t start, index_t end) const {
    return cum_[static_cast<std::size_t>(end)] - cum_[static_cast<std::size_t>(start)];
  }

  const double* raw() const { return cum_.data(); }

 private:
  std::vector<double> cum_;
};

// Row-major n x n field of observations; the first rectangle coordinate
// indexes rows.
struct Field2D {
  index_t n = 0;
  std::vector<double> values;

  double& at(index_t j, index_t k) { return values[static_cast<std::size_t>(j * n + k)]; }
  double at(index_t j, index_t k) const { return values[static_cast<std::size_t>(j * n + k)]; }
};

// Summed-area table over an n x n field; rectangle sums in O(1).
class SummedAreaTable {
 public:
  explicit SummedAreaTable(const Field2D& field) : n_(field.n), sat_((field.n + 1) * (field.n + 1), 0.0) {
    if (static_cast<index_t>(field.values.size()) != field.n * field.n) {
      throw std::invalid_argument("SummedAreaTable: field size does not match n*n");
    }
    const index_t stride = n_ + 1;
    for (index_t j = 1; j <= n_; ++j) {
      const double* row = field.values.data() + (j - 1) * n_;
      double* out = sat_.data() + j * stride;
      const double* prev = sat_.data() + (j - 1) * stride;
      double row_sum = 0.0;
      for (index_t k = 1; k <= n_; ++k) {
        row_sum += row[k - 1];
        out[k] = prev[k] + row_sum;
      }
    }
  }

  index_t n() const { return n_; }

  double sum(const Rect& r) const {
    if (!r.valid_in(n_)) {
      throw std::out_of_range("SummedAreaTable: rect " + to_string(r) +
                              " out of bounds for n=" + std::to_string(n_));
    }
    return sum_unchecked(r.j1, r.j2, r.k1, r.k2);
  }

  double sum_unchecked(index_t j1, index_t j2, index_t k1, index_t k2) const {
    const index_t stride = n_ + 1;
    const double* a = sat_.data() + j1 * stride;
    const double* b = sat_.data() + j2 * stride;
    return b[k2] - b[k1] - a[k2] + a[k1];
  }

  // Row base pointer into the table; row r holds sums over the first r rows.
  const double* row(index_t j) const { return sat_.data() + j * (n_ + 1); }

 private:
  index_t n_;
  std::vector<double> sat_;
};

}  // namespace scanident
