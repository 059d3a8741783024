#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "scanident/grid.hpp"
#include "scanident/prefix.hpp"
#include "scanident/rng.hpp"
#include "scanident/scan.hpp"

using namespace scanident;

namespace {

std::vector<double> noise(index_t n, std::uint64_t seed) {
  GaussianStream g(derive_stream(seed, 0));
  std::vector<double> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = g();
  return y;
}

Field2D noise_field(index_t n, std::uint64_t seed) {
  GaussianStream g(derive_stream(seed, 1));
  Field2D f{n, std::vector<double>(static_cast<std::size_t>(n * n))};
  for (auto& v : f.values) v = g();
  return f;
}

// Direct-summation oracle over the deduplicated candidate list; shares only
// the tie-break rule with the production scan.
template <typename Region, typename Sum>
ScanOutcome<Region> brute_force_max(const std::vector<Region>& candidates, const Sum& direct_sum,
                                    index_t n, int dim, bool penalized) {
  ScanOutcome<Region> best;
  for (const auto& cand : candidates) {
    const double y = direct_sum(cand) / std::sqrt(static_cast<double>(region_size(cand)));
    const double v = penalized ? y - penalty(n, region_size(cand), dim) : y;
    if (v > best.value || (v == best.value && best.argmax && tie_break_less(cand, *best.argmax))) {
      best.value = v;
      best.argmax = cand;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("penalty follows sqrt(2 log(e n^dim / size))") {
  CHECK(penalty(10000, 10000, 1) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(penalty(100, 10000, 2) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(penalty(10000, 100, 1) ==
        Catch::Approx(std::sqrt(2.0 * (1.0 + std::log(100.0)))).epsilon(1e-12));
  CHECK(penalty(10000, 100, 1) == Catch::Approx(3.3482).margin(1e-3));
  CHECK(penalty(100, 1200, 2) ==
        Catch::Approx(std::sqrt(2.0 * (1.0 + std::log(10000.0 / 1200.0)))).epsilon(1e-12));
  CHECK(penalty(100, 1200, 2) == Catch::Approx(2.4981).margin(1e-3));

  CHECK_THROWS_AS(penalty(100, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(penalty(100, 101, 1), std::invalid_argument);
  CHECK_THROWS_AS(penalty(100, 10001, 2), std::invalid_argument);
  CHECK_THROWS_AS(penalty(100, 100, 3), std::invalid_argument);
}

TEST_CASE("window statistic normalizes by sqrt of size") {
  const std::vector<double> zeros(50, 0.0);
  const PrefixSum1D pz(zeros);
  CHECK(window_stat(pz, Interval{3, 17}) == 0.0);

  const std::vector<double> ones(50, 1.0);
  const PrefixSum1D po(ones);
  CHECK(window_stat(po, Interval{10, 26}) == Catch::Approx(4.0).epsilon(1e-12));

  const std::vector<double> data{1.0, 2.0, 3.0, 4.0};
  const PrefixSum1D pd(data);
  CHECK(window_stat(pd, Interval{1, 3}) == Catch::Approx(5.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(window_stat(pd, Interval{1, 3}) == Catch::Approx(3.53553).margin(1e-5));

  CHECK_THROWS_AS(window_stat(pd, Interval{2, 6}), std::out_of_range);
  CHECK_THROWS_AS(pd.sum(Interval{-1, 2}), std::out_of_range);
}

TEST_CASE("prefix aggregates match direct summation on random regions") {
  const index_t n = 5000;
  const auto y = noise(n, 99);
  const PrefixSum1D agg(y);
  GaussianStream g(derive_stream(99, 2));
  for (int t = 0; t < 1000; ++t) {
    const auto len = 1 + static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(n)));
    const auto start = static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(n - len + 1)));
    double direct = 0.0;
    for (index_t i = start; i < start + len; ++i) direct += y[static_cast<std::size_t>(i)];
    const double fast = agg.sum(Interval{start, start + len});
    REQUIRE(std::abs(fast - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
  }

  const index_t m = 80;
  const auto f = noise_field(m, 7);
  const SummedAreaTable sat(f);
  for (int t = 0; t < 1000; ++t) {
    const auto w = 1 + static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(m)));
    const auto h = 1 + static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(m)));
    const auto j1 = static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(m - w + 1)));
    const auto k1 = static_cast<index_t>(g.uniform_below(static_cast<std::uint64_t>(m - h + 1)));
    double direct = 0.0;
    for (index_t j = j1; j < j1 + w; ++j) {
      for (index_t k = k1; k < k1 + h; ++k) direct += f.at(j, k);
    }
    const double fast = sat.sum(Rect{j1, j1 + w, k1, k1 + h});
    REQUIRE(std::abs(fast - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("all-zero data maximizes the negated penalty at the largest candidate") {
  // n = 120 makes n a multiple of d_1 = 10, so (0, 120] is in the set.
  const auto set = ApproxSet::build(GridParams{120, 1});
  const std::vector<double> zeros(120, 0.0);
  const PrefixSum1D agg(zeros);
  const auto out = scan_max(agg, set, true);
  REQUIRE_FALSE(out.empty());
  CHECK(out.value == Catch::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  CHECK(*out.argmax == Interval{0, 120});
}

TEST_CASE("scan equals brute force over the same candidates (1D)") {
  const index_t n = 200;
  const auto set = ApproxSet::build(GridParams{n, 1});
  const auto candidates = set.collect_intervals();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto y = noise(n, 1000 + seed);
    if (seed % 2 == 1) {
      for (index_t i = 60; i < 90; ++i) y[static_cast<std::size_t>(i)] += 1.5;
    }
    const PrefixSum1D agg(y);
    auto direct = [&](const Interval& c) {
      double s = 0.0;
      for (index_t i = c.start; i < c.end; ++i) s += y[static_cast<std::size_t>(i)];
      return s;
    };
    for (bool penalized : {true, false}) {
      const auto got = scan_max(agg, set, penalized);
      const auto want = brute_force_max(candidates, direct, n, 1, penalized);
      REQUIRE(got.argmax == want.argmax);
      REQUIRE(got.value == Catch::Approx(want.value).margin(1e-9));
    }
  }
}

TEST_CASE("scan equals brute force over the same candidates (2D)") {
  const index_t n = 24;
  const auto set = ApproxSet::build(GridParams{n, 2});
  const auto candidates = set.collect_rects();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto f = noise_field(n, 2000 + seed);
    if (seed == 1) {
      for (index_t j = 4; j < 10; ++j) {
        for (index_t k = 12; k < 20; ++k) f.at(j, k) += 1.2;
      }
    }
    const SummedAreaTable agg(f);
    auto direct = [&](const Rect& c) {
      double s = 0.0;
      for (index_t j = c.j1; j < c.j2; ++j) {
        for (index_t k = c.k1; k < c.k2; ++k) s += f.at(j, k);
      }
      return s;
    };
    for (bool penalized : {true, false}) {
      const auto got = scan_max(agg, set, penalized);
      const auto want = brute_force_max(candidates, direct, n, 2, penalized);
      REQUIRE(got.argmax == want.argmax);
      REQUIRE(got.value == Catch::Approx(want.value).margin(1e-9));
    }
  }
}

TEST_CASE("scan maximum value is reproducible at the argmax") {
  const index_t n = 500;
  const auto set = ApproxSet::build(GridParams{n, 1});
  const auto y = noise(n, 31);
  const PrefixSum1D agg(y);
  for (bool penalized : {true, false}) {
    const auto out = scan_max(agg, set, penalized);
    REQUIRE_FALSE(out.empty());
    const double recomputed =
        window_stat(agg, *out.argmax) - (penalized ? penalty(n, out.argmax->length(), 1) : 0.0);
    CHECK(out.value == Catch::Approx(recomputed).margin(1e-12));
  }
}

TEST_CASE("exclusions remove intersecting candidates") {
  const index_t n = 300;
  const auto set = ApproxSet::build(GridParams{n, 1});
  auto y = noise(n, 77);
  for (index_t i = 100; i < 140; ++i) y[static_cast<std::size_t>(i)] += 2.0;
  const PrefixSum1D agg(y);

  const auto first = scan_max(agg, set, true);
  REQUIRE_FALSE(first.empty());
  const std::vector<Interval> excl{*first.argmax};
  const auto second = scan_max(agg, set, true, excl);
  REQUIRE_FALSE(second.empty());
  CHECK_FALSE(intersects(*second.argmax, *first.argmax));
  CHECK(second.value <= first.value);

  // Excluding the whole domain empties the candidate set.
  const std::vector<Interval> all{Interval{0, n}};
  const auto none = scan_max(agg, set, true, all);
  CHECK(none.empty());
  CHECK(std::isinf(none.value));
}

TEST_CASE("scan results are independent of thread count") {
  const index_t n = 2000;
  const auto set = ApproxSet::build(GridParams{n, 1});
  const auto y = noise(n, 55);
  const PrefixSum1D agg(y);
  const auto serial = scan_max(agg, set, true, {}, 1);
  for (int threads : {2, 3, 7}) {
    const auto parallel = scan_max(agg, set, true, {}, threads);
    CHECK(parallel.value == serial.value);
    CHECK(parallel.argmax == serial.argmax);
  }

  const auto f = noise_field(40, 4);
  const auto set2 = ApproxSet::build(GridParams{40, 2});
  const SummedAreaTable sat(f);
  const auto s2 = scan_max(sat, set2, true, {}, 1);
  const auto p2 = scan_max(sat, set2, true, {}, 3);
  CHECK(s2.value == p2.value);
  CHECK(s2.argmax == p2.argmax);
}

TEST_CASE("dual scan agrees with separate penalized and unpenalized scans") {
  const index_t n = 1500;
  const auto set = ApproxSet::build(GridParams{n, 1});
  const auto y = noise(n, 66);
  const PrefixSum1D agg(y);
  const auto dual = scan_both(agg, set);
  const auto pen = scan_max(agg, set, true);
  const auto unpen = scan_max(agg, set, false);
  CHECK(dual.penalized.value == pen.value);
  CHECK(dual.penalized.argmax == pen.argmax);
  CHECK(dual.unpenalized.value == unpen.value);
  CHECK(dual.unpenalized.argmax == unpen.argmax);
  // The penalty is positive, so the penalized maximum sits strictly below.
  CHECK(dual.penalized.value < dual.unpenalized.value);

  const auto f = noise_field(32, 9);
  const auto set2 = ApproxSet::build(GridParams{32, 2});
  const SummedAreaTable sat(f);
  const auto dual2 = scan_both(sat, set2);
  const auto pen2 = scan_max(sat, set2, true);
  const auto unpen2 = scan_max(sat, set2, false);
  CHECK(dual2.penalized.argmax == pen2.argmax);
  CHECK(dual2.unpenalized.argmax == unpen2.argmax);
}

TEST_CASE("streamed per-candidate statistics visit the whole family") {
  const index_t n = 100;
  const auto set = ApproxSet::build(GridParams{n, 1});
  const auto y = noise(n, 12);
  const PrefixSum1D agg(y);
  std::size_t visited = 0;
  double best = -1e300;
  scan_visit(agg, set, [&](const Interval& c, double stat, double pen) {
    ++visited;
    REQUIRE(pen == Catch::Approx(penalty(n, c.length(), 1)));
    best = std::max(best, stat - pen);
  });
  CHECK(visited == set.total_count());
  CHECK(best == Catch::Approx(scan_max(agg, set, true).value).margin(1e-9));
}
