#pragma once

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scanident/common.hpp"
#include "scanident/grid.hpp"
#include "scanident/parallel.hpp"
#include "scanident/rng.hpp"
#include "scanident/scan.hpp"

namespace scanident {

// Everything the null distribution of the scan maximum depends on. Two keys
// that compare equal always yield bit-identical quantiles.
struct CalibrationKey {
  index_t n = 0;
  int dim = 1;
  bool penalized = true;
  double alpha = 0.05;
  int reps = 10000;
  std::uint64_t seed = 0;
  double c = 6.0;
  double zeta = 0.5;
  index_t min_length = 0;

  void validate() const {
    grid_params().validate();
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw std::invalid_argument("CalibrationKey: alpha must be in (0,1)");
    }
    if (reps < 100) {
      throw std::invalid_argument("CalibrationKey: reps must be at least 100");
    }
  }

  GridParams grid_params() const { return GridParams{n, dim, c, zeta, min_length}; }

  CalibrationKey twin() const {
    CalibrationKey k = *this;
    k.penalized = !penalized;
    return k;
  }

  std::string canonical() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "n=%" PRId64 "|dim=%d|pen=%d|alpha=%.17g|reps=%d|seed=%" PRIu64
                                    "|c=%.17g|zeta=%.17g|minlen=%" PRId64,
                  n, dim, penalized ? 1 : 0, alpha, reps, seed, c, zeta, min_length);
    return std::string(buf);
  }

  // FNV-1a over the canonical form; the fast-match column in the cache file.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (char ch : canonical()) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
    return h;
  }

  friend bool operator==(const CalibrationKey&, const CalibrationKey&) = default;
};

struct CalibrationRecord {
  CalibrationKey key;
  double quantile = 0.0;
  // Replicate maxima, ascending. Kept when freshly computed so further
  // quantiles can be read off without re-simulation; empty when the record
  // was loaded from the cache file.
  std::vector<double> maxima;
  std::int64_t created_at_unix = 0;
};

// Ascending order statistic at ceil((1-alpha) * count). The small nudge
// keeps exactly-representable products from rounding up a rank.
inline std::size_t quantile_rank(double alpha, std::size_t count) {
  if (count == 0) throw std::invalid_argument("quantile_rank: empty sample");
  const double x = (1.0 - alpha) * static_cast<double>(count);
  auto rank = static_cast<std::size_t>(std::ceil(x - 1e-9));
  rank = std::min(std::max<std::size_t>(rank, 1), count);
  return rank;
}

inline double quantile_from_sorted(const std::vector<double>& ascending, double alpha) {
  return ascending[quantile_rank(alpha, ascending.size()) - 1];
}

// One null replicate: a standard-normal field drawn from the stream named by
// (seed, replicate_index), scanned over the given set. The same pair always
// reproduces the same value no matter which thread runs it.
inline double simulate_null_max(const ApproxSet& set, int replicate_index, std::uint64_t seed,
                                bool penalized) {
  GaussianStream g(derive_stream(seed, static_cast<std::uint64_t>(replicate_index)));
  const index_t n = set.params().n;
  if (set.is_1d()) {
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = g();
    const PrefixSum1D agg(y);
    return scan_max(agg, set, penalized).value;
  }
  Field2D f{n, std::vector<double>(static_cast<std::size_t>(n * n))};
  for (auto& v : f.values) v = g();
  const SummedAreaTable agg(f);
  return scan_max(agg, set, penalized).value;
}

// Line-oriented calibration cache. One record per line:
//   hash n dim penalized alpha reps seed c zeta min_length quantile
// under a versioned header. Appends are serialized; reads re-parse the file.
class CalibrationStore {
 public:
  explicit CalibrationStore(std::filesystem::path path) : path_(std::move(path)) {}

  static constexpr const char* kHeader = "# scanident-cache v1";

  static std::filesystem::path default_path() {
    if (const char* env = std::getenv("SCANIDENT_CACHE")) return env;
    return "scanident_cache.txt";
  }

  const std::filesystem::path& path() const { return path_; }

  std::optional<CalibrationRecord> lookup(const CalibrationKey& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::ifstream in(path_);
    if (!in) return std::nullopt;
    std::string line;
    std::optional<CalibrationRecord> found;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      CalibrationKey k;
      double quantile = 0.0;
      std::uint64_t hash = 0;
      int pen = 0;
      long long n = 0, minlen = 0;
      unsigned long long h = 0, seed = 0;
      if (std::sscanf(line.c_str(), "%llu %lld %d %d %lg %d %llu %lg %lg %lld %lg", &h, &n, &k.dim,
                      &pen, &k.alpha, &k.reps, &seed, &k.c, &k.zeta, &minlen, &quantile) != 11) {
        continue;  // malformed line: skip, do not fail the lookup
      }
      hash = h;
      k.n = n;
      k.penalized = pen != 0;
      k.seed = seed;
      k.min_length = minlen;
      if (hash == key.hash() && k == key) {
        // Last record wins if the file somehow holds duplicates.
        found = CalibrationRecord{k, quantile, {}, 0};
      }
    }
    return found;
  }

  bool persist(const CalibrationRecord& rec) {
    std::lock_guard<std::mutex> lock(mu_);
    const bool fresh = !std::filesystem::exists(path_);
    std::ofstream out(path_, std::ios::app);
    if (!out) return false;
    if (fresh) out << kHeader << "\n";
    out << format_line(rec) << "\n";
    out.flush();
    return static_cast<bool>(out);
  }

  static std::string format_line(const CalibrationRecord& rec) {
    const auto& k = rec.key;
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%" PRIu64 " %" PRId64 " %d %d %.17g %d %" PRIu64 " %.17g %.17g %" PRId64 " %.17g",
                  k.hash(), k.n, k.dim, k.penalized ? 1 : 0, k.alpha, k.reps, k.seed, k.c, k.zeta,
                  k.min_length, rec.quantile);
    return std::string(buf);
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

struct CalibrateResult {
  CalibrationRecord record;
  bool from_cache = false;
  bool persisted = false;
  // Non-empty when the cache could not be read or written; the quantile is
  // still valid, it just was not persisted.
  std::string warning;
};

// Critical value gamma_n(alpha) (penalized) or tau_n(alpha) (unpenalized) by
// seeded Monte Carlo under the null. Replicates run concurrently; the
// reduction sorts and takes the order statistic, so thread count never
// changes the answer. Each simulation pass scans once and yields maxima for
// both statistics, and both records are persisted.
inline CalibrateResult calibrate(const CalibrationKey& key, CalibrationStore& store,
                                 int threads = default_threads(), bool keep_maxima = false) {
  key.validate();
  if (auto cached = store.lookup(key)) {
    return {*cached, true, true, ""};
  }

  const ApproxSet set = ApproxSet::build(key.grid_params());
  const auto count = static_cast<std::size_t>(key.reps);
  std::vector<double> pen_maxima(count), unpen_maxima(count);
  parallel_for(count, threads, [&](std::size_t r) {
    GaussianStream g(derive_stream(key.seed, static_cast<std::uint64_t>(r)));
    const index_t n = set.params().n;
    if (set.is_1d()) {
      std::vector<double> y(static_cast<std::size_t>(n));
      for (auto& v : y) v = g();
      const PrefixSum1D agg(y);
      const auto dual = scan_both(agg, set);
      pen_maxima[r] = dual.penalized.value;
      unpen_maxima[r] = dual.unpenalized.value;
    } else {
      Field2D f{n, std::vector<double>(static_cast<std::size_t>(n * n))};
      for (auto& v : f.values) v = g();
      const SummedAreaTable agg(f);
      const auto dual = scan_both(agg, set);
      pen_maxima[r] = dual.penalized.value;
      unpen_maxima[r] = dual.unpenalized.value;
    }
  });
  std::sort(pen_maxima.begin(), pen_maxima.end());
  std::sort(unpen_maxima.begin(), unpen_maxima.end());

  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const std::int64_t stamp = std::chrono::duration_cast<std::chrono::seconds>(now).count();

  CalibrationRecord requested{key, quantile_from_sorted(key.penalized ? pen_maxima : unpen_maxima,
                                                        key.alpha),
                              {}, stamp};
  CalibrationRecord other{key.twin(), quantile_from_sorted(key.penalized ? unpen_maxima : pen_maxima,
                                                           key.alpha),
                          {}, stamp};

  CalibrateResult result{requested, false, false, ""};
  result.persisted = store.persist(requested) && store.persist(other);
  if (!result.persisted) {
    result.warning = "calibration cache not writable: " + store.path().string();
  }
  if (keep_maxima) {
    result.record.maxima = key.penalized ? std::move(pen_maxima) : std::move(unpen_maxima);
  }
  return result;
}

}  // namespace scanident
