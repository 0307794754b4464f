#pragma once

// Slow, independent reference implementations used to check the library.
// Nothing here calls into the code under test except plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "seqattr/core.hpp"

namespace oracle {

using Partition = std::set<std::set<std::size_t>>;

/// Distance over shared positions, accumulated in long double.
inline std::optional<long double> distance(const seqattr::MaskedSeries& x, const seqattr::MaskedSeries& y) {
  long double ss = 0.0L;
  bool any = false;
  for (std::size_t t = 0; t < x.values.size(); ++t) {
    if (!x.mask[t] || !y.mask[t]) continue;
    long double d = static_cast<long double>(x.values[t]) - static_cast<long double>(y.values[t]);
    ss += d * d;
    any = true;
  }
  if (!any) return std::nullopt;
  return std::sqrt(ss) / static_cast<long double>(x.values.size());
}

/// Naive single linkage: at every step scan all cluster pairs and all member
/// pairs for the closest two clusters. Returns the partition at every k,
/// indexed by k (entry 0 unused).
inline std::vector<Partition> single_link_partitions(const std::vector<seqattr::MaskedSeries>& items) {
  const std::size_t n = items.size();
  std::vector<std::vector<long double>> d(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) d[i][j] = distance(items[i], items[j]).value_or(std::numeric_limits<long double>::infinity());

  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
  auto snapshot = [&] {
    Partition p;
    for (const auto& c : clusters) p.insert(std::set<std::size_t>(c.begin(), c.end()));
    return p;
  };
  std::vector<Partition> out(n + 1);
  out[n] = snapshot();
  while (clusters.size() > 1) {
    long double best = std::numeric_limits<long double>::infinity();
    std::size_t ba = 0, bb = 1;
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        long double link = std::numeric_limits<long double>::infinity();
        for (auto i : clusters[a])
          for (auto j : clusters[b]) link = std::min(link, d[i][j]);
        if (link < best) {
          best = link;
          ba = a;
          bb = b;
        }
      }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
    out[clusters.size()] = snapshot();
  }
  return out;
}

/// Pairwise form of the population variance: sum_{i,j} (x_i - x_j)^2 / (2 n^2).
inline long double pairwise_variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0L;
  long double s = 0.0L;
  for (double a : v)
    for (double b : v) {
      long double d = static_cast<long double>(a) - static_cast<long double>(b);
      s += d * d;
    }
  const long double n = static_cast<long double>(v.size());
  return s / (2.0L * n * n);
}

/// Contribution score evaluated directly: every surviving value that lies in
/// the feature's declared range lands in some bin, so the bin total is a count.
inline long double contribution_score(const std::vector<double>& v, double lo, double hi, std::size_t M) {
  std::size_t inside = 0;
  for (double x : v) inside += (x >= lo && x <= hi) ? 1 : 0;
  return static_cast<long double>(inside) / static_cast<long double>(M) * pairwise_variance(v);
}

/// Smallest value v in `values` with count(x <= v) * 100 >= p * n.
inline double nearest_rank_quantile(const std::vector<double>& values, double p) {
  const long double need = static_cast<long double>(p) * static_cast<long double>(values.size());
  double best = std::numeric_limits<double>::infinity();
  for (double v : values) {
    std::size_t le = 0;
    for (double x : values) le += x <= v ? 1 : 0;
    if (static_cast<long double>(le) * 100.0L >= need) best = std::min(best, v);
  }
  return best;
}

}  // namespace oracle

namespace testgen {

/// Random masked series with values in [lo, hi] and each position present with
/// probability `present`.
inline seqattr::MaskedSeries random_series(std::mt19937_64& rng, std::size_t T, double present, double lo = 0.0,
                                           double hi = 10.0) {
  std::uniform_real_distribution<double> val(lo, hi);
  std::bernoulli_distribution keep(present);
  seqattr::MaskedSeries s(T);
  for (std::size_t t = 0; t < T; ++t)
    if (keep(rng)) s.set(t, val(rng));
  return s;
}

/// Gaussian blobs in T dimensions: g centers placed `separation` apart along
/// distinct axes (and diagonals), n points each, spread `sigma`.
inline std::vector<seqattr::MaskedSeries> blobs(std::mt19937_64& rng, std::size_t g, std::size_t n, std::size_t T,
                                                double separation, double sigma) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<seqattr::MaskedSeries> out;
  for (std::size_t c = 0; c < g; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(T, 0.0);
      for (std::size_t t = 0; t < T; ++t) v[t] = (t == c % T ? separation * static_cast<double>(1 + c / T) : 0.0) + noise(rng);
      out.push_back(seqattr::MaskedSeries::dense(std::move(v)));
    }
  return out;
}

}  // namespace testgen
