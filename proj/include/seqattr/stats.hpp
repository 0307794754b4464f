#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace seqattr {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a purpose tag.
/// splitmix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 1-based nearest rank of percentile p (in [0,100]) among n sorted values.
inline std::size_t nearest_rank(double p, std::size_t n) {
  // p * n is exact for the integer-valued percentiles used in practice, so the
  // division is correctly rounded and exact multiples of 100 do not round up.
  double r = std::ceil(p * static_cast<double>(n) / 100.0);
  auto rank = static_cast<std::size_t>(std::max(r, 1.0));
  return std::min(rank, n);
}

/// Nearest-rank percentile of an ascending-sorted, nonempty range.
inline double percentile_sorted(std::span<const double> sorted, double p) {
  return sorted[nearest_rank(p, sorted.size()) - 1];
}

/// Population (1/n) variance; exactly 0 for constant input.
inline double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  double corr = 0.0;
  for (double x : v) {
    double d = x - mean;
    ss += d * d;
    corr += d;
  }
  const double n = static_cast<double>(v.size());
  return (ss - corr * corr / n) / n;
}

}  // namespace seqattr
