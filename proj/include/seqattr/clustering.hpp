#pragma once

// Masked distance, single-link agglomerative clustering with next-best-merge
// bookkeeping, tree cutting and the merge-distance curve used for elbow
// detection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stop_token>
#include <vector>

#include "seqattr/core.hpp"

namespace seqattr {

inline constexpr double kIncomparable = std::numeric_limits<double>::infinity();

/// Euclidean distance over the positions both series hold, normalized by the
/// series length (or by the shared-support size). nullopt when nothing is shared.
inline std::optional<double> masked_distance(
    const MaskedSeries& x, const MaskedSeries& y,
    DistanceNormalization norm = DistanceNormalization::kSeriesLength) {
  if (x.size() != y.size())
    throw Error(ErrorCode::kLengthMismatch,
                "series lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  double ss = 0.0;
  std::size_t shared = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x.mask[t] && y.mask[t]) {
      const double d = x.values[t] - y.values[t];
      ss += d * d;
      ++shared;
    }
  }
  if (shared == 0) return std::nullopt;
  const double denom = norm == DistanceNormalization::kSeriesLength ? static_cast<double>(x.size())
                                                                    : static_cast<double>(shared);
  return std::sqrt(ss) / denom;
}

/// Symmetric N x N distance matrix; incomparable pairs hold +inf.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  static DistanceMatrix build(std::span<const MaskedSeries> items, DistanceNormalization norm,
                              const std::stop_token& stop = {}) {
    DistanceMatrix m(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (stop.stop_requested()) throw Error(ErrorCode::kCancelled, "distance computation cancelled");
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        double d = masked_distance(items[i], items[j], norm).value_or(kIncomparable);
        m.set(i, j, d);
      }
    }
    return m;
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    d_[i * n_ + j] = v;
    d_[j * n_ + i] = v;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

struct Merge {
  std::size_t node_a = 0;  // node ids: leaves 0..n-1, merge m creates node n+m
  std::size_t node_b = 0;
  double distance = 0.0;
  std::size_t new_node = 0;
  std::size_t size = 0;  // leaves under new_node

  bool operator==(const Merge&) const = default;
};

struct DendrogramLinkage {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;

  bool operator==(const DendrogramLinkage&) const = default;
};

struct HacResult {
  DendrogramLinkage linkage;
  /// Active clusters after the run, each a sorted list of leaf indices; ordered
  /// by smallest leaf.
  std::vector<std::vector<std::size_t>> clusters;
};

namespace detail {

// Candidate merge ordered by (distance, smaller id, larger id).
struct MergeKey {
  double distance;
  std::size_t lo;
  std::size_t hi;

  static MergeKey of(double d, std::size_t a, std::size_t b) {
    return {d, std::min(a, b), std::max(a, b)};
  }
  bool operator<(const MergeKey& o) const {
    if (distance != o.distance) return distance < o.distance;
    if (lo != o.lo) return lo < o.lo;
    return hi < o.hi;
  }
};

inline std::vector<std::vector<std::size_t>> groups_from_roots(std::span<const std::size_t> root) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(root.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t leaf = 0; leaf < root.size(); ++leaf) {
    std::size_t r = root[leaf];
    if (slot[r] == std::numeric_limits<std::size_t>::max()) {
      slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[slot[r]].push_back(leaf);
  }
  return groups;
}

}  // namespace detail

/// Single-link HAC over a precomputed distance matrix. Performs exactly N - S
/// merges. Each cluster is represented by its smallest leaf; next-best-merge
/// entries keep every merge step O(N).
inline HacResult hac_single_link(DistanceMatrix dist, std::size_t stop_at,
                                 const std::stop_token& stop = {}) {
  const std::size_t n = dist.size();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "no items to cluster");
  if (stop_at == 0 || stop_at > n)
    throw Error(ErrorCode::kInvalidParams,
                "stop_at must be in [1," + std::to_string(n) + "], got " + std::to_string(stop_at));

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::uint8_t> active(n, 1);
  std::vector<std::size_t> node_id(n);
  std::vector<std::size_t> node_size(n, 1);
  std::iota(node_id.begin(), node_id.end(), 0);

  struct Best {
    double distance = kIncomparable;
    std::size_t partner = kNone;
  };
  std::vector<Best> nbm(n);
  auto rescan = [&](std::size_t i) {
    Best b;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (b.partner == kNone ||
          detail::MergeKey::of(dist(i, j), i, j) < detail::MergeKey::of(b.distance, i, b.partner))
        b = {dist(i, j), j};
    }
    nbm[i] = b;
  };
  for (std::size_t i = 0; i < n; ++i) rescan(i);

  HacResult out;
  out.linkage.n_leaves = n;
  out.linkage.merges.reserve(n - stop_at);

  for (std::size_t step = 0; step < n - stop_at; ++step) {
    if (stop.stop_requested()) throw Error(ErrorCode::kCancelled, "clustering cancelled");

    std::size_t i1 = kNone;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      if (i1 == kNone || detail::MergeKey::of(nbm[i].distance, i, nbm[i].partner) <
                             detail::MergeKey::of(nbm[i1].distance, i1, nbm[i1].partner))
        i1 = i;
    }
    const std::size_t i2 = nbm[i1].partner;
    const std::size_t keep = std::min(i1, i2);
    const std::size_t gone = std::max(i1, i2);
    const double d = nbm[i1].distance;

    Merge m;
    m.node_a = std::min(node_id[keep], node_id[gone]);
    m.node_b = std::max(node_id[keep], node_id[gone]);
    m.distance = d;
    m.new_node = n + step;
    m.size = node_size[keep] + node_size[gone];
    out.linkage.merges.push_back(m);

    node_id[keep] = m.new_node;
    node_size[keep] = m.size;
    active[gone] = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || i == keep) continue;
      dist.set(keep, i, std::min(dist(keep, i), dist(gone, i)));
    }

    // Single link only ever shrinks distances to the merged cluster, so an
    // entry pointing at either half stays optimal once redirected.
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || i == keep) continue;
      if (nbm[i].partner == keep || nbm[i].partner == gone) {
        nbm[i] = {dist(i, keep), keep};
      } else if (detail::MergeKey::of(dist(i, keep), i, keep) <
                 detail::MergeKey::of(nbm[i].distance, i, nbm[i].partner)) {
        nbm[i] = {dist(i, keep), keep};
      }
    }
    rescan(keep);
  }

  // Recover active clusters by replaying the merges with a union-find.
  std::vector<std::size_t> root(n);
  std::iota(root.begin(), root.end(), 0);
  std::vector<std::size_t> rep(2 * n, kNone);  // node id -> smallest leaf
  for (std::size_t i = 0; i < n; ++i) rep[i] = i;
  for (const auto& mg : out.linkage.merges) rep[mg.new_node] = std::min(rep[mg.node_a], rep[mg.node_b]);
  std::vector<std::size_t> parent(2 * n, kNone);
  for (const auto& mg : out.linkage.merges) parent[mg.node_a] = parent[mg.node_b] = mg.new_node;
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    std::size_t node = leaf;
    while (parent[node] != kNone) node = parent[node];
    root[leaf] = rep[node];
  }
  out.clusters = detail::groups_from_roots(root);
  return out;
}

inline HacResult hac_single_link(std::span<const MaskedSeries> items, std::size_t stop_at,
                                 DistanceNormalization norm = DistanceNormalization::kSeriesLength,
                                 const std::stop_token& stop = {}) {
  if (items.empty()) throw Error(ErrorCode::kEmptyInput, "no items to cluster");
  return hac_single_link(DistanceMatrix::build(items, norm, stop), stop_at, stop);
}

/// Undoes the last k-1 merges of a full run. Labels are 0..k-1, ordered by the
/// smallest leaf each cluster contains.
inline std::vector<std::size_t> cut_tree(const DendrogramLinkage& linkage, std::size_t k) {
  const std::size_t n = linkage.n_leaves;
  const std::size_t m = linkage.merges.size();
  const std::size_t k_min = n - m;
  if (k < std::max<std::size_t>(k_min, 1) || k > n)
    throw Error(ErrorCode::kKOutOfRange, "k=" + std::to_string(k) + " outside [" +
                                             std::to_string(std::max<std::size_t>(k_min, 1)) + "," +
                                             std::to_string(n) + "]");
  std::vector<std::size_t> uf(2 * n);
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](std::size_t x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  for (std::size_t i = 0; i < n - k; ++i) {
    const auto& mg = linkage.merges[i];
    uf[find(mg.node_a)] = mg.new_node;
    uf[find(mg.node_b)] = mg.new_node;
  }
  std::vector<std::size_t> labels(n);
  std::vector<std::size_t> label_of(2 * n, std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    std::size_t r = find(leaf);
    if (label_of[r] == std::numeric_limits<std::size_t>::max()) label_of[r] = next++;
    labels[leaf] = label_of[r];
  }
  return labels;
}

inline std::vector<std::vector<std::size_t>> clusters_from_labels(std::span<const std::size_t> labels) {
  std::size_t k = 0;
  for (auto l : labels) k = std::max(k, l + 1);
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Merge-distance curve

struct DistanceCurve {
  std::vector<double> points;    // finite merge distances, by iteration
  std::vector<double> smoothed;  // centered moving average
  std::optional<std::size_t> elbow_index;
};

/// Centered moving average whose window shrinks symmetrically near the ends,
/// so linear runs stay linear.
inline std::vector<double> smooth_centered(std::span<const double> d, std::size_t window) {
  const std::size_t radius = window / 2;
  const std::size_t n = d.size();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = std::min({radius, i, n - 1 - i});
    double sum = 0.0;
    for (std::size_t j = i - r; j <= i + r; ++j) sum += d[j];
    s[i] = sum / static_cast<double>(2 * r + 1);
  }
  return s;
}

/// Interior point of largest curvature; ties resolve to the largest index.
inline std::size_t elbow_of(std::span<const double> smoothed, ElbowRule rule) {
  const std::size_t n = smoothed.size();
  double scale = 1.0;
  for (double v : smoothed) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * scale;
  std::size_t best = 1;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double dd = smoothed[i - 1] - 2.0 * smoothed[i] + smoothed[i + 1];
    double v = rule == ElbowRule::kAbsolute ? std::abs(dd) : dd;
    if (v >= best_val - tol) {
      if (v > best_val) best_val = v;
      best = i;
    }
  }
  return best;
}

/// Curve of finite merge distances. Merges at +inf (incomparable clusters) are
/// left off the curve. elbow_index is empty with fewer than three points.
inline DistanceCurve distance_curve(const DendrogramLinkage& linkage, std::size_t smoothing_window = 5,
                                    ElbowRule rule = ElbowRule::kConvex) {
  if (smoothing_window == 0 || smoothing_window % 2 == 0)
    throw Error(ErrorCode::kInvalidParams, "smoothing window must be odd");
  DistanceCurve c;
  for (const auto& m : linkage.merges) {
    if (!std::isfinite(m.distance)) break;
    c.points.push_back(m.distance);
  }
  c.smoothed = smooth_centered(c.points, smoothing_window);
  if (c.points.size() >= 3) c.elbow_index = elbow_of(c.smoothed, rule);
  return c;
}

}  // namespace seqattr
