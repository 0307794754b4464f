#pragma once

// Per-cluster temporal pattern summaries (quantile bands and contribution
// counts) and the juxtaposed two-class comparison built from them.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "seqattr/core.hpp"
#include "seqattr/stats.hpp"

namespace seqattr {

/// Per time step: one value per percentile, or nullopt where no member is present.
using BandEdges = std::vector<std::optional<std::vector<double>>>;

inline BandEdges quantile_bands(std::span<const MaskedSeries> cluster, std::span<const double> percentiles) {
  if (cluster.empty()) throw Error(ErrorCode::kEmptyInput, "cannot summarize an empty cluster");
  const std::size_t T = cluster.front().size();
  BandEdges bands(T);
  std::vector<double> column;
  for (std::size_t t = 0; t < T; ++t) {
    column.clear();
    for (const auto& s : cluster)
      if (s.present(t)) column.push_back(s.values[t]);
    if (column.empty()) continue;
    std::sort(column.begin(), column.end());
    std::vector<double> edges;
    edges.reserve(percentiles.size());
    for (double p : percentiles) edges.push_back(percentile_sorted(column, p));
    bands[t] = std::move(edges);
  }
  return bands;
}

inline std::vector<std::size_t> contribution_indicator(std::span<const MaskedSeries> cluster) {
  if (cluster.empty()) return {};
  std::vector<std::size_t> counts(cluster.front().size(), 0);
  for (const auto& s : cluster)
    for (std::size_t t = 0; t < s.size(); ++t) counts[t] += s.present(t) ? 1 : 0;
  return counts;
}

struct ClusterSummary {
  std::size_t cluster_id = 0;
  std::size_t class_label = 0;
  std::size_t feature_id = 0;
  std::size_t size = 0;
  std::vector<std::size_t> members;  // population indices
  std::size_t t_begin = 0;           // first time step covered by the vectors below
  BandEdges band_edges;
  std::vector<std::size_t> contribution_counts;

  bool operator==(const ClusterSummary&) const = default;
};

struct ClassSummary {
  std::size_t class_label = 0;
  std::size_t feature_id = 0;
  std::vector<ClusterSummary> clusters;  // size descending

  bool operator==(const ClassSummary&) const = default;
};

/// Summaries for clusters given as population indices; order is preserved.
inline ClassSummary summarize_class(std::span<const MaskedSeries> population,
                                    const std::vector<std::vector<std::size_t>>& clusters,
                                    std::size_t class_label, std::size_t feature_id,
                                    std::span<const double> percentiles) {
  ClassSummary out;
  out.class_label = class_label;
  out.feature_id = feature_id;
  std::vector<MaskedSeries> members;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    members.clear();
    for (auto i : clusters[c]) members.push_back(population[i]);
    ClusterSummary cs;
    cs.cluster_id = c;
    cs.class_label = class_label;
    cs.feature_id = feature_id;
    cs.size = clusters[c].size();
    cs.members = clusters[c];
    cs.band_edges = quantile_bands(members, percentiles);
    cs.contribution_counts = contribution_indicator(members);
    out.clusters.push_back(std::move(cs));
  }
  return out;
}

/// Restricts a summary to time steps [t0, t1) of the full series.
inline ClusterSummary restrict_window(ClusterSummary s, std::size_t t0, std::size_t t1) {
  const std::size_t begin = t0 - s.t_begin;
  const std::size_t end = t1 - s.t_begin;
  s.band_edges = BandEdges(s.band_edges.begin() + static_cast<std::ptrdiff_t>(begin),
                           s.band_edges.begin() + static_cast<std::ptrdiff_t>(end));
  s.contribution_counts = std::vector<std::size_t>(
      s.contribution_counts.begin() + static_cast<std::ptrdiff_t>(begin),
      s.contribution_counts.begin() + static_cast<std::ptrdiff_t>(end));
  s.t_begin = t0;
  return s;
}

struct TimeWindow {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const TimeWindow&) const = default;
};

struct ClassComparison {
  std::size_t feature_id = 0;
  std::size_t class_a = 0;
  std::size_t class_b = 0;
  std::vector<ClusterSummary> clusters_a;
  std::vector<ClusterSummary> clusters_b;
  TimeWindow time_axis;
  std::optional<std::pair<double, double>> value_axis;  // nullopt when every band is a gap

  bool operator==(const ClassComparison&) const = default;
};

/// Juxtaposes two classes on shared axes. A temporal focus only narrows what
/// is reported; clusters are not recomputed.
inline ClassComparison build_comparison(const ClassSummary& a, const ClassSummary& b,
                                        std::optional<TimeWindow> focus = std::nullopt) {
  if (a.feature_id != b.feature_id)
    throw Error(ErrorCode::kFeatureMismatch, "comparing feature " + std::to_string(a.feature_id) +
                                                 " with feature " + std::to_string(b.feature_id));
  std::size_t T = 0;
  for (const auto* side : {&a, &b})
    for (const auto& c : side->clusters) T = std::max(T, c.t_begin + c.band_edges.size());
  TimeWindow win{0, T};
  if (focus) {
    if (focus->begin >= focus->end || focus->end > T)
      throw Error(ErrorCode::kInvalidParams, "temporal focus outside [0," + std::to_string(T) + ")");
    win = *focus;
  }

  ClassComparison cmp;
  cmp.feature_id = a.feature_id;
  cmp.class_a = a.class_label;
  cmp.class_b = b.class_label;
  cmp.time_axis = win;
  auto take = [&](const ClassSummary& side, std::vector<ClusterSummary>& out) {
    for (const auto& c : side.clusters) out.push_back(restrict_window(c, win.begin, win.end));
    std::stable_sort(out.begin(), out.end(),
                     [](const ClusterSummary& x, const ClusterSummary& y) { return x.size > y.size; });
  };
  take(a, cmp.clusters_a);
  take(b, cmp.clusters_b);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto* side : {&cmp.clusters_a, &cmp.clusters_b})
    for (const auto& c : *side)
      for (const auto& e : c.band_edges)
        if (e && !e->empty()) {
          lo = std::min(lo, e->front());
          hi = std::max(hi, e->back());
        }
  if (lo <= hi) cmp.value_axis = std::make_pair(lo, hi);
  return cmp;
}

}  // namespace seqattr
