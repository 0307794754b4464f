#pragma once

// Feature contribution scoring, attention distributions and attention range of
// interest (AOI) filtering.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "seqattr/core.hpp"
#include "seqattr/stats.hpp"

namespace seqattr {

/// Filtered values indexed as by_feature[f][instance].
struct FilteredTensor {
  std::size_t T = 0;
  std::size_t F = 0;
  AttentionLevel level = AttentionLevel::kEvent;
  std::vector<std::vector<MaskedSeries>> by_feature;

  const std::vector<MaskedSeries>& feature(std::size_t f) const { return by_feature.at(f); }
};

inline AttentionLevel resolve_level(AttentionLevel requested, const AttentionTensor& att) {
  if (requested == AttentionLevel::kAuto)
    return att.feature_level ? AttentionLevel::kFeature : AttentionLevel::kEvent;
  return requested;
}

/// Position (i,t,f) survives iff its governing attention value lies in the AOI.
/// Values are copied unchanged; filtered-out positions become absent, never zero.
inline FilteredTensor aoi_filter(const SequenceDataset& ds, const AttentionTensor& att,
                                 const AoiSet& aoi, AttentionLevel level = AttentionLevel::kAuto) {
  if (aoi.empty()) throw Error(ErrorCode::kInvalidParams, "AOI must not be empty");
  level = resolve_level(level, att);
  if (level == AttentionLevel::kFeature && !att.feature_level)
    throw Error(ErrorCode::kFeatureAttentionMissing,
                "feature-level filtering requested but no feature attention was loaded");
  if (att.event_level.size() != ds.instances.size())
    throw Error(ErrorCode::kSchemaMismatch, "attention does not match dataset");

  FilteredTensor out;
  out.T = ds.T;
  out.F = ds.F;
  out.level = level;
  out.by_feature.assign(ds.F, std::vector<MaskedSeries>(ds.instances.size(), MaskedSeries(ds.T)));
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& x = ds.instances[i].values;
    for (std::size_t t = 0; t < ds.T; ++t) {
      const bool event_in = aoi_contains(aoi, att.event_level[i][t]);
      for (std::size_t f = 0; f < ds.F; ++f) {
        bool keep = level == AttentionLevel::kEvent ? event_in
                                                    : aoi_contains(aoi, (*att.feature_level)[i](t, f));
        if (keep) out.by_feature[f][i].set(t, x(t, f));
      }
    }
  }
  return out;
}

/// All event-level attention values in instance-major order.
inline std::vector<double> flatten_event_attention(const AttentionTensor& att) {
  std::vector<double> all;
  for (const auto& row : att.event_level) all.insert(all.end(), row.begin(), row.end());
  return all;
}

/// AOI holding the events strictly above the (100 - top_percent)th percentile
/// of event attention.
inline AoiSet top_percent_aoi(const AttentionTensor& att, double top_percent) {
  if (!(top_percent > 0.0 && top_percent <= 100.0))
    throw Error(ErrorCode::kInvalidParams, "top percent must be in (0,100]");
  auto all = flatten_event_attention(att);
  if (all.empty() || top_percent == 100.0) return {{0.0, 1.0}};
  std::sort(all.begin(), all.end());
  std::size_t rank = nearest_rank(100.0 - top_percent, all.size());
  auto above = std::upper_bound(all.begin(), all.end(), all[rank - 1]);
  if (above == all.end()) return {{1.0, 1.0}};  // nothing lies strictly above
  return {{*above, 1.0}};
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct PercentileEntry {
  double percentile = 0.0;
  double value = 0.0;
};

struct AttentionDistribution {
  AttentionMode mode = AttentionMode::kHistogram;
  std::vector<HistogramBin> bins;
  std::vector<PercentileEntry> percentile_table;
};

/// Index of the 0.1-wide bin holding a; the last bin is right-closed.
inline std::size_t attention_bin(double a) {
  auto b = static_cast<std::size_t>(std::floor(a * 10.0));
  return std::min<std::size_t>(b, 9);
}

inline AttentionDistribution attention_distribution(const AttentionTensor& att, AttentionMode mode,
                                                    std::span<const double> percentiles = {}) {
  AttentionDistribution d;
  d.mode = mode;
  auto all = flatten_event_attention(att);
  if (mode == AttentionMode::kHistogram) {
    for (std::size_t b = 0; b < 10; ++b)
      d.bins.push_back({static_cast<double>(b) / 10.0, static_cast<double>(b + 1) / 10.0, 0});
    for (double a : all) ++d.bins[attention_bin(a)].count;
    return d;
  }
  std::vector<double> ps(percentiles.begin(), percentiles.end());
  if (ps.empty())
    for (int p = 0; p <= 100; p += 10) ps.push_back(p);
  std::sort(all.begin(), all.end());
  for (double p : ps) d.percentile_table.push_back({p, all.empty() ? 0.0 : percentile_sorted(all, p)});
  return d;
}

// ---------------------------------------------------------------------------
// Contribution score

struct BinCounts {
  std::vector<std::size_t> counts;
  bool degenerate = false;  // value_min == value_max; everything sits in bin 0
};

/// Equal-width bins over [value_min, value_max]; the last bin is right-closed.
inline BinCounts bin_values(std::span<const double> values, const FeatureSpec& spec, std::size_t M) {
  if (M == 0) throw Error(ErrorCode::kInvalidParams, "bin count must be positive");
  BinCounts out;
  out.counts.assign(M, 0);
  const double width = spec.value_max - spec.value_min;
  out.degenerate = !(width > 0.0);
  for (double v : values) {
    std::size_t b = 0;
    if (!out.degenerate) {
      double pos = std::floor((v - spec.value_min) / width * static_cast<double>(M));
      b = pos <= 0.0 ? 0 : std::min(static_cast<std::size_t>(pos), M - 1);
    }
    ++out.counts[b];
  }
  return out;
}

struct FeatureScore {
  std::size_t feature_id = 0;
  double score = 0.0;
  double c_term = 0.0;
  double v_term = 0.0;
  std::size_t n_contributing = 0;

  bool operator==(const FeatureScore&) const = default;
};

/// s = C * V, with C the mean bin occupancy and V the population variance of
/// the surviving values.
inline FeatureScore contribution_score(std::span<const double> values, const FeatureSpec& spec,
                                       std::size_t M) {
  FeatureScore s;
  s.feature_id = spec.id;
  s.n_contributing = values.size();
  if (values.empty()) return s;
  auto bins = bin_values(values, spec, M);
  std::size_t total = 0;
  for (auto c : bins.counts) total += c;
  s.c_term = static_cast<double>(total) / static_cast<double>(M);
  s.v_term = population_variance(values);
  s.score = s.c_term * s.v_term;
  return s;
}

inline std::vector<double> present_values(std::span<const MaskedSeries> series) {
  std::vector<double> out;
  for (const auto& s : series)
    for (std::size_t t = 0; t < s.size(); ++t)
      if (s.present(t)) out.push_back(s.values[t]);
  return out;
}

/// Scores every feature on the union of all classes' surviving values.
inline std::vector<FeatureScore> score_features(const SequenceDataset& ds, const FilteredTensor& ft,
                                                std::size_t M) {
  std::vector<FeatureScore> scores;
  scores.reserve(ds.F);
  for (std::size_t f = 0; f < ds.F; ++f) {
    auto values = present_values(ft.feature(f));
    scores.push_back(contribution_score(values, ds.features[f], M));
  }
  return scores;
}

/// Descending by score; ties by ascending feature id.
inline std::vector<FeatureScore> rank_features(std::vector<FeatureScore> scores) {
  std::sort(scores.begin(), scores.end(), [](const FeatureScore& a, const FeatureScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.feature_id < b.feature_id;
  });
  return scores;
}

}  // namespace seqattr
