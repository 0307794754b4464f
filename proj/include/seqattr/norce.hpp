#pragma once

// Noise reduction by elbow cutting of the single-link merge curve, followed by
// a gap statistic whose references are drawn from the unsampled residual of
// the population.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stop_token>
#include <vector>

#include "seqattr/clustering.hpp"
#include "seqattr/stats.hpp"

namespace seqattr {

inline constexpr std::size_t kNeverMerged = std::numeric_limits<std::size_t>::max();

/// Full single-link dendrogram of a sample plus what is needed to re-cut it at
/// any noise level without reclustering.
struct NoiseModel {
  std::vector<std::size_t> sample;  // population indices, leaf order
  DendrogramLinkage linkage;
  DistanceCurve curve;
  std::vector<std::size_t> first_merge;  // per leaf; kNeverMerged if never joined
};

struct NoiseReport {
  std::vector<std::size_t> kept;     // population indices, ascending
  std::vector<std::size_t> removed;  // population indices, ascending
  std::optional<std::size_t> elbow_index;
  double noise_level = 0.0;
  bool overridden = false;

  bool operator==(const NoiseReport&) const = default;
};

inline NoiseModel fit_noise_model(std::span<const MaskedSeries> population,
                                  std::span<const std::size_t> sample, std::size_t smoothing_window = 5,
                                  ElbowRule rule = ElbowRule::kConvex,
                                  DistanceNormalization norm = DistanceNormalization::kSeriesLength,
                                  const std::stop_token& stop = {}) {
  if (sample.size() < 3)
    throw Error(ErrorCode::kTooFewInstances,
                "noise reduction needs at least 3 instances, got " + std::to_string(sample.size()));
  std::vector<MaskedSeries> items;
  items.reserve(sample.size());
  for (auto i : sample) items.push_back(population[i]);

  NoiseModel m;
  m.sample.assign(sample.begin(), sample.end());
  m.linkage = hac_single_link(items, 1, norm, stop).linkage;
  m.curve = distance_curve(m.linkage, smoothing_window, rule);

  const std::size_t n = items.size();
  m.first_merge.assign(n, kNeverMerged);
  // A leaf's first merge is the merge whose operand is the leaf itself.
  for (std::size_t idx = 0; idx < m.linkage.merges.size(); ++idx) {
    const auto& mg = m.linkage.merges[idx];
    if (mg.node_a < n) m.first_merge[mg.node_a] = idx;
    if (mg.node_b < n) m.first_merge[mg.node_b] = idx;
  }
  return m;
}

/// Keeps the leaves that have joined some cluster by merge `cut` (inclusive).
inline NoiseReport noise_report_at(const NoiseModel& m, std::optional<std::size_t> cut) {
  NoiseReport r;
  r.elbow_index = cut;
  for (std::size_t leaf = 0; leaf < m.sample.size(); ++leaf) {
    bool keep = !cut || (m.first_merge[leaf] != kNeverMerged && m.first_merge[leaf] <= *cut);
    (keep ? r.kept : r.removed).push_back(m.sample[leaf]);
  }
  std::sort(r.kept.begin(), r.kept.end());
  std::sort(r.removed.begin(), r.removed.end());
  r.noise_level = static_cast<double>(r.removed.size()) / static_cast<double>(m.sample.size());
  return r;
}

/// Automatic cut at the elbow, or the cut whose removed fraction is closest to
/// override_level (ties keep more instances).
inline NoiseReport apply_noise_cut(const NoiseModel& m, std::optional<double> override_level) {
  if (!override_level) {
    std::optional<std::size_t> cut = m.curve.elbow_index;
    if (!cut && !m.curve.points.empty()) cut = m.curve.points.size() - 1;
    return noise_report_at(m, cut);
  }
  const double level = std::clamp(*override_level, 0.0, 1.0);
  const std::size_t n = m.sample.size();
  const std::size_t merges = m.linkage.merges.size();
  // removed(e) = #{leaf : first_merge > e}; scan e upward.
  std::vector<std::size_t> joined_at(merges, 0);
  for (auto fm : m.first_merge)
    if (fm != kNeverMerged) ++joined_at[fm];
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  std::size_t joined = 0;
  for (std::size_t e = 0; e < merges; ++e) {
    joined += joined_at[e];
    double frac = static_cast<double>(n - joined) / static_cast<double>(n);
    double err = std::abs(frac - level);
    if (err <= best_err) {
      best_err = err;
      best = e;
    }
  }
  auto r = noise_report_at(m, best);
  r.overridden = true;
  return r;
}

inline NoiseReport noise_reduce(std::span<const MaskedSeries> population,
                                std::span<const std::size_t> sample, std::size_t smoothing_window = 5,
                                std::optional<double> override_level = std::nullopt,
                                ElbowRule rule = ElbowRule::kConvex,
                                DistanceNormalization norm = DistanceNormalization::kSeriesLength) {
  return apply_noise_cut(fit_noise_model(population, sample, smoothing_window, rule, norm),
                         override_level);
}

// ---------------------------------------------------------------------------
// Adaptive gap statistic

struct ReferenceDraw {
  std::vector<std::size_t> indices;  // population indices
  bool fallback = false;             // residual too small; drawn with replacement
};

/// Draws |sample| members uniformly from population \ sample.
inline ReferenceDraw adaptive_reference(std::size_t population_size, std::span<const std::size_t> sample,
                                        Rng& rng) {
  std::vector<std::uint8_t> in_sample(population_size, 0);
  for (auto i : sample) in_sample.at(i) = 1;
  std::vector<std::size_t> residual;
  for (std::size_t i = 0; i < population_size; ++i)
    if (!in_sample[i]) residual.push_back(i);

  ReferenceDraw draw;
  const std::size_t want = sample.size();
  if (residual.size() >= want) {
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, residual.size() - 1);
      std::swap(residual[i], residual[pick(rng)]);
    }
    draw.indices.assign(residual.begin(), residual.begin() + static_cast<std::ptrdiff_t>(want));
    std::sort(draw.indices.begin(), draw.indices.end());
    return draw;
  }
  draw.fallback = true;
  if (residual.empty()) {
    residual.resize(population_size);
    std::iota(residual.begin(), residual.end(), 0);
  }
  std::uniform_int_distribution<std::size_t> pick(0, residual.size() - 1);
  for (std::size_t i = 0; i < want; ++i) draw.indices.push_back(residual[pick(rng)]);
  std::sort(draw.indices.begin(), draw.indices.end());
  return draw;
}

inline ReferenceDraw adaptive_reference(std::size_t population_size, std::span<const std::size_t> sample,
                                        std::uint64_t seed) {
  Rng rng(seed);
  return adaptive_reference(population_size, sample, rng);
}

/// Total within-cluster sum of squares. Centroids are taken per position over
/// the members present there; absent positions contribute nothing.
inline double masked_dispersion(std::span<const MaskedSeries> items, std::span<const std::size_t> labels) {
  if (items.empty()) return 0.0;
  std::size_t k = 0;
  for (auto l : labels) k = std::max(k, l + 1);
  const std::size_t T = items.front().size();
  std::vector<double> sum(k * T, 0.0);
  std::vector<std::size_t> cnt(k * T, 0);
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t t = 0; t < T; ++t)
      if (items[i].present(t)) {
        sum[labels[i] * T + t] += items[i].values[t];
        ++cnt[labels[i] * T + t];
      }
  for (std::size_t j = 0; j < sum.size(); ++j)
    if (cnt[j]) sum[j] /= static_cast<double>(cnt[j]);
  double w = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t t = 0; t < T; ++t)
      if (items[i].present(t)) {
        double d = items[i].values[t] - sum[labels[i] * T + t];
        w += d * d;
      }
  return w;
}

struct GapEntry {
  std::size_t k = 0;
  double w_log = 0.0;
  double w_ref_log = 0.0;  // aggregated over references
  double gap = 0.0;
  double ref_sd = 0.0;     // sd of reference logs * sqrt(1 + 1/n_ref)

  bool operator==(const GapEntry&) const = default;
};

struct GapProfile {
  std::vector<GapEntry> entries;
  std::vector<std::size_t> skipped_k;  // total dispersion 0, log undefined
  std::size_t opt_k = 1;
  bool reference_fallback = false;
  DendrogramLinkage linkage;  // full dendrogram of the sample

  bool operator==(const GapProfile&) const = default;
};

struct GapOptions {
  std::size_t n_ref = 3;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  GapRule rule = GapRule::kOneStandardError;
  RefAggregation aggregation = RefAggregation::kMean;
  DistanceNormalization norm = DistanceNormalization::kSeriesLength;
};

inline std::size_t select_k(std::span<const GapEntry> entries, GapRule rule) {
  if (entries.empty()) return 1;
  if (rule == GapRule::kArgMax) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].gap > entries[best].gap) best = i;
    return entries[best].k;
  }
  for (std::size_t i = 0; i + 1 < entries.size(); ++i)
    if (entries[i].gap >= entries[i + 1].gap - entries[i + 1].ref_sd) return entries[i].k;
  return entries.back().k;
}

/// Gap profile of the sample against residual references for k = 1..k_max.
inline GapProfile estimate_k(std::span<const MaskedSeries> population, std::span<const std::size_t> sample,
                             const GapOptions& opt, const std::stop_token& stop = {}) {
  if (sample.size() < 2)
    throw Error(ErrorCode::kTooFewInstances,
                "cluster-count estimation needs at least 2 instances, got " + std::to_string(sample.size()));
  if (opt.k_max == 0 || opt.n_ref == 0)
    throw Error(ErrorCode::kInvalidParams, "k_max and n_ref must be positive");

  auto gather = [&](std::span<const std::size_t> idx) {
    std::vector<MaskedSeries> v;
    v.reserve(idx.size());
    for (auto i : idx) v.push_back(population[i]);
    return v;
  };

  GapProfile profile;
  const auto items = gather(sample);
  profile.linkage = hac_single_link(items, 1, opt.norm, stop).linkage;

  struct Reference {
    std::vector<MaskedSeries> items;
    DendrogramLinkage linkage;
  };
  std::vector<Reference> refs;
  Rng rng(opt.seed);
  for (std::size_t r = 0; r < opt.n_ref; ++r) {
    auto draw = adaptive_reference(population.size(), sample, rng);
    profile.reference_fallback = profile.reference_fallback || draw.fallback;
    Reference ref;
    ref.items = gather(draw.indices);
    ref.linkage = hac_single_link(ref.items, 1, opt.norm, stop).linkage;
    refs.push_back(std::move(ref));
  }

  const std::size_t k_top = std::min(opt.k_max, items.size());
  for (std::size_t k = 1; k <= k_top; ++k) {
    if (stop.stop_requested()) throw Error(ErrorCode::kCancelled, "gap statistic cancelled");
    const double w = masked_dispersion(items, cut_tree(profile.linkage, k));
    std::vector<double> ref_logs;
    bool degenerate = !(w > 0.0);
    for (const auto& ref : refs) {
      double wr = masked_dispersion(ref.items, cut_tree(ref.linkage, k));
      if (!(wr > 0.0)) degenerate = true;
      ref_logs.push_back(std::log(wr));
    }
    if (degenerate) {
      profile.skipped_k.push_back(k);
      continue;
    }
    GapEntry e;
    e.k = k;
    e.w_log = std::log(w);
    double sum = 0.0;
    for (double l : ref_logs) sum += l;
    const double mean = sum / static_cast<double>(ref_logs.size());
    e.w_ref_log = opt.aggregation == RefAggregation::kMean ? mean : sum;
    double var = 0.0;
    for (double l : ref_logs) var += (l - mean) * (l - mean);
    var /= static_cast<double>(ref_logs.size());
    e.ref_sd = std::sqrt(var) * std::sqrt(1.0 + 1.0 / static_cast<double>(ref_logs.size()));
    e.gap = e.w_ref_log - e.w_log;
    profile.entries.push_back(e);
  }
  profile.opt_k = select_k(profile.entries, opt.rule);
  return profile;
}

// ---------------------------------------------------------------------------
// Combined procedure

struct NorceOptions {
  std::size_t smoothing_window = 5;
  ElbowRule elbow_rule = ElbowRule::kConvex;
  std::optional<double> noise_level;
  std::optional<std::size_t> cluster_count;
  GapOptions gap;
};

struct NorceResult {
  NoiseReport noise;
  GapProfile gap;
  std::size_t chosen_k = 0;
  /// Population indices per cluster, largest first (ties by smallest member).
  std::vector<std::vector<std::size_t>> clusters;
};

/// Cuts the kept-set dendrogram into k clusters, mapped to population indices
/// and sorted by size descending.
inline std::vector<std::vector<std::size_t>> clusters_at(const DendrogramLinkage& linkage,
                                                         std::span<const std::size_t> kept, std::size_t k) {
  auto groups = clusters_from_labels(cut_tree(linkage, k));
  for (auto& g : groups)
    for (auto& leaf : g) leaf = kept[leaf];
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return groups;
}

/// Cluster count actually used: the override when given, else the estimate,
/// clamped to the number of kept instances.
inline std::size_t effective_k(const GapProfile& gap, std::size_t kept, std::optional<std::size_t> override_k) {
  if (kept == 0) return 0;
  std::size_t k = override_k.value_or(gap.opt_k);
  return std::clamp<std::size_t>(k, 1, kept);
}

/// Estimates k on the kept set; degenerate kept sets (fewer than two) get a
/// trivial profile.
inline GapProfile estimate_k_or_trivial(std::span<const MaskedSeries> population,
                                        std::span<const std::size_t> kept, const GapOptions& opt,
                                        const std::stop_token& stop = {}) {
  if (kept.size() >= 2) return estimate_k(population, kept, opt, stop);
  GapProfile p;
  p.opt_k = 1;
  p.linkage.n_leaves = kept.size();
  return p;
}

inline NorceResult norce_from_model(std::span<const MaskedSeries> population, const NoiseModel& model,
                                    const NorceOptions& opt, const std::stop_token& stop = {}) {
  NorceResult r;
  r.noise = apply_noise_cut(model, opt.noise_level);
  r.gap = estimate_k_or_trivial(population, r.noise.kept, opt.gap, stop);
  r.chosen_k = effective_k(r.gap, r.noise.kept.size(), opt.cluster_count);
  if (r.chosen_k > 0) r.clusters = clusters_at(r.gap.linkage, r.noise.kept, r.chosen_k);
  return r;
}

inline NorceResult norce(std::span<const MaskedSeries> population, std::span<const std::size_t> sample,
                         const NorceOptions& opt, const std::stop_token& stop = {}) {
  auto model = fit_noise_model(population, sample, opt.smoothing_window, opt.elbow_rule, opt.gap.norm, stop);
  return norce_from_model(population, model, opt, stop);
}

}  // namespace seqattr
