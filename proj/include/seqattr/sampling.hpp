#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stop_token>
#include <vector>

#include "seqattr/clustering.hpp"
#include "seqattr/stats.hpp"

namespace seqattr {

struct ClassSample {
  std::size_t label = 0;
  std::size_t class_size = 0;
  /// Sub-clusters from the truncated HAC, as population indices.
  std::vector<std::vector<std::size_t>> strata;
  /// One representative per stratum, in stratum order.
  std::vector<std::size_t> sampled;
  /// True when the class is smaller than the target and was taken whole.
  bool degraded = false;

  bool operator==(const ClassSample&) const = default;
};

struct SamplePlan {
  std::size_t target_size = 0;
  std::uint64_t seed = 0;
  std::vector<ClassSample> classes;

  bool operator==(const SamplePlan&) const = default;
};

/// Equal per-class sample size derived from the smallest class.
inline std::size_t sample_size_for(std::span<const std::size_t> class_sizes, double fraction) {
  std::size_t smallest = 0;
  bool first = true;
  for (auto s : class_sizes) {
    if (s == 0) continue;
    smallest = first ? s : std::min(smallest, s);
    first = false;
  }
  if (first) return 1;
  auto s = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(smallest)));
  return std::clamp<std::size_t>(s, 1, smallest);
}

/// Per class: cluster with single-link HAC until S clusters remain, then draw
/// one member uniformly from each. Classes with fewer than S members are taken
/// whole.
inline SamplePlan stratified_sample(std::span<const MaskedSeries> series,
                                    std::span<const std::size_t> labels, std::size_t n_classes,
                                    std::size_t S, std::uint64_t seed,
                                    DistanceNormalization norm = DistanceNormalization::kSeriesLength,
                                    const std::stop_token& stop = {}) {
  if (S == 0) throw Error(ErrorCode::kInvalidParams, "sample size must be positive");
  if (series.size() != labels.size())
    throw Error(ErrorCode::kLengthMismatch, "series and labels differ in length");

  SamplePlan plan;
  plan.target_size = S;
  plan.seed = seed;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassSample cs;
    cs.label = c;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    cs.class_size = members.size();
    if (members.empty()) {
      plan.classes.push_back(std::move(cs));
      continue;
    }
    if (members.size() <= S) {
      cs.degraded = members.size() < S;
      for (auto m : members) cs.strata.push_back({m});
      cs.sampled = members;
      plan.classes.push_back(std::move(cs));
      continue;
    }

    std::vector<MaskedSeries> items;
    items.reserve(members.size());
    for (auto m : members) items.push_back(series[m]);
    auto hac = hac_single_link(items, S, norm, stop);

    Rng rng(mix_seed(seed, c));
    for (const auto& cluster : hac.clusters) {
      std::vector<std::size_t> stratum;
      stratum.reserve(cluster.size());
      for (auto leaf : cluster) stratum.push_back(members[leaf]);
      std::uniform_int_distribution<std::size_t> pick(0, stratum.size() - 1);
      cs.sampled.push_back(stratum[pick(rng)]);
      cs.strata.push_back(std::move(stratum));
    }
    plan.classes.push_back(std::move(cs));
  }
  return plan;
}

}  // namespace seqattr
