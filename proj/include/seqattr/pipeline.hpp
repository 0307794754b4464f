#pragma once

// End-to-end analysis: AOI filter -> ranking -> stratified sample and noise
// dendrogram -> noise cut and cluster-count estimate -> cut and summaries.
// Each stage is cached under the parameter subset it depends on.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "seqattr/attribution.hpp"
#include "seqattr/core.hpp"
#include "seqattr/norce.hpp"
#include "seqattr/sampling.hpp"
#include "seqattr/summarize.hpp"

namespace seqattr {

struct ClassAnalysis {
  std::size_t label = 0;
  std::size_t class_size = 0;
  NoiseReport noise;  // dataset instance indices
  GapProfile gap;
  std::size_t chosen_k = 0;
  ClassSummary summary;  // members are dataset instance indices
};

struct FeatureAnalysis {
  std::size_t feature_id = 0;
  SamplePlan sample;  // dataset instance indices
  std::vector<ClassAnalysis> classes;
  std::optional<ClassComparison> comparison;  // class_a vs class_b
};

struct AnalysisResult {
  AnalysisParams params;
  AttentionLevel level = AttentionLevel::kEvent;
  std::vector<std::string> instance_ids;
  std::vector<std::string> feature_names;
  std::vector<FeatureScore> ranking;
  std::vector<FeatureAnalysis> features;
};

struct StageCounters {
  std::size_t filter = 0;
  std::size_t ranking = 0;
  std::size_t sample = 0;
  std::size_t norce = 0;
  std::size_t cut = 0;
};

inline constexpr std::string_view kStageFilter = "filter";
inline constexpr std::string_view kStageRanking = "ranking";
inline constexpr std::string_view kStageSample = "sample";
inline constexpr std::string_view kStageNorce = "norce";
inline constexpr std::string_view kStageCut = "cut";

namespace detail {

inline auto filter_key(const AnalysisParams& p) { return std::tuple(p.aoi, p.attention_level); }
inline auto ranking_key(const AnalysisParams& p) { return std::tuple(filter_key(p), p.bin_count); }
inline auto sample_key(const AnalysisParams& p) {
  return std::tuple(filter_key(p), p.sample_fraction, p.seed, p.distance_normalization, p.smoothing_window,
                    p.elbow_rule);
}
inline auto norce_key(const AnalysisParams& p) {
  return std::tuple(sample_key(p), p.noise_level, p.n_ref, p.k_max, p.gap_rule, p.ref_aggregation);
}
inline auto cut_key(const AnalysisParams& p) {
  return std::tuple(norce_key(p), p.cluster_count, p.quantile_edges, p.class_a, p.class_b);
}

// Per feature, per class: the class population and its noise dendrogram.
struct ClassModel {
  std::vector<std::size_t> members;  // dataset indices; local index -> dataset index
  std::vector<MaskedSeries> population;
  std::optional<NoiseModel> model;  // absent when the sample is too small to fit
};

struct SampleStage {
  std::vector<SamplePlan> plans;                 // per feature
  std::vector<std::vector<ClassModel>> models;   // [feature][class]
};

struct ClassNorce {
  NoiseReport noise;  // local indices
  GapProfile gap;
};

struct NorceStage {
  std::vector<std::vector<ClassNorce>> classes;  // [feature][class]
};

inline std::vector<std::size_t> to_dataset(std::span<const std::size_t> local, std::span<const std::size_t> members) {
  std::vector<std::size_t> out;
  out.reserve(local.size());
  for (auto i : local) out.push_back(members[i]);
  return out;
}

}  // namespace detail

/// Stateful runner for one bundle. Not thread-safe; callers serialize run().
class Pipeline {
 public:
  using StageCallback = std::function<void(std::string_view)>;

  Pipeline(std::shared_ptr<const SequenceDataset> ds, std::shared_ptr<const AttentionTensor> att)
      : ds_(std::move(ds)), att_(std::move(att)) {}

  const SequenceDataset& dataset() const { return *ds_; }
  const AttentionTensor& attention() const { return *att_; }
  const StageCounters& counters() const { return counters_; }

  AnalysisResult run(const AnalysisParams& p, const std::stop_token& stop = {}, const StageCallback& on_stage = {}) {
    validate_params(p);
    const auto& ds = *ds_;
    if (p.class_a >= ds.L || p.class_b >= ds.L)
      throw Error(ErrorCode::kInvalidParams, "compared classes must be below L=" + std::to_string(ds.L));
    auto enter = [&](std::string_view stage) {
      if (stop.stop_requested()) throw Error(ErrorCode::kCancelled, "cancelled before stage " + std::string(stage));
      if (on_stage) on_stage(stage);
    };

    if (!filter_ || filter_key_ != detail::filter_key(p)) {
      enter(kStageFilter);
      filter_ = std::make_shared<FilteredTensor>(
          aoi_filter(ds, *att_, p.aoi, resolve_level(p.attention_level, *att_)));
      filter_key_ = detail::filter_key(p);
      ++counters_.filter;
      ranking_.reset();
      sample_.reset();
    }
    if (!ranking_ || ranking_key_ != detail::ranking_key(p)) {
      enter(kStageRanking);
      ranking_ = std::make_shared<std::vector<FeatureScore>>(rank_features(score_features(ds, *filter_, p.bin_count)));
      ranking_key_ = detail::ranking_key(p);
      ++counters_.ranking;
    }
    if (!sample_ || sample_key_ != detail::sample_key(p)) {
      enter(kStageSample);
      sample_ = std::make_shared<detail::SampleStage>(compute_sample(p, stop));
      sample_key_ = detail::sample_key(p);
      ++counters_.sample;
      norce_.reset();
    }
    if (!norce_ || norce_key_ != detail::norce_key(p)) {
      enter(kStageNorce);
      norce_ = std::make_shared<detail::NorceStage>(compute_norce(p, stop));
      norce_key_ = detail::norce_key(p);
      ++counters_.norce;
      cut_.reset();
    }
    if (!cut_ || cut_key_ != detail::cut_key(p)) {
      enter(kStageCut);
      cut_ = std::make_shared<std::vector<FeatureAnalysis>>(compute_cut(p));
      cut_key_ = detail::cut_key(p);
      ++counters_.cut;
    }

    AnalysisResult r;
    r.params = p;
    r.level = filter_->level;
    for (const auto& inst : ds.instances) r.instance_ids.push_back(inst.id);
    for (const auto& f : ds.features) r.feature_names.push_back(f.name);
    r.ranking = *ranking_;
    r.features = *cut_;
    return r;
  }

 private:
  detail::SampleStage compute_sample(const AnalysisParams& p, const std::stop_token& stop) const {
    const auto& ds = *ds_;
    std::vector<std::size_t> labels;
    labels.reserve(ds.instances.size());
    for (const auto& inst : ds.instances) labels.push_back(inst.label);
    const auto sizes = ds.class_sizes();
    const std::size_t S = sample_size_for(sizes, p.sample_fraction);

    detail::SampleStage st;
    for (std::size_t f = 0; f < ds.F; ++f) {
      const auto& series = filter_->feature(f);
      const std::uint64_t fseed = mix_seed(p.seed, f);
      st.plans.push_back(stratified_sample(series, labels, ds.L, S, fseed, p.distance_normalization, stop));
      std::vector<detail::ClassModel> per_class;
      for (std::size_t c = 0; c < ds.L; ++c) {
        detail::ClassModel cm;
        std::vector<std::size_t> local_of(ds.instances.size(), 0);
        for (std::size_t i = 0; i < labels.size(); ++i)
          if (labels[i] == c) {
            local_of[i] = cm.members.size();
            cm.members.push_back(i);
            cm.population.push_back(series[i]);
          }
        std::vector<std::size_t> sample_local;
        for (auto i : st.plans.back().classes[c].sampled) sample_local.push_back(local_of[i]);
        if (sample_local.size() >= 3)
          cm.model = fit_noise_model(cm.population, sample_local, p.smoothing_window, p.elbow_rule,
                                     p.distance_normalization, stop);
        per_class.push_back(std::move(cm));
      }
      st.models.push_back(std::move(per_class));
    }
    return st;
  }

  detail::NorceStage compute_norce(const AnalysisParams& p, const std::stop_token& stop) const {
    detail::NorceStage st;
    for (std::size_t f = 0; f < ds_->F; ++f) {
      std::vector<detail::ClassNorce> per_class;
      for (std::size_t c = 0; c < ds_->L; ++c) {
        const auto& cm = sample_->models[f][c];
        detail::ClassNorce cn;
        if (cm.model) {
          cn.noise = apply_noise_cut(*cm.model, p.noise_level);
        } else {
          // Too few sampled instances to fit a noise curve: keep them all.
          const auto& sampled = sample_->plans[f].classes[c].sampled;
          for (auto i : sampled)
            cn.noise.kept.push_back(static_cast<std::size_t>(
                std::lower_bound(cm.members.begin(), cm.members.end(), i) - cm.members.begin()));
          std::sort(cn.noise.kept.begin(), cn.noise.kept.end());
        }
        GapOptions g;
        g.n_ref = p.n_ref;
        g.k_max = p.k_max;
        g.seed = mix_seed(mix_seed(p.seed, f), ds_->L + c);
        g.rule = p.gap_rule;
        g.aggregation = p.ref_aggregation;
        g.norm = p.distance_normalization;
        cn.gap = estimate_k_or_trivial(cm.population, cn.noise.kept, g, stop);
        per_class.push_back(std::move(cn));
      }
      st.classes.push_back(std::move(per_class));
    }
    return st;
  }

  std::vector<FeatureAnalysis> compute_cut(const AnalysisParams& p) const {
    std::vector<FeatureAnalysis> out;
    for (std::size_t f = 0; f < ds_->F; ++f) {
      FeatureAnalysis fa;
      fa.feature_id = f;
      fa.sample = sample_->plans[f];
      for (std::size_t c = 0; c < ds_->L; ++c) {
        const auto& cm = sample_->models[f][c];
        const auto& cn = norce_->classes[f][c];
        ClassAnalysis ca;
        ca.label = c;
        ca.class_size = cm.members.size();
        ca.noise = cn.noise;
        ca.noise.kept = detail::to_dataset(cn.noise.kept, cm.members);
        ca.noise.removed = detail::to_dataset(cn.noise.removed, cm.members);
        ca.gap = cn.gap;
        ca.chosen_k = effective_k(cn.gap, cn.noise.kept.size(), p.cluster_count);
        std::vector<std::vector<std::size_t>> clusters;
        if (ca.chosen_k > 0) {
          if (cn.noise.kept.size() == 1)
            clusters = {{cn.noise.kept.front()}};
          else
            clusters = clusters_at(cn.gap.linkage, cn.noise.kept, ca.chosen_k);
        }
        for (auto& cl : clusters) cl = detail::to_dataset(cl, cm.members);
        ca.summary = summarize_class(filter_->feature(f), clusters, c, f, p.quantile_edges);
        fa.classes.push_back(std::move(ca));
      }
      fa.comparison = build_comparison(fa.classes[p.class_a].summary, fa.classes[p.class_b].summary);
      out.push_back(std::move(fa));
    }
    return out;
  }

  std::shared_ptr<const SequenceDataset> ds_;
  std::shared_ptr<const AttentionTensor> att_;
  StageCounters counters_;

  std::shared_ptr<const FilteredTensor> filter_;
  decltype(detail::filter_key(AnalysisParams{})) filter_key_;
  std::shared_ptr<const std::vector<FeatureScore>> ranking_;
  decltype(detail::ranking_key(AnalysisParams{})) ranking_key_;
  std::shared_ptr<const detail::SampleStage> sample_;
  decltype(detail::sample_key(AnalysisParams{})) sample_key_;
  std::shared_ptr<const detail::NorceStage> norce_;
  decltype(detail::norce_key(AnalysisParams{})) norce_key_;
  std::shared_ptr<const std::vector<FeatureAnalysis>> cut_;
  decltype(detail::cut_key(AnalysisParams{})) cut_key_;
};

/// One-shot convenience wrapper.
inline AnalysisResult analyze(const SequenceDataset& ds, const AttentionTensor& att, const AnalysisParams& p,
                              const std::stop_token& stop = {}) {
  Pipeline pipe(std::make_shared<const SequenceDataset>(ds), std::make_shared<const AttentionTensor>(att));
  return pipe.run(p, stop);
}

}  // namespace seqattr
