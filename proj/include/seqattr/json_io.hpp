#pragma once

// JSON payloads: analysis parameters (full echo and partial patches), analysis
// results, summaries and the exported result document.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seqattr/ingest.hpp"
#include "seqattr/pipeline.hpp"

namespace seqattr {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kPayloadVersion = "1.0";

namespace detail {

template <class E>
struct EnumNames;

#define SEQATTR_ENUM_NAMES(E, ...)                                         \
  template <>                                                              \
  struct EnumNames<E> {                                                    \
    static constexpr std::pair<E, std::string_view> table[] = {__VA_ARGS__}; \
  };

SEQATTR_ENUM_NAMES(AttentionMode, {AttentionMode::kHistogram, "histogram"}, {AttentionMode::kPercentile, "percentile"})
SEQATTR_ENUM_NAMES(AttentionLevel, {AttentionLevel::kAuto, "auto"}, {AttentionLevel::kEvent, "event"},
                   {AttentionLevel::kFeature, "feature"})
SEQATTR_ENUM_NAMES(ElbowRule, {ElbowRule::kConvex, "convex"}, {ElbowRule::kAbsolute, "absolute"})
SEQATTR_ENUM_NAMES(GapRule, {GapRule::kOneStandardError, "one_se"}, {GapRule::kArgMax, "argmax"})
SEQATTR_ENUM_NAMES(RefAggregation, {RefAggregation::kMean, "mean"}, {RefAggregation::kSum, "sum"})
SEQATTR_ENUM_NAMES(DistanceNormalization, {DistanceNormalization::kSeriesLength, "series_length"},
                   {DistanceNormalization::kSharedSupport, "shared_support"})

#undef SEQATTR_ENUM_NAMES

}  // namespace detail

template <class E>
std::string_view enum_name(E e) {
  for (const auto& [v, n] : detail::EnumNames<E>::table)
    if (v == e) return n;
  return "?";
}

template <class E>
E parse_enum(std::string_view name, std::string_view field) {
  std::string allowed;
  for (const auto& [v, n] : detail::EnumNames<E>::table) {
    if (n == name) return v;
    allowed += (allowed.empty() ? "" : "|") + std::string(n);
  }
  throw Error(ErrorCode::kInvalidParams,
              std::string(field) + ": '" + std::string(name) + "' is not one of " + allowed);
}

inline Json params_json(const AnalysisParams& p) {
  Json j;
  j["aoi"] = Json::array();
  for (const auto& r : p.aoi) j["aoi"].push_back({r.lo, r.hi});
  j["attention_mode"] = enum_name(p.attention_mode);
  j["attention_level"] = enum_name(p.attention_level);
  j["sample_fraction"] = p.sample_fraction;
  j["noise_level"] = p.noise_level ? Json(*p.noise_level) : Json("auto");
  j["cluster_count"] = p.cluster_count ? Json(*p.cluster_count) : Json("auto");
  j["n_ref"] = p.n_ref;
  j["k_max"] = p.k_max;
  j["bin_count"] = p.bin_count;
  j["quantile_edges"] = p.quantile_edges;
  j["seed"] = p.seed;
  j["smoothing_window"] = p.smoothing_window;
  j["elbow_rule"] = enum_name(p.elbow_rule);
  j["gap_rule"] = enum_name(p.gap_rule);
  j["ref_aggregation"] = enum_name(p.ref_aggregation);
  j["distance_normalization"] = enum_name(p.distance_normalization);
  j["class_a"] = p.class_a;
  j["class_b"] = p.class_b;
  return j;
}

/// Applies the keys present in `patch` onto `base`. Unknown keys and
/// ill-typed values raise kInvalidParams. The result is validated.
/// `aoi_top_percent` needs attention data and is handled by the caller.
inline AnalysisParams apply_params_patch(AnalysisParams base, const Json& patch) {
  if (!patch.is_object()) throw Error(ErrorCode::kInvalidParams, "parameter patch must be a JSON object");
  for (const auto& [key, v] : patch.items()) {
    try {
      auto auto_or = [&](auto& field) {
        using T = typename std::decay_t<decltype(field)>::value_type;
        if (v.is_null() || (v.is_string() && v.get<std::string>() == "auto"))
          field.reset();
        else
          field = v.get<T>();
      };
      if (key == "aoi") {
        AoiSet aoi;
        for (const auto& r : v) {
          if (!r.is_array() || r.size() != 2) throw Error(ErrorCode::kInvalidParams, "aoi entries must be [lo, hi]");
          aoi.push_back({r[0].get<double>(), r[1].get<double>()});
        }
        base.aoi = std::move(aoi);
      } else if (key == "attention_mode") {
        base.attention_mode = parse_enum<AttentionMode>(v.get<std::string>(), key);
      } else if (key == "attention_level") {
        base.attention_level = parse_enum<AttentionLevel>(v.get<std::string>(), key);
      } else if (key == "sample_fraction") {
        base.sample_fraction = v.get<double>();
      } else if (key == "noise_level") {
        auto_or(base.noise_level);
      } else if (key == "cluster_count") {
        if (v.is_number_integer() && v.get<long long>() <= 0)
          throw Error(ErrorCode::kInvalidParams, "cluster_count must be positive");
        auto_or(base.cluster_count);
      } else if (key == "n_ref") {
        base.n_ref = v.get<std::size_t>();
      } else if (key == "k_max") {
        base.k_max = v.get<std::size_t>();
      } else if (key == "bin_count") {
        base.bin_count = v.get<std::size_t>();
      } else if (key == "quantile_edges") {
        base.quantile_edges = v.get<std::vector<double>>();
      } else if (key == "seed") {
        base.seed = v.get<std::uint64_t>();
      } else if (key == "smoothing_window") {
        base.smoothing_window = v.get<std::size_t>();
      } else if (key == "elbow_rule") {
        base.elbow_rule = parse_enum<ElbowRule>(v.get<std::string>(), key);
      } else if (key == "gap_rule") {
        base.gap_rule = parse_enum<GapRule>(v.get<std::string>(), key);
      } else if (key == "ref_aggregation") {
        base.ref_aggregation = parse_enum<RefAggregation>(v.get<std::string>(), key);
      } else if (key == "distance_normalization") {
        base.distance_normalization = parse_enum<DistanceNormalization>(v.get<std::string>(), key);
      } else if (key == "class_a") {
        base.class_a = v.get<std::size_t>();
      } else if (key == "class_b") {
        base.class_b = v.get<std::size_t>();
      } else {
        throw Error(ErrorCode::kInvalidParams, "unknown parameter '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidParams, key + ": " + e.what());
    }
  }
  validate_params(base);
  return base;
}

inline Json error_json(const Error& e) {
  Json j;
  j["error"] = to_string(e.code());
  j["message"] = e.what();
  if (e.where()) {
    const auto& w = *e.where();
    Json loc;
    loc["file"] = w.file;
    loc["record"] = w.record ? Json(*w.record) : Json(nullptr);
    loc["field"] = w.field;
    j["location"] = loc;
  }
  return j;
}

inline Json score_json(const FeatureScore& s, const std::vector<std::string>& names) {
  Json j;
  j["feature_id"] = s.feature_id;
  j["name"] = s.feature_id < names.size() ? names[s.feature_id] : "";
  j["score"] = s.score;
  j["c_term"] = s.c_term;
  j["v_term"] = s.v_term;
  j["n_contributing"] = s.n_contributing;
  return j;
}

inline Json ranking_json(const std::vector<FeatureScore>& ranking, const std::vector<std::string>& names) {
  Json arr = Json::array();
  for (const auto& s : ranking) arr.push_back(score_json(s, names));
  return arr;
}

inline Json ids_json(const std::vector<std::size_t>& idx, const std::vector<std::string>& ids) {
  Json arr = Json::array();
  for (auto i : idx) arr.push_back(i < ids.size() ? ids[i] : std::to_string(i));
  return arr;
}

inline Json cluster_json(const ClusterSummary& c, const std::vector<std::string>& ids) {
  Json j;
  j["cluster_id"] = c.cluster_id;
  j["class_label"] = c.class_label;
  j["feature_id"] = c.feature_id;
  j["size"] = c.size;
  j["members"] = ids_json(c.members, ids);
  j["t_begin"] = c.t_begin;
  Json bands = Json::array();
  for (const auto& e : c.band_edges) bands.push_back(e ? Json(*e) : Json(nullptr));
  j["band_edges"] = bands;
  j["contribution_counts"] = c.contribution_counts;
  return j;
}

inline Json comparison_json(const ClassComparison& c, const std::vector<std::string>& ids) {
  Json j;
  j["feature_id"] = c.feature_id;
  j["class_a"] = c.class_a;
  j["class_b"] = c.class_b;
  j["time_axis"] = {c.time_axis.begin, c.time_axis.end};
  j["value_axis"] = c.value_axis ? Json({c.value_axis->first, c.value_axis->second}) : Json(nullptr);
  Json a = Json::array(), b = Json::array();
  for (const auto& s : c.clusters_a) a.push_back(cluster_json(s, ids));
  for (const auto& s : c.clusters_b) b.push_back(cluster_json(s, ids));
  j["clusters_a"] = a;
  j["clusters_b"] = b;
  return j;
}

inline Json noise_json(const NoiseReport& n, const std::vector<std::string>& ids) {
  Json j;
  j["kept"] = ids_json(n.kept, ids);
  j["removed"] = ids_json(n.removed, ids);
  j["elbow_index"] = n.elbow_index ? Json(*n.elbow_index) : Json(nullptr);
  j["noise_level"] = n.noise_level;
  j["overridden"] = n.overridden;
  return j;
}

inline Json gap_json(const GapProfile& g) {
  Json j;
  Json entries = Json::array();
  for (const auto& e : g.entries)
    entries.push_back(
        {{"k", e.k}, {"w_log", e.w_log}, {"w_ref_log", e.w_ref_log}, {"gap", e.gap}, {"ref_sd", e.ref_sd}});
  j["entries"] = entries;
  j["skipped_k"] = g.skipped_k;
  j["opt_k"] = g.opt_k;
  j["reference_fallback"] = g.reference_fallback;
  return j;
}

inline Json class_meta_json(const ClassAnalysis& c, const std::vector<std::string>& ids) {
  Json j;
  j["label"] = c.label;
  j["class_size"] = c.class_size;
  j["noise"] = noise_json(c.noise, ids);
  j["gap"] = gap_json(c.gap);
  j["chosen_k"] = c.chosen_k;
  return j;
}

inline Json sample_json(const SamplePlan& s, const std::vector<std::string>& ids) {
  Json j;
  j["target_size"] = s.target_size;
  j["seed"] = s.seed;
  Json classes = Json::array();
  for (const auto& c : s.classes)
    classes.push_back({{"label", c.label},
                       {"class_size", c.class_size},
                       {"degraded", c.degraded},
                       {"sampled", ids_json(c.sampled, ids)}});
  j["classes"] = classes;
  return j;
}

inline Json feature_json(const FeatureAnalysis& f, const AnalysisResult& r) {
  Json j;
  j["feature_id"] = f.feature_id;
  j["name"] = f.feature_id < r.feature_names.size() ? r.feature_names[f.feature_id] : "";
  j["sample"] = sample_json(f.sample, r.instance_ids);
  Json classes = Json::array();
  for (const auto& c : f.classes) {
    Json cj = class_meta_json(c, r.instance_ids);
    Json clusters = Json::array();
    for (const auto& s : c.summary.clusters) clusters.push_back(cluster_json(s, r.instance_ids));
    cj["clusters"] = clusters;
    classes.push_back(cj);
  }
  j["classes"] = classes;
  j["comparison"] = f.comparison ? comparison_json(*f.comparison, r.instance_ids) : Json(nullptr);
  return j;
}

inline Json result_json(const AnalysisResult& r) {
  Json j;
  j["schema_version"] = kPayloadVersion;
  j["params"] = params_json(r.params);
  j["attention_level"] = enum_name(r.level);
  j["ranking"] = ranking_json(r.ranking, r.feature_names);
  Json feats = Json::array();
  for (const auto& f : r.features) feats.push_back(feature_json(f, r));
  j["features"] = feats;
  return j;
}

/// Comparison payload for one feature plus the noise and cluster-count metadata
/// of both compared classes.
inline Json summary_json(const AnalysisResult& r, std::size_t feature_id, std::optional<TimeWindow> focus = {}) {
  if (feature_id >= r.features.size())
    throw Error(ErrorCode::kUnknownFeature, "feature " + std::to_string(feature_id) + " does not exist");
  const auto& f = r.features[feature_id];
  const auto& a = f.classes.at(r.params.class_a);
  const auto& b = f.classes.at(r.params.class_b);
  Json j;
  j["schema_version"] = kPayloadVersion;
  j["params"] = params_json(r.params);
  j["feature_id"] = feature_id;
  j["name"] = feature_id < r.feature_names.size() ? r.feature_names[feature_id] : "";
  j["comparison"] = comparison_json(build_comparison(a.summary, b.summary, focus), r.instance_ids);
  j["class_a"] = class_meta_json(a, r.instance_ids);
  j["class_b"] = class_meta_json(b, r.instance_ids);
  return j;
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

/// Writes the full result document. Same result -> same bytes.
inline void export_summary(const AnalysisResult& r, const std::filesystem::path& path) {
  std::string text;
  try {
    text = dump_json(result_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoFailure, std::string("serialization failed: ") + e.what());
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  detail::write_text(path, text);
}

}  // namespace seqattr
