// seqattr: batch analysis and HTTP service for attention-filtered sequence data.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqattr/seqattr.hpp"
#include "seqattr/service.hpp"

namespace {

using seqattr::Json;

// Flags that map onto AnalysisParams. Unset flags leave defaults alone.
struct ParamFlags {
  std::optional<std::string> aoi;
  std::optional<double> aoi_top_percent;
  std::optional<std::string> attention_level;
  std::optional<std::string> attention_mode;
  std::optional<double> sample_fraction;
  std::optional<std::string> noise_level;
  std::optional<std::string> clusters;
  std::optional<std::size_t> n_ref;
  std::optional<std::size_t> k_max;
  std::optional<std::size_t> bins;
  std::optional<std::string> quantiles;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> smoothing_window;
  std::optional<std::string> elbow_rule;
  std::optional<std::string> gap_rule;
  std::optional<std::string> ref_aggregation;
  std::optional<std::string> distance_normalization;
  std::optional<std::size_t> class_a;
  std::optional<std::size_t> class_b;

  void attach(CLI::App* app) {
    app->add_option("--aoi", aoi, "attention ranges of interest, e.g. 0.8-1.0,0.1-0.2");
    app->add_option("--aoi-top-percent", aoi_top_percent, "select the top P% of event attention")
        ->excludes("--aoi");
    app->add_option("--attention-level", attention_level, "auto|event|feature");
    app->add_option("--attention-mode", attention_mode, "histogram|percentile");
    app->add_option("--sample-fraction", sample_fraction, "per-class sample fraction in (0,1]");
    app->add_option("--noise-level", noise_level, "removed fraction in [0,1], or auto");
    app->add_option("--clusters", clusters, "cluster count, or auto");
    app->add_option("--n-ref", n_ref, "reference sets for the gap statistic");
    app->add_option("--k-max", k_max, "largest cluster count considered");
    app->add_option("--bins", bins, "bins for the contribution score");
    app->add_option("--quantiles", quantiles, "band percentiles, e.g. 10,30,50,70,90");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--smoothing-window", smoothing_window, "odd moving-average window for the merge curve");
    app->add_option("--elbow-rule", elbow_rule, "convex|absolute");
    app->add_option("--gap-rule", gap_rule, "one_se|argmax");
    app->add_option("--ref-aggregation", ref_aggregation, "mean|sum");
    app->add_option("--distance-normalization", distance_normalization, "series_length|shared_support");
    app->add_option("--class-a", class_a, "first compared class");
    app->add_option("--class-b", class_b, "second compared class");
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
      if (!item.empty()) out.push_back(item);
    return out;
  }

  static double to_real(const std::string& s, const char* flag) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw seqattr::Error(seqattr::ErrorCode::kInvalidParams, std::string(flag) + ": not a number: '" + s + "'");
  }

  Json patch(const seqattr::AttentionTensor& att) const {
    Json j = Json::object();
    if (aoi) {
      Json arr = Json::array();
      for (const auto& r : split(*aoi, ',')) {
        auto dash = r.find('-', 1);
        if (dash == std::string::npos)
          throw seqattr::Error(seqattr::ErrorCode::kInvalidParams, "--aoi: range '" + r + "' is not lo-hi");
        arr.push_back({to_real(r.substr(0, dash), "--aoi"), to_real(r.substr(dash + 1), "--aoi")});
      }
      j["aoi"] = arr;
    }
    if (aoi_top_percent) {
      if (!(*aoi_top_percent > 0.0 && *aoi_top_percent <= 100.0))
        throw seqattr::Error(seqattr::ErrorCode::kInvalidParams, "--aoi-top-percent must be in (0,100]");
      Json arr = Json::array();
      for (const auto& r : seqattr::top_percent_aoi(att, *aoi_top_percent)) arr.push_back({r.lo, r.hi});
      j["aoi"] = arr;
    }
    if (attention_level) j["attention_level"] = *attention_level;
    if (attention_mode) j["attention_mode"] = *attention_mode;
    if (sample_fraction) j["sample_fraction"] = *sample_fraction;
    if (noise_level) j["noise_level"] = *noise_level == "auto" ? Json("auto") : Json(to_real(*noise_level, "--noise-level"));
    if (clusters) {
      if (*clusters == "auto") {
        j["cluster_count"] = "auto";
      } else {
        double k = to_real(*clusters, "--clusters");
        if (k < 1 || k != static_cast<double>(static_cast<long long>(k)))
          throw seqattr::Error(seqattr::ErrorCode::kInvalidParams, "--clusters must be a positive integer or auto");
        j["cluster_count"] = static_cast<std::size_t>(k);
      }
    }
    if (n_ref) j["n_ref"] = *n_ref;
    if (k_max) j["k_max"] = *k_max;
    if (bins) j["bin_count"] = *bins;
    if (quantiles) {
      std::vector<double> q;
      for (const auto& s : split(*quantiles, ',')) q.push_back(to_real(s, "--quantiles"));
      j["quantile_edges"] = q;
    }
    if (seed) j["seed"] = *seed;
    if (smoothing_window) j["smoothing_window"] = *smoothing_window;
    if (elbow_rule) j["elbow_rule"] = *elbow_rule;
    if (gap_rule) j["gap_rule"] = *gap_rule;
    if (ref_aggregation) j["ref_aggregation"] = *ref_aggregation;
    if (distance_normalization) j["distance_normalization"] = *distance_normalization;
    if (class_a) j["class_a"] = *class_a;
    if (class_b) j["class_b"] = *class_b;
    return j;
  }
};

void write_output(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  seqattr::detail::write_text(out, text);
}

int report_error(const seqattr::Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-filtered sequence analysis: feature ranking, noise-robust clustering and summaries"};
  app.require_subcommand(1);

  // validate
  auto* validate = app.add_subcommand("validate", "load a bundle and check every invariant");
  std::string v_manifest;
  validate->add_option("manifest", v_manifest, "bundle manifest (JSON)")->required();

  // rank
  auto* rank = app.add_subcommand("rank", "rank features by contribution score under an AOI");
  std::string r_manifest, r_out;
  ParamFlags r_flags;
  rank->add_option("manifest", r_manifest, "bundle manifest (JSON)")->required();
  rank->add_option("--out", r_out, "output file (default stdout)");
  r_flags.attach(rank);

  // summarize
  auto* summarize = app.add_subcommand("summarize", "run the full pipeline and export the result document");
  std::string s_manifest, s_out;
  std::optional<std::size_t> s_feature;
  bool s_ci = false;
  ParamFlags s_flags;
  summarize->add_option("manifest", s_manifest, "bundle manifest (JSON)")->required();
  summarize->add_option("--out", s_out, "output file (default stdout)");
  summarize->add_option("--feature", s_feature, "emit only the comparison payload of this feature");
  summarize->add_flag("--ci", s_ci, "CI mode: an explicit --seed is required");
  s_flags.attach(summarize);

  // serve
  auto* serve = app.add_subcommand("serve", "start the HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port");

  // demo
  auto* demo = app.add_subcommand("demo", "write a seeded synthetic bundle");
  std::string d_out;
  seqattr::SyntheticSpec d_spec;
  demo->add_option("out", d_out, "output directory")->required();
  demo->add_option("--per-class", d_spec.per_class, "instances per class");
  demo->add_option("--classes", d_spec.L, "number of classes");
  demo->add_option("-T,--steps", d_spec.T, "time steps");
  demo->add_option("-F,--features", d_spec.F, "features");
  demo->add_option("--seed", d_spec.seed, "random seed");
  demo->add_flag("--feature-attention", d_spec.feature_attention, "also write feature-level attention");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      auto b = seqattr::load_bundle(v_manifest);
      std::cout << "ok: " << b.dataset.instances.size() << " instances, T=" << b.dataset.T << ", F=" << b.dataset.F
                << ", L=" << b.dataset.L << (b.attention.feature_level ? ", feature-level attention" : "") << "\n";
      return 0;
    }
    if (*rank) {
      auto b = seqattr::load_bundle(r_manifest);
      auto p = seqattr::apply_params_patch({}, r_flags.patch(b.attention));
      auto ft = seqattr::aoi_filter(b.dataset, b.attention, p.aoi, seqattr::resolve_level(p.attention_level, b.attention));
      std::vector<std::string> names;
      for (const auto& f : b.dataset.features) names.push_back(f.name);
      Json j;
      j["schema_version"] = seqattr::kPayloadVersion;
      j["params"] = seqattr::params_json(p);
      j["attention_level"] = seqattr::enum_name(ft.level);
      j["ranking"] = seqattr::ranking_json(seqattr::rank_features(seqattr::score_features(b.dataset, ft, p.bin_count)), names);
      write_output(seqattr::dump_json(j), r_out);
      return 0;
    }
    if (*summarize) {
      if (s_ci && !s_flags.seed) throw seqattr::Error(seqattr::ErrorCode::kInvalidParams, "--ci requires --seed");
      auto b = seqattr::load_bundle(s_manifest);
      auto p = seqattr::apply_params_patch({}, s_flags.patch(b.attention));
      auto r = seqattr::analyze(b.dataset, b.attention, p);
      if (s_feature) {
        write_output(seqattr::dump_json(seqattr::summary_json(r, *s_feature)), s_out);
      } else if (s_out.empty() || s_out == "-") {
        std::cout << seqattr::dump_json(seqattr::result_json(r));
      } else {
        seqattr::export_summary(r, s_out);
      }
      return 0;
    }
    if (*serve) {
      seqattr::SessionManager mgr;
      httplib::Server server;
      seqattr::mount_routes(server, mgr);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }
    if (*demo) {
      auto b = seqattr::make_synthetic(d_spec);
      auto path = seqattr::save_bundle(b.dataset, b.attention, d_out);
      std::cout << path.string() << "\n";
      return 0;
    }
  } catch (const seqattr::Error& e) {
    return report_error(e);
  }
  return 0;
}
