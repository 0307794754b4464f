#pragma once

// Session manager and HTTP routes. Each session owns one worker thread that
// runs the pipeline; a parameter update cancels whatever job is in flight and
// queues a new one (latest request wins). Readers only ever see a result that
// was published whole.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>

#include "seqattr/attribution.hpp"
#include "seqattr/ingest.hpp"
#include "seqattr/json_io.hpp"
#include "seqattr/pipeline.hpp"

namespace seqattr {

enum class JobState { kQueued, kRunning, kDone, kCancelled, kFailed };

inline std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kCancelled: return "cancelled";
    case JobState::kFailed: return "failed";
  }
  return "?";
}

struct SessionStatus {
  std::string state;  // idle | running | cancelled | failed
  std::string stage;  // current stage while running
  std::uint64_t latest_job = 0;
  std::uint64_t published_job = 0;
  std::optional<std::string> failure;
};

struct ServiceOptions {
  /// Queue a job with default parameters when a session is created.
  bool run_on_create = true;
  /// Called from the worker on entry to every stage (test hook).
  std::function<void(const std::string& session, std::uint64_t job, std::string_view stage)> stage_hook;
};

/// Dashboard payload: attribute distributions per class, attention
/// distribution, embedding coordinates and the ranking on unfiltered data.
inline Json dashboard_json(const SequenceDataset& ds, const AttentionTensor& att, const AnalysisParams& p) {
  Json j;
  j["schema_version"] = kPayloadVersion;
  j["T"] = ds.T;
  j["F"] = ds.F;
  j["L"] = ds.L;
  j["class_sizes"] = ds.class_sizes();

  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> attrs;
  for (const auto& inst : ds.instances)
    for (const auto& [k, v] : inst.attributes) {
      auto& counts = attrs[k][v];
      if (counts.empty()) counts.assign(ds.L, 0);
      ++counts[inst.label];
    }
  Json aj = Json::object();
  for (const auto& [k, values] : attrs) {
    Json vj = Json::array();
    for (const auto& [v, counts] : values) vj.push_back({{"value", v}, {"counts", counts}});
    aj[k] = vj;
  }
  j["attributes"] = aj;

  const auto dist = attention_distribution(att, AttentionMode::kHistogram);
  Json bins = Json::array();
  for (const auto& b : dist.bins) bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
  j["attention_histogram"] = bins;

  if (ds.has_embedding()) {
    Json pts = Json::array();
    for (const auto& inst : ds.instances)
      pts.push_back({{"id", inst.id}, {"label", inst.label}, {"x", (*inst.embedding2d)[0]}, {"y", (*inst.embedding2d)[1]}});
    j["embedding"] = pts;
  } else {
    j["embedding"] = nullptr;
  }

  std::vector<std::string> names;
  for (const auto& f : ds.features) names.push_back(f.name);
  const auto full = aoi_filter(ds, att, AoiSet{{0.0, 1.0}}, resolve_level(p.attention_level, att));
  j["ranking"] = ranking_json(rank_features(score_features(ds, full, p.bin_count)), names);
  return j;
}

inline Json attention_distribution_json(const AttentionTensor& att, AttentionMode mode) {
  const auto dist = attention_distribution(att, mode);
  Json j;
  j["mode"] = enum_name(mode);
  if (mode == AttentionMode::kHistogram) {
    Json bins = Json::array();
    for (const auto& b : dist.bins) bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
    j["bins"] = bins;
  } else {
    Json rows = Json::array();
    for (const auto& e : dist.percentile_table) rows.push_back({{"percentile", e.percentile}, {"value", e.value}});
    j["percentiles"] = rows;
  }
  return j;
}

class SessionManager {
 public:
  explicit SessionManager(ServiceOptions opt = {}) : opt_(std::move(opt)) {}
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  std::string create_session(const std::filesystem::path& manifest_path) {
    auto bundle = load_bundle(manifest_path);  // throws ingest errors
    auto s = std::make_shared<Session>();
    s->ds = std::make_shared<const SequenceDataset>(std::move(bundle.dataset));
    s->att = std::make_shared<const AttentionTensor>(std::move(bundle.attention));
    s->pipeline.emplace(s->ds, s->att);
    s->dashboard = dashboard_json(*s->ds, *s->att, s->params);
    {
      std::lock_guard lk(mu_);
      s->id = "s" + std::to_string(++next_id_);
      sessions_[s->id] = s;
    }
    Session* raw = s.get();
    s->worker = std::jthread([this, raw](std::stop_token st) { worker_loop(*raw, st); });
    if (opt_.run_on_create) {
      std::lock_guard lk(s->mu);
      enqueue_locked(*s);
    }
    return s->id;
  }

  /// Applies a parameter patch and schedules recomputation. Returns the job id.
  std::uint64_t update_params(const std::string& id, const Json& patch) {
    auto s = find(id);
    Json resolved = patch;
    if (resolved.is_object() && resolved.contains("aoi_top_percent")) {
      const auto& v = resolved["aoi_top_percent"];
      if (!v.is_number()) throw Error(ErrorCode::kInvalidParams, "aoi_top_percent must be a number");
      const double pct = v.get<double>();
      if (!(pct > 0.0 && pct <= 100.0)) throw Error(ErrorCode::kInvalidParams, "aoi_top_percent must be in (0,100]");
      const auto aoi = top_percent_aoi(*s->att, pct);
      Json arr = Json::array();
      for (const auto& r : aoi) arr.push_back({r.lo, r.hi});
      resolved.erase("aoi_top_percent");
      resolved["aoi"] = arr;
    }
    std::lock_guard lk(s->mu);
    AnalysisParams next = apply_params_patch(s->params, resolved);
    if (next.class_a >= s->ds->L || next.class_b >= s->ds->L)
      throw Error(ErrorCode::kInvalidParams, "compared classes must be below L=" + std::to_string(s->ds->L));
    s->params = next;
    return enqueue_locked(*s);
  }

  AnalysisParams params(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return s->params;
  }

  JobState job_state(const std::string& id, std::uint64_t job) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    auto it = s->jobs.find(job);
    if (it == s->jobs.end()) throw Error(ErrorCode::kInvalidParams, "unknown job " + std::to_string(job));
    return it->second;
  }

  SessionStatus status(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return status_locked(*s);
  }

  /// Blocks until the latest job has finished. Returns false on timeout.
  bool wait_idle(const std::string& id, std::chrono::milliseconds timeout = std::chrono::minutes(5)) const {
    auto s = find(id);
    std::unique_lock lk(s->mu);
    return s->cv.wait_for(lk, timeout, [&] { return !busy_locked(*s); });
  }

  /// Latest published result; throws NotReady while a newer job is pending.
  std::shared_ptr<const AnalysisResult> result(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    if (s->failure && !busy_locked(*s)) throw *s->failure;
    if (!s->result || s->published_job != s->latest_job) {
      std::string stage = s->stage.empty() ? "queued" : s->stage;
      throw Error(ErrorCode::kNotReady, "pipeline not ready (stage: " + stage + ")");
    }
    return s->result;
  }

  Json summary(const std::string& id, std::size_t feature_id, std::optional<TimeWindow> focus = {}) const {
    auto s = find(id);
    if (feature_id >= s->ds->F)
      throw Error(ErrorCode::kUnknownFeature, "feature " + std::to_string(feature_id) + " does not exist (F=" +
                                                  std::to_string(s->ds->F) + ")");
    auto r = result(id);
    return summary_json(*r, feature_id, focus);
  }

  Json dashboard(const std::string& id) const { return find(id)->dashboard; }

  /// Ranking under the session's current AOI; computed directly, never blocks.
  Json ranking(const std::string& id) const {
    auto s = find(id);
    AnalysisParams p = params(id);
    const auto ft = aoi_filter(*s->ds, *s->att, p.aoi, resolve_level(p.attention_level, *s->att));
    std::vector<std::string> names;
    for (const auto& f : s->ds->features) names.push_back(f.name);
    Json j;
    j["schema_version"] = kPayloadVersion;
    j["params"] = params_json(p);
    j["ranking"] = ranking_json(rank_features(score_features(*s->ds, ft, p.bin_count)), names);
    return j;
  }

  Json attention_distribution(const std::string& id, AttentionMode mode) const {
    return attention_distribution_json(*find(id)->att, mode);
  }

  Json export_json(const std::string& id) const { return result_json(*result(id)); }

  void export_to(const std::string& id, const std::filesystem::path& path) const { export_summary(*result(id), path); }

  StageCounters counters(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return s->counters;
  }

 private:
  struct Session {
    std::string id;
    std::shared_ptr<const SequenceDataset> ds;
    std::shared_ptr<const AttentionTensor> att;
    Json dashboard;

    mutable std::mutex mu;
    mutable std::condition_variable_any cv;
    AnalysisParams params;
    std::uint64_t latest_job = 0;
    std::uint64_t pending_job = 0;
    std::uint64_t running_job = 0;
    std::map<std::uint64_t, JobState> jobs;
    std::string stage;
    std::stop_source current_stop;
    std::optional<Error> failure;
    std::shared_ptr<const AnalysisResult> result;
    std::uint64_t published_job = 0;
    StageCounters counters;

    std::optional<Pipeline> pipeline;  // worker thread only
    std::jthread worker;               // declared last: joined before the rest is destroyed
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, "no session '" + id + "'");
    return it->second;
  }

  static bool busy_locked(const Session& s) { return s.pending_job != 0 || s.running_job != 0; }

  static SessionStatus status_locked(const Session& s) {
    SessionStatus st;
    st.latest_job = s.latest_job;
    st.published_job = s.published_job;
    st.stage = s.stage;
    if (busy_locked(s)) {
      st.state = "running";
    } else if (s.failure) {
      st.state = "failed";
      st.failure = s.failure->what();
    } else if (s.latest_job != 0 && s.jobs.at(s.latest_job) == JobState::kCancelled) {
      st.state = "cancelled";
    } else {
      st.state = "idle";
    }
    return st;
  }

  std::uint64_t enqueue_locked(Session& s) {
    if (s.pending_job != 0) s.jobs[s.pending_job] = JobState::kCancelled;
    s.current_stop.request_stop();
    const std::uint64_t job = ++s.latest_job;
    s.pending_job = job;
    s.jobs[job] = JobState::kQueued;
    s.cv.notify_all();
    return job;
  }

  void worker_loop(Session& s, std::stop_token st) {
    while (true) {
      AnalysisParams p;
      std::uint64_t job = 0;
      std::stop_source src;
      {
        std::unique_lock lk(s.mu);
        if (!s.cv.wait(lk, st, [&] { return s.pending_job != 0; })) return;
        p = s.params;
        job = s.pending_job;
        s.pending_job = 0;
        s.running_job = job;
        s.current_stop = src;
        s.jobs[job] = JobState::kRunning;
        s.stage.clear();
      }
      std::stop_callback forward(st, [&] { src.request_stop(); });
      auto on_stage = [&](std::string_view stage) {
        {
          std::lock_guard lk(s.mu);
          s.stage = std::string(stage);
        }
        if (opt_.stage_hook) opt_.stage_hook(s.id, job, stage);
      };
      std::optional<AnalysisResult> out;
      std::optional<Error> err;
      try {
        out = s.pipeline->run(p, src.get_token(), on_stage);
      } catch (const Error& e) {
        err = e;
      } catch (const std::exception& e) {
        err = Error(ErrorCode::kIoFailure, e.what());
      }
      std::lock_guard lk(s.mu);
      s.running_job = 0;
      s.stage.clear();
      s.counters = s.pipeline->counters();
      const bool latest = job == s.latest_job;
      if (out && latest) {
        s.result = std::make_shared<const AnalysisResult>(std::move(*out));
        s.published_job = job;
        s.failure.reset();
        s.jobs[job] = JobState::kDone;
      } else if (out || (err && err->code() == ErrorCode::kCancelled)) {
        s.jobs[job] = JobState::kCancelled;  // superseded
      } else {
        s.jobs[job] = JobState::kFailed;
        if (latest) s.failure = *err;
      }
      s.cv.notify_all();
    }
  }

  ServiceOptions opt_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
};

inline int http_status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownFeature: return 404;
    case ErrorCode::kNotReady:
    case ErrorCode::kCancelled: return 409;
    case ErrorCode::kInvalidParams:
    case ErrorCode::kKOutOfRange: return 400;
    case ErrorCode::kIoFailure: return 500;
    default: return 422;
  }
}

/// Registers the versioned REST routes on `server`.
inline void mount_routes(httplib::Server& server, SessionManager& mgr) {
  constexpr const char* kJson = "application/json";
  auto guarded = [kJson](auto fn) {
    return [fn, kJson](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        res.status = http_status_for(e.code());
        res.set_content(error_json(e).dump(), kJson);
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(error_json(Error(ErrorCode::kInvalidParams, e.what())).dump(), kJson);
      }
    };
  };
  auto send = [kJson](httplib::Response& res, const Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), kJson);
  };

  server.Post("/api/v1/sessions", guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
                auto body = Json::parse(req.body);
                if (!body.contains("manifest_path") || !body["manifest_path"].is_string())
                  throw Error(ErrorCode::kInvalidParams, "body needs a string 'manifest_path'");
                auto id = mgr.create_session(body["manifest_path"].get<std::string>());
                send(res, {{"session_id", id}}, 201);
              }));
  server.Get(R"(/api/v1/sessions/([^/]+)/dashboard)",
             guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
               send(res, mgr.dashboard(req.matches[1]));
             }));
  server.Get(R"(/api/v1/sessions/([^/]+)/ranking)",
             guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
               send(res, mgr.ranking(req.matches[1]));
             }));
  server.Get(R"(/api/v1/sessions/([^/]+)/attention-distribution)",
             guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
               auto mode = AttentionMode::kHistogram;
               if (req.has_param("mode")) mode = parse_enum<AttentionMode>(req.get_param_value("mode"), "mode");
               send(res, mgr.attention_distribution(req.matches[1], mode));
             }));
  auto patch = guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
    auto job = mgr.update_params(req.matches[1], Json::parse(req.body));
    send(res, {{"job_id", job}, {"params", params_json(mgr.params(req.matches[1]))}}, 202);
  });
  server.Patch(R"(/api/v1/sessions/([^/]+)/params)", patch);
  server.Post(R"(/api/v1/sessions/([^/]+)/params)", patch);
  server.Get(R"(/api/v1/sessions/([^/]+)/status)",
             guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
               auto st = mgr.status(req.matches[1]);
               Json j{{"state", st.state},
                      {"stage", st.stage},
                      {"latest_job", st.latest_job},
                      {"published_job", st.published_job}};
               j["failure"] = st.failure ? Json(*st.failure) : Json(nullptr);
               send(res, j);
             }));
  server.Get(R"(/api/v1/sessions/([^/]+)/summary/(\d+))",
             guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
               std::optional<TimeWindow> focus;
               if (req.has_param("t0") || req.has_param("t1")) {
                 if (!req.has_param("t0") || !req.has_param("t1"))
                   throw Error(ErrorCode::kInvalidParams, "temporal focus needs both t0 and t1");
                 focus = TimeWindow{std::stoul(req.get_param_value("t0")), std::stoul(req.get_param_value("t1"))};
               }
               send(res, mgr.summary(req.matches[1], std::stoul(req.matches[2]), focus));
             }));
  server.Get(R"(/api/v1/sessions/([^/]+)/export)",
             guarded([&mgr, send](const httplib::Request& req, httplib::Response& res) {
               send(res, mgr.export_json(req.matches[1]));
             }));
}

}  // namespace seqattr
