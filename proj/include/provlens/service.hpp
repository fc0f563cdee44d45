#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "provlens/glyphspec.hpp"
#include "provlens/profile.hpp"
#include "provlens/session.hpp"

namespace provlens::service {

struct Config {
  std::int64_t default_dwell_ms = kDefaultDwellThresholdMs;
  std::optional<std::filesystem::path> data_dir;  // session persistence
  std::optional<std::string> bearer_token;         // require when set
};

// Transport-independent response. `text` replaces the json body when set.
struct Response {
  int status = 200;
  json body;
  std::optional<std::string> text;
  std::string content_type = "application/json";
  std::uint64_t seq = 0;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::invalid_mode:
    case ErrorCode::stale_seq:
    case ErrorCode::hash_mismatch: return 409;
    case ErrorCode::unknown_entity:
    case ErrorCode::bad_spec: return 422;
    case ErrorCode::bad_input:
    case ErrorCode::unknown_kind:
    case ErrorCode::invalid_event: return 400;
  }
  return 400;
}

// One server-push subscriber. Messages are queued in publish order; a
// subscriber that falls too far behind is closed rather than skipped, so a
// live connection never observes a seq gap.
class Subscription {
 public:
  static constexpr std::size_t kMaxBacklog = 100000;

  void push(std::string message) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      if (queue_.size() >= kMaxBacklog) {
        closed_ = true;
      } else {
        queue_.push_back(std::move(message));
      }
    }
    cv_.notify_all();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  // Next queued message, waiting up to `timeout`. Queued messages are still
  // drained after close().
  std::optional<std::string> next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto msg = std::move(queue_.front());
    queue_.pop_front();
    return msg;
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_ && queue_.empty();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

inline std::string sse_frame(std::string_view event, std::uint64_t seq, const json& data) {
  return "id: " + std::to_string(seq) + "\nevent: " + std::string(event) + "\ndata: " + data.dump() + "\n\n";
}

// Session registry and request handlers. Sessions are independent; within
// a session every mutation holds the session lock, so events apply in
// arrival order and stream messages leave in seq order.
class ProvenanceService {
 public:
  explicit ProvenanceService(Config config = {}) : config_(std::move(config)) {
    if (config_.data_dir) load_persisted();
  }

  ~ProvenanceService() { shutdown(); }

  const Config& config() const noexcept { return config_; }

  // Closes every stream so server-push handlers return.
  void shutdown() {
    stopping_ = true;
    std::shared_lock lock(registry_mu_);
    for (auto& [_, slot] : sessions_) {
      std::lock_guard slot_lock(slot->mu);
      for (auto& weak : slot->subscribers) {
        if (auto sub = weak.lock()) sub->close();
      }
    }
  }
  bool stopping() const noexcept { return stopping_; }

  Response create_session(const json& body) {
    return guard(0, [&] {
      if (!body.is_null() && !body.is_object()) throw Error(ErrorCode::bad_input, "body must be a json object");
      auto slot = std::make_shared<Slot>();
      slot->mode = body.contains("mode") ? parse_session_mode(body.at("mode").get<std::string>()) : SessionMode::edit;
      if (body.contains("strategy")) slot->strategy = parse_strategy_value(body.at("strategy"));
      slot->threshold = body.value("dwell_threshold_ms", config_.default_dwell_ms);
      if (slot->threshold < 0) throw Error(ErrorCode::bad_input, "dwell_threshold_ms must be non-negative");
      {
        std::unique_lock lock(registry_mu_);
        slot->id = body.contains("session_id") ? body.at("session_id").get<std::string>() : new_id();
        if (slot->id.empty() || slot->id.find_first_of("/\\.") != std::string::npos) {
          throw Error(ErrorCode::bad_input, "invalid session id");
        }
        if (sessions_.count(slot->id)) throw Error(ErrorCode::invalid_mode, "session '" + slot->id + "' exists");
        sessions_[slot->id] = slot;
      }
      std::lock_guard lock(slot->mu);
      persist(*slot);
      return ok(summary(*slot), 0, 201);
    });
  }

  Response get_session(const std::string& id) {
    return with_slot(id, [&](Slot& slot) { return ok(summary(slot), slot.seq()); });
  }

  Response upload_dataset(const std::string& id, std::string_view bytes, DataFormat format,
                          const std::optional<std::string>& schema) {
    return with_slot(id, [&](Slot& slot) {
      if (slot.state && !slot.state->event_log.empty()) {
        throw Error(ErrorCode::invalid_mode, "dataset cannot change once events are logged");
      }
      SchemaOverrides overrides;
      if (schema) overrides = parse_schema_sidecar(*schema);
      auto dataset = std::make_shared<const Dataset>(load_dataset(bytes, format, overrides));
      slot.state.emplace(slot.id, slot.mode, dataset, slot.strategy, slot.threshold);
      persist(slot);
      return ok(dataset_summary(*dataset), slot.seq());
    });
  }

  Response attribute_profile(const std::string& id, const std::string& attribute) {
    return with_slot(id, [&](Slot& slot) {
      return ok(to_json(provlens::attribute_profile(*require_dataset(slot).dataset, attribute)), slot.seq());
    });
  }

  // Applies a batch of raw actions in order. The batch is atomic: an error
  // in any action leaves the session untouched.
  Response post_events(const std::string& id, const json& body) {
    return with_slot(id, [&](Slot& slot) {
      if (slot.mode == SessionMode::view) throw Error(ErrorCode::invalid_mode, "session '" + id + "' is view-only");
      auto& current = require_dataset(slot);
      const json* actions = &body;
      if (body.is_object() && body.contains("actions")) actions = &body.at("actions");
      if (!actions->is_array()) throw Error(ErrorCode::bad_input, "expected an array of actions");

      SessionState next = current;
      std::vector<std::string> messages;
      json results = json::array();
      std::size_t accepted = 0, discarded = 0, duplicates = 0;
      std::array<ScoreTable, 2> tables = {score_table(next.ledger, Scope::attributes, next.strategy),
                                          score_table(next.ledger, Scope::records, next.strategy)};

      for (const auto& item : *actions) {
        const auto raw = raw_action_from_json(item);
        json result = {{"action_id", raw.action_id ? json(*raw.action_id) : json(nullptr)}};
        if (raw.action_id && next.action_ids.count(*raw.action_id)) {
          ++duplicates;
          result["status"] = "duplicate";
          results.push_back(std::move(result));
          continue;
        }
        NormalizeContext ctx{*next.dataset, next.dwell_threshold_ms, next.next_seq};
        auto events = normalize_action(raw, ctx);
        json seqs = json::array();
        for (auto& e : events) {
          next.ledger.apply(e);
          const Scope scope = scope_of(e.kind);
          auto& before = tables[scope == Scope::attributes ? 0 : 1];
          auto after = score_table(next.ledger, scope, next.strategy);
          messages.push_back(sse_frame("score", e.seq, score_delta(e.seq, before, after)));
          before = std::move(after);
          seqs.push_back(e.seq);
          next.event_log.push_back(std::move(e));
        }
        next.next_seq = ctx.next_seq;
        if (raw.action_id) next.action_ids.insert(*raw.action_id);
        accepted += events.size();
        if (events.empty()) ++discarded;
        result["status"] = events.empty() ? "discarded" : "accepted";
        result["seqs"] = std::move(seqs);
        results.push_back(std::move(result));
      }

      current = std::move(next);
      publish(slot, messages);
      persist(slot);
      return ok({{"accepted", accepted}, {"discarded", discarded}, {"duplicates", duplicates},
                 {"results", std::move(results)}},
                slot.seq());
    });
  }

  Response get_scores(const std::string& id, const std::optional<std::string>& scope,
                      const std::optional<std::string>& strategy) {
    return with_slot(id, [&](Slot& slot) {
      auto& state = require_dataset(slot);
      const auto strat = strategy ? parse_strategy(*strategy) : state.strategy;
      if (scope) return ok(score_table(state.ledger, parse_scope(*scope), strat).to_json(), slot.seq());
      return ok({{"attributes", score_table(state.ledger, Scope::attributes, strat).to_json()},
                 {"records", score_table(state.ledger, Scope::records, strat).to_json()}},
                slot.seq());
    });
  }

  Response post_spec(const std::string& id, const json& spec_json, const std::optional<std::string>& strategy) {
    return with_slot(id, [&](Slot& slot) {
      auto& state = require_dataset(slot);
      const auto spec = vis_spec_from_json(spec_json, *state.dataset);
      const auto table = augmented_table(state.ledger, strategy ? parse_strategy(*strategy) : state.strategy);
      return ok(bind_data(spec, table), slot.seq());
    });
  }

  Response export_log(const std::string& id) {
    return with_slot(id, [&](Slot& slot) {
      Response r;
      r.text = provlens::export_log(require_dataset(slot));
      r.content_type = "application/x-ndjson";
      r.seq = slot.seq();
      return r;
    });
  }

  // Body: {"mode": "view" | "hybrid", "log": "<jsonl>", "allow_hash_mismatch": bool}.
  Response import_log(const std::string& id, const json& body) {
    return with_slot(id, [&](Slot& slot) {
      auto& current = require_dataset(slot);
      if (!body.is_object()) throw Error(ErrorCode::bad_input, "body must be a json object");
      const auto mode = parse_session_mode(body.value("mode", std::string("view")));
      ImportOptions options;
      std::vector<std::string> warnings;
      options.allow_hash_mismatch = body.value("allow_hash_mismatch", false);
      options.warnings = &warnings;
      auto state = provlens::import_log(body.at("log").get<std::string>(), current.dataset, mode, options);
      state.session_id = slot.id;
      slot.mode = mode;
      slot.strategy = state.strategy;
      slot.threshold = state.dwell_threshold_ms;
      current = std::move(state);
      publish(slot, {sse_frame("reset", slot.seq(), {{"seq", slot.seq()}, {"mode", to_string(mode)}})});
      persist(slot);
      auto out = summary(slot);
      out["warnings"] = warnings;
      return ok(std::move(out), slot.seq());
    });
  }

  // Registers a stream subscriber. The returned subscription already holds
  // a "ready" frame carrying the current seq.
  std::shared_ptr<Subscription> subscribe(const std::string& id) {
    auto slot = find(id);
    auto sub = std::make_shared<Subscription>();
    std::lock_guard lock(slot->mu);
    sub->push(sse_frame("ready", slot->seq(), {{"seq", slot->seq()}}));
    std::erase_if(slot->subscribers, [](const auto& w) { return w.expired(); });
    slot->subscribers.push_back(sub);
    if (stopping_) sub->close();
    return sub;
  }

  bool authorized(const std::string& header) const {
    if (!config_.bearer_token) return true;
    return header == "Bearer " + *config_.bearer_token;
  }

 private:
  struct Slot {
    std::mutex mu;
    std::string id;
    SessionMode mode = SessionMode::edit;
    Strategy strategy;
    std::int64_t threshold = kDefaultDwellThresholdMs;
    std::optional<SessionState> state;
    std::vector<std::weak_ptr<Subscription>> subscribers;

    std::uint64_t seq() const { return state ? state->seq() : 0; }
  };

  static Strategy parse_strategy_value(const json& j) {
    if (j.is_string()) return parse_strategy(j.get<std::string>());
    return strategy_from_json(j);
  }

  static Response ok(json body, std::uint64_t seq, int status = 200) {
    Response r;
    r.status = status;
    r.body = std::move(body);
    if (r.body.is_object()) r.body["seq"] = seq;
    r.seq = seq;
    return r;
  }

  static Response error(const Error& e, std::uint64_t seq) {
    Response r;
    r.status = http_status(e.code());
    r.body = {{"error", to_string(e.code())}, {"message", e.what()}, {"seq", seq}};
    r.seq = seq;
    return r;
  }

  template <typename Fn>
  static Response guard(std::uint64_t seq, Fn&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      return error(e, seq);
    } catch (const json::exception& e) {
      return error(Error(ErrorCode::bad_input, e.what()), seq);
    }
  }

  std::shared_ptr<Slot> find(const std::string& id) {
    std::shared_lock lock(registry_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::not_found, "no session '" + id + "'");
    return it->second;
  }

  template <typename Fn>
  Response with_slot(const std::string& id, Fn&& fn) {
    std::shared_ptr<Slot> slot;
    try {
      slot = find(id);
    } catch (const Error& e) {
      return error(e, 0);
    }
    std::lock_guard lock(slot->mu);
    return guard(slot->seq(), [&] { return fn(*slot); });
  }

  static SessionState& require_dataset(Slot& slot) {
    if (!slot.state) throw Error(ErrorCode::invalid_mode, "session '" + slot.id + "' has no dataset yet");
    return *slot.state;
  }

  static json dataset_summary(const Dataset& ds) {
    json attrs = json::array();
    for (const auto& a : ds.attributes()) {
      json j = {{"name", a.name}, {"kind", to_string(a.kind)}};
      if (a.description) j["description"] = *a.description;
      attrs.push_back(std::move(j));
    }
    return {{"hash", ds.content_hash()}, {"attributes", std::move(attrs)}, {"record_count", ds.records().size()}};
  }

  static json summary(const Slot& slot) {
    return {{"session_id", slot.id},
            {"mode", to_string(slot.mode)},
            {"strategy", to_json(slot.strategy)},
            {"dwell_threshold_ms", slot.threshold},
            {"dataset", slot.state ? dataset_summary(*slot.state->dataset) : json(nullptr)},
            {"event_count", slot.state ? slot.state->event_log.size() : 0}};
  }

  static json score_delta(std::uint64_t seq, const ScoreTable& before, const ScoreTable& after) {
    json changed = json::array();
    json deltas = json::object();
    for (const auto& row : after.rows()) {
      const auto& old = before.at(row.entity);
      if (old.frequency == row.frequency && old.recency == row.recency) continue;
      changed.push_back(row.entity);
      deltas[row.entity] = {{"frequency", row.frequency},
                            {"recency", row.recency},
                            {"d_frequency", row.frequency - old.frequency},
                            {"d_recency", row.recency - old.recency}};
    }
    return {{"seq", seq}, {"scope", to_string(after.scope())}, {"changed_entities", std::move(changed)},
            {"deltas", std::move(deltas)}};
  }

  static void publish(Slot& slot, const std::vector<std::string>& messages) {
    std::erase_if(slot.subscribers, [](const auto& w) { return w.expired(); });
    for (auto& weak : slot.subscribers) {
      if (auto sub = weak.lock()) {
        for (const auto& m : messages) sub->push(m);
      }
    }
  }

  std::string new_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[24];
    do {
      std::snprintf(buf, sizeof buf, "s%012llx", static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
    } while (sessions_.count(buf));
    return buf;
  }

  void persist(const Slot& slot) {
    if (!config_.data_dir) return;
    json doc = {{"session_id", slot.id},
                {"mode", to_string(slot.mode)},
                {"strategy", to_json(slot.strategy)},
                {"dwell_threshold_ms", slot.threshold},
                {"snapshot", slot.state ? json::parse(snapshot(*slot.state)) : json(nullptr)}};
    std::filesystem::create_directories(*config_.data_dir);
    const auto path = *config_.data_dir / (slot.id + ".json");
    const auto tmp = *config_.data_dir / (slot.id + ".json.tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << doc.dump();
      if (!out) throw Error(ErrorCode::bad_input, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  void load_persisted() {
    if (!std::filesystem::exists(*config_.data_dir)) return;
    for (const auto& entry : std::filesystem::directory_iterator(*config_.data_dir)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path(), std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      const auto doc = json::parse(buf.str());
      auto slot = std::make_shared<Slot>();
      slot->id = doc.at("session_id").get<std::string>();
      slot->mode = parse_session_mode(doc.at("mode").get<std::string>());
      slot->strategy = strategy_from_json(doc.at("strategy"));
      slot->threshold = doc.at("dwell_threshold_ms").get<std::int64_t>();
      if (!doc.at("snapshot").is_null()) slot->state.emplace(restore_json(doc.at("snapshot")));
      sessions_[slot->id] = std::move(slot);
    }
  }

  Config config_;
  std::shared_mutex registry_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::atomic<bool> stopping_{false};
};

namespace detail {

inline void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_header("X-Provlens-Seq", std::to_string(r.seq));
  if (r.text) {
    res.set_content(*r.text, r.content_type);
  } else {
    res.set_content(r.body.dump(), "application/json");
  }
}

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

inline std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

inline DataFormat guess_format(const std::optional<std::string>& explicit_format, const std::string& filename,
                               const std::string& content_type) {
  if (explicit_format) return parse_data_format(*explicit_format);
  auto ends_with = [](const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(filename, ".json") || content_type.find("json") != std::string::npos) return DataFormat::json_rows;
  return DataFormat::csv;
}

}  // namespace detail

// Routes the json API onto an httplib server.
inline void mount(httplib::Server& server, ProvenanceService& svc) {
  using httplib::Request;
  using httplib::Response;
  using detail::send;

  server.set_pre_routing_handler([&svc](const Request& req, Response& res) {
    if (svc.authorized(req.get_header_value("Authorization"))) return httplib::Server::HandlerResponse::Unhandled;
    res.status = 401;
    res.set_content(json{{"error", "unauthorized"}, {"message", "missing or wrong bearer token"}}.dump(),
                    "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });

  auto bad_json = [](Response& res, const std::exception& e) {
    res.status = 400;
    res.set_content(json{{"error", "bad_input"}, {"message", e.what()}, {"seq", 0}}.dump(), "application/json");
  };

  server.Post("/sessions", [&svc, bad_json](const Request& req, Response& res) {
    try {
      send(res, svc.create_session(detail::parse_body(req)));
    } catch (const json::exception& e) {
      bad_json(res, e);
    }
  });

  server.Get(R"(/sessions/([^/]+))", [&svc](const Request& req, Response& res) {
    send(res, svc.get_session(req.matches[1]));
  });

  server.Post(R"(/sessions/([^/]+)/dataset)", [&svc](const Request& req, Response& res) {
    const std::string id = req.matches[1];
    auto format = detail::param(req, "format");
    if (req.is_multipart_form_data()) {
      if (!req.has_file("dataset")) {
        res.status = 400;
        res.set_content(json{{"error", "bad_input"}, {"message", "multipart field 'dataset' missing"}}.dump(),
                        "application/json");
        return;
      }
      const auto file = req.get_file_value("dataset");
      std::optional<std::string> schema;
      if (req.has_file("schema")) schema = req.get_file_value("schema").content;
      if (req.has_file("format")) format = req.get_file_value("format").content;
      send(res, svc.upload_dataset(id, file.content, detail::guess_format(format, file.filename, file.content_type),
                                   schema));
      return;
    }
    send(res, svc.upload_dataset(id, req.body,
                                 detail::guess_format(format, "", req.get_header_value("Content-Type")),
                                 detail::param(req, "schema")));
  });

  server.Get(R"(/sessions/([^/]+)/attributes/([^/]+)/profile)", [&svc](const Request& req, Response& res) {
    send(res, svc.attribute_profile(req.matches[1], httplib::detail::decode_url(req.matches[2], false)));
  });

  server.Post(R"(/sessions/([^/]+)/events)", [&svc, bad_json](const Request& req, Response& res) {
    try {
      send(res, svc.post_events(req.matches[1], detail::parse_body(req)));
    } catch (const json::exception& e) {
      bad_json(res, e);
    }
  });

  server.Get(R"(/sessions/([^/]+)/scores)", [&svc](const Request& req, Response& res) {
    send(res, svc.get_scores(req.matches[1], detail::param(req, "scope"), detail::param(req, "strategy")));
  });

  server.Post(R"(/sessions/([^/]+)/spec)", [&svc, bad_json](const Request& req, Response& res) {
    try {
      send(res, svc.post_spec(req.matches[1], detail::parse_body(req), detail::param(req, "strategy")));
    } catch (const json::exception& e) {
      bad_json(res, e);
    }
  });

  server.Get(R"(/sessions/([^/]+)/export)", [&svc](const Request& req, Response& res) {
    send(res, svc.export_log(req.matches[1]));
  });

  server.Post(R"(/sessions/([^/]+)/import)", [&svc, bad_json](const Request& req, Response& res) {
    try {
      send(res, svc.import_log(req.matches[1], detail::parse_body(req)));
    } catch (const json::exception& e) {
      bad_json(res, e);
    }
  });

  server.Get(R"(/sessions/([^/]+)/stream)", [&svc](const Request& req, Response& res) {
    std::shared_ptr<Subscription> sub;
    try {
      sub = svc.subscribe(req.matches[1]);
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(json{{"error", to_string(e.code())}, {"message", e.what()}}.dump(), "application/json");
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [sub, &svc](std::size_t, httplib::DataSink& sink) {
      auto last_write = std::chrono::steady_clock::now();
      while (!sub->closed()) {
        if (auto msg = sub->next(std::chrono::milliseconds(200))) {
          if (!sink.write(msg->data(), msg->size())) return false;
          last_write = std::chrono::steady_clock::now();
          continue;
        }
        if (svc.stopping()) break;
        if (std::chrono::steady_clock::now() - last_write > std::chrono::seconds(10)) {
          static constexpr std::string_view keepalive = ": keepalive\n\n";
          if (!sink.write(keepalive.data(), keepalive.size())) return false;
          last_write = std::chrono::steady_clock::now();
        }
      }
      sink.done();
      return true;
    });
  });
}

}  // namespace provlens::service
