#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provlens/ledger.hpp"
#include "provlens/normalize.hpp"
#include "provlens/scoring.hpp"

namespace provlens {

inline constexpr int kLogFormatVersion = 1;
inline constexpr std::string_view kLogFormat = "provlens-log";
inline constexpr std::string_view kSnapshotFormat = "provlens-snapshot";

// edit: live tracking from an empty log. view: imported log, read-only.
// hybrid: imported log plus live tracking.
enum class SessionMode { edit, view, hybrid };

inline std::string_view to_string(SessionMode m) {
  switch (m) {
    case SessionMode::edit: return "edit";
    case SessionMode::view: return "view";
    case SessionMode::hybrid: return "hybrid";
  }
  return "?";
}

inline SessionMode parse_session_mode(std::string_view text) {
  if (text == "edit") return SessionMode::edit;
  if (text == "view") return SessionMode::view;
  if (text == "hybrid") return SessionMode::hybrid;
  throw Error(ErrorCode::invalid_mode, "unknown session mode '" + std::string(text) + "'");
}

// Fold of `events` over an empty ledger. Hovers shorter than `threshold_ms`
// are skipped, so a log can be re-read under a stricter dwell threshold.
inline ProvenanceLedger replay(std::span<const InteractionEvent> events, std::shared_ptr<const Dataset> dataset,
                               std::int64_t threshold_ms = kDefaultDwellThresholdMs) {
  ProvenanceLedger ledger(std::move(dataset), threshold_ms);
  for (const auto& e : events) {
    if (is_hover(e.kind) && e.dwell_ms && *e.dwell_ms < threshold_ms) continue;
    ledger.apply(e);
  }
  return ledger;
}

// The event log is authoritative; the ledger is its fold and every score is
// derived from the ledger.
struct SessionState {
  std::string session_id;
  SessionMode mode = SessionMode::edit;
  std::shared_ptr<const Dataset> dataset;
  Strategy strategy;
  std::int64_t dwell_threshold_ms = kDefaultDwellThresholdMs;
  std::vector<InteractionEvent> event_log;
  ProvenanceLedger ledger;
  std::set<std::string> action_ids;  // client ids already ingested
  std::uint64_t next_seq = 1;

  SessionState(std::string id, SessionMode m, std::shared_ptr<const Dataset> ds, Strategy s = {},
               std::int64_t threshold = kDefaultDwellThresholdMs)
      : session_id(std::move(id)),
        mode(m),
        dataset(ds),
        strategy(s),
        dwell_threshold_ms(threshold),
        ledger(std::move(ds), threshold) {}

  std::uint64_t seq() const noexcept { return ledger.last_seq(); }
};

struct IngestResult {
  std::vector<InteractionEvent> accepted;
  bool discarded = false;  // filtered out (short dwell, drag, provenance target)
  bool duplicate = false;  // action id seen before; nothing applied
};

// Normalizes and applies one raw action. All-or-nothing: on error the state
// is unchanged.
inline IngestResult ingest(SessionState& state, const RawAction& raw) {
  if (state.mode == SessionMode::view) {
    throw Error(ErrorCode::invalid_mode, "session '" + state.session_id + "' is view-only");
  }
  IngestResult result;
  if (raw.action_id && state.action_ids.count(*raw.action_id)) {
    result.duplicate = true;
    return result;
  }
  NormalizeContext ctx{*state.dataset, state.dwell_threshold_ms, state.next_seq};
  auto events = normalize_action(raw, ctx);

  auto ledger = state.ledger;
  for (const auto& e : events) ledger.apply(e);

  state.ledger = std::move(ledger);
  state.event_log.insert(state.event_log.end(), events.begin(), events.end());
  state.next_seq = ctx.next_seq;
  if (raw.action_id) state.action_ids.insert(*raw.action_id);
  result.discarded = events.empty();
  result.accepted = std::move(events);
  return result;
}

inline json log_header(const SessionState& state) {
  return {{"format", kLogFormat},
          {"spec_version", kLogFormatVersion},
          {"session_id", state.session_id},
          {"dataset_hash", state.dataset->content_hash()},
          {"dwell_threshold_ms", state.dwell_threshold_ms},
          {"strategy", to_json(state.strategy)}};
}

// JSONL: a header object, then one object per event, LF terminated.
inline std::string export_log(const SessionState& state) {
  std::string out = log_header(state).dump();
  out += '\n';
  for (const auto& e : state.event_log) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

struct ImportOptions {
  bool allow_hash_mismatch = false;
  std::vector<std::string>* warnings = nullptr;
};

// Rebuilds a session from an exported log. `mode` must be view or hybrid.
// Errors carry the 1-based line number (the header is line 1).
inline SessionState import_log(std::string_view bytes, std::shared_ptr<const Dataset> dataset, SessionMode mode,
                               const ImportOptions& options = {}) {
  if (mode == SessionMode::edit) {
    throw Error(ErrorCode::invalid_mode, "edit sessions start empty; import in view or hybrid mode");
  }
  if (!dataset) throw Error(ErrorCode::bad_input, "import requires a dataset");

  std::vector<std::string_view> lines;
  while (!bytes.empty()) {
    auto nl = bytes.find('\n');
    auto line = bytes.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    bytes.remove_prefix(nl + 1);
  }
  if (lines.empty()) throw Error(ErrorCode::bad_input, "line 1: missing log header");

  auto at_line = [](std::size_t n, const std::string& what) { return "line " + std::to_string(n) + ": " + what; };

  json header;
  try {
    header = json::parse(lines.front());
  } catch (const json::exception&) {
    throw Error(ErrorCode::bad_input, at_line(1, "corrupt header"));
  }
  std::string session_id;
  std::string hash;
  std::int64_t threshold = kDefaultDwellThresholdMs;
  Strategy strategy;
  try {
    if (header.at("format").get<std::string>() != kLogFormat) {
      throw Error(ErrorCode::bad_input, at_line(1, "not a provenance log"));
    }
    if (header.at("spec_version").get<int>() != kLogFormatVersion) {
      throw Error(ErrorCode::bad_input, at_line(1, "unsupported log version"));
    }
    session_id = header.at("session_id").get<std::string>();
    hash = header.at("dataset_hash").get<std::string>();
    threshold = header.at("dwell_threshold_ms").get<std::int64_t>();
    strategy = strategy_from_json(header.at("strategy"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_input, at_line(1, std::string("corrupt header: ") + e.what()));
  }

  if (hash != dataset->content_hash()) {
    const auto msg = "log was recorded against dataset " + hash + ", got " + dataset->content_hash();
    if (!options.allow_hash_mismatch) throw Error(ErrorCode::hash_mismatch, msg);
    if (options.warnings) options.warnings->push_back(msg);
  }

  SessionState state(session_id, mode, std::move(dataset), strategy, threshold);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto lineno = i + 1;
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) break;
      throw Error(ErrorCode::bad_input, at_line(lineno, "empty line"));
    }
    InteractionEvent e;
    try {
      e = event_from_json(json::parse(lines[i]));
      if (is_hover(e.kind) && *e.dwell_ms < threshold) {
        throw Error(ErrorCode::invalid_event, "hover below the log's dwell threshold");
      }
      state.ledger.apply(e);
    } catch (const json::exception&) {
      throw Error(ErrorCode::bad_input, at_line(lineno, "corrupt event"));
    } catch (const Error& err) {
      throw Error(err.code(), at_line(lineno, err.what()));
    }
    state.event_log.push_back(std::move(e));
  }
  state.next_seq = state.ledger.last_seq() + 1;
  return state;
}

// Single json document carrying everything needed to rebuild the session,
// including the dataset itself.
inline std::string snapshot(const SessionState& state) {
  json events = json::array();
  for (const auto& e : state.event_log) events.push_back(to_json(e));
  json doc = {{"format", kSnapshotFormat},
              {"version", kLogFormatVersion},
              {"session_id", state.session_id},
              {"mode", to_string(state.mode)},
              {"strategy", to_json(state.strategy)},
              {"dwell_threshold_ms", state.dwell_threshold_ms},
              {"next_seq", state.next_seq},
              {"dataset_hash", state.dataset->content_hash()},
              {"dataset", state.dataset->to_json()},
              {"events", std::move(events)},
              {"action_ids", state.action_ids}};
  return doc.dump();
}

inline SessionState restore_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kSnapshotFormat) {
      throw Error(ErrorCode::bad_input, "not a session snapshot");
    }
    auto dataset = std::make_shared<const Dataset>(Dataset::from_json(doc.at("dataset")));
    if (dataset->content_hash() != doc.at("dataset_hash").get<std::string>()) {
      throw Error(ErrorCode::hash_mismatch, "snapshot dataset does not match its recorded hash");
    }
    SessionState state(doc.at("session_id").get<std::string>(),
                       parse_session_mode(doc.at("mode").get<std::string>()), std::move(dataset),
                       strategy_from_json(doc.at("strategy")), doc.at("dwell_threshold_ms").get<std::int64_t>());
    for (const auto& j : doc.at("events")) {
      auto e = event_from_json(j);
      state.ledger.apply(e);
      state.event_log.push_back(std::move(e));
    }
    state.action_ids = doc.at("action_ids").get<std::set<std::string>>();
    state.next_seq = doc.at("next_seq").get<std::uint64_t>();
    if (state.next_seq <= state.ledger.last_seq()) throw Error(ErrorCode::bad_input, "snapshot next_seq is stale");
    return state;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_input, std::string("corrupt snapshot: ") + e.what());
  }
}

inline SessionState restore(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_input, std::string("corrupt snapshot: ") + e.what());
  }
  return restore_json(doc);
}

}  // namespace provlens
