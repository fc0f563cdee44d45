#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "provlens/dataset.hpp"
#include "provlens/error.hpp"

namespace provlens {

// The two entity classes that are scored, each with its own rank sequence.
enum class Scope { attributes, records };

inline std::string_view to_string(Scope scope) {
  return scope == Scope::attributes ? "attributes" : "records";
}

inline Scope parse_scope(std::string_view text) {
  if (text == "attributes" || text == "attrs") return Scope::attributes;
  if (text == "records") return Scope::records;
  throw Error(ErrorCode::bad_input, "unknown scope '" + std::string(text) + "'");
}

enum class EventKind {
  attribute_inspect,
  encode_assign,
  filter_apply,
  sort_apply,
  record_hover,
  table_row_hover,
};

inline std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::attribute_inspect: return "attribute-inspect";
    case EventKind::encode_assign: return "encode-assign";
    case EventKind::filter_apply: return "filter-apply";
    case EventKind::sort_apply: return "sort-apply";
    case EventKind::record_hover: return "record-hover";
    case EventKind::table_row_hover: return "table-row-hover";
  }
  return "?";
}

inline std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (auto kind : {EventKind::attribute_inspect, EventKind::encode_assign, EventKind::filter_apply,
                    EventKind::sort_apply, EventKind::record_hover, EventKind::table_row_hover}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

inline bool is_hover(EventKind kind) {
  return kind == EventKind::record_hover || kind == EventKind::table_row_hover;
}

// Inspect/encode/filter/sort touch attributes; hovers touch records.
inline Scope scope_of(EventKind kind) { return is_hover(kind) ? Scope::records : Scope::attributes; }

// Names of the derived provenance fields. They are never tracked themselves.
inline constexpr std::string_view kFrequencyField = "frequency";
inline constexpr std::string_view kRecencyField = "recency";

inline bool is_provenance_field(std::string_view name) {
  return name == kFrequencyField || name == kRecencyField;
}

struct InteractionEvent {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::attribute_inspect;
  std::vector<std::string> attribute_targets;  // sorted, unique
  std::vector<std::string> record_targets;     // sorted, unique
  std::optional<std::int64_t> dwell_ms;
  bool aggregate = false;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

// Checks the invariants that hold for an event in isolation.
inline void validate_event(const InteractionEvent& e) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::invalid_event, "event " + std::to_string(e.seq) + ": " + what);
  };
  if (e.seq == 0) fail("seq must be positive");
  const auto& targets = scope_of(e.kind) == Scope::attributes ? e.attribute_targets : e.record_targets;
  const auto& others = scope_of(e.kind) == Scope::attributes ? e.record_targets : e.attribute_targets;
  if (targets.empty()) fail("no targets");
  if (!others.empty()) fail(std::string(to_string(e.kind)) + " cannot target " +
                            std::string(to_string(scope_of(e.kind) == Scope::attributes ? Scope::records
                                                                                         : Scope::attributes)));
  if (!std::is_sorted(targets.begin(), targets.end()) ||
      std::adjacent_find(targets.begin(), targets.end()) != targets.end()) {
    fail("targets must be sorted and unique");
  }
  if (is_hover(e.kind)) {
    if (!e.dwell_ms) fail("hover without dwell_ms");
    if (*e.dwell_ms < 0) fail("negative dwell_ms");
    if (!e.aggregate && targets.size() != 1) fail("unit hover must target exactly one record");
  } else {
    if (e.dwell_ms) fail("dwell_ms on a non-hover event");
    if (e.aggregate) fail("aggregate flag on a non-hover event");
    if (targets.size() != 1) fail("attribute events target exactly one attribute");
  }
}

inline json to_json(const InteractionEvent& e) {
  json j = {{"seq", e.seq},
            {"timestamp_ms", e.timestamp_ms},
            {"kind", to_string(e.kind)},
            {"attribute_targets", e.attribute_targets},
            {"record_targets", e.record_targets},
            {"aggregate", e.aggregate}};
  if (e.dwell_ms) j["dwell_ms"] = *e.dwell_ms;
  return j;
}

inline InteractionEvent event_from_json(const json& j) {
  try {
    InteractionEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    const auto kind_text = j.at("kind").get<std::string>();
    auto kind = parse_event_kind(kind_text);
    if (!kind) throw Error(ErrorCode::unknown_kind, "unknown event kind '" + kind_text + "'");
    e.kind = *kind;
    e.attribute_targets = j.at("attribute_targets").get<std::vector<std::string>>();
    e.record_targets = j.at("record_targets").get<std::vector<std::string>>();
    e.aggregate = j.at("aggregate").get<bool>();
    if (auto it = j.find("dwell_ms"); it != j.end() && !it->is_null()) e.dwell_ms = it->get<std::int64_t>();
    validate_event(e);
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::bad_input, std::string("malformed event: ") + ex.what());
  }
}

}  // namespace provlens
