#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "provlens/dataset.hpp"
#include "provlens/event.hpp"

namespace provlens {

inline constexpr std::int64_t kDefaultDwellThresholdMs = 250;

// A UI action as the client reports it, before thresholding and fan-out.
struct RawAction {
  std::optional<std::string> action_id;  // client id for idempotent delivery
  std::string kind;
  std::int64_t timestamp_ms = 0;
  std::vector<std::string> attributes;   // may name provenance fields
  std::vector<std::string> records;      // constituents for aggregate hovers
  std::optional<std::int64_t> dwell_ms;
  bool aggregate = false;
  // Aggregate mark identity (attribute -> value); resolved to its
  // constituent records when `records` is empty.
  std::map<std::string, std::string> group;
  // "drag" for intermediate slider values, "commit" on release.
  std::optional<std::string> phase;
  std::optional<std::string> channel;    // encoding shelf, informational
};

inline RawAction raw_action_from_json(const json& j) {
  try {
    RawAction a;
    if (!j.is_object()) throw Error(ErrorCode::bad_input, "action must be a json object");
    if (auto it = j.find("action_id"); it != j.end() && !it->is_null()) a.action_id = it->get<std::string>();
    a.kind = j.at("kind").get<std::string>();
    a.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    if (auto it = j.find("attributes"); it != j.end()) a.attributes = it->get<std::vector<std::string>>();
    if (auto it = j.find("attribute"); it != j.end()) a.attributes.push_back(it->get<std::string>());
    if (auto it = j.find("records"); it != j.end()) a.records = it->get<std::vector<std::string>>();
    if (auto it = j.find("record"); it != j.end()) a.records.push_back(it->get<std::string>());
    if (auto it = j.find("dwell_ms"); it != j.end() && !it->is_null()) a.dwell_ms = it->get<std::int64_t>();
    if (auto it = j.find("aggregate"); it != j.end()) a.aggregate = it->get<bool>();
    if (auto it = j.find("group"); it != j.end()) a.group = it->get<std::map<std::string, std::string>>();
    if (auto it = j.find("phase"); it != j.end() && !it->is_null()) a.phase = it->get<std::string>();
    if (auto it = j.find("channel"); it != j.end() && !it->is_null()) a.channel = it->get<std::string>();
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_input, std::string("malformed action: ") + e.what());
  }
}

inline json to_json(const RawAction& a) {
  json j = {{"kind", a.kind}, {"timestamp_ms", a.timestamp_ms}};
  if (a.action_id) j["action_id"] = *a.action_id;
  if (!a.attributes.empty()) j["attributes"] = a.attributes;
  if (!a.records.empty()) j["records"] = a.records;
  if (a.dwell_ms) j["dwell_ms"] = *a.dwell_ms;
  if (a.aggregate) j["aggregate"] = true;
  if (!a.group.empty()) j["group"] = a.group;
  if (a.phase) j["phase"] = *a.phase;
  if (a.channel) j["channel"] = *a.channel;
  return j;
}

// What normalization needs from the current visualization state.
struct NormalizeContext {
  const Dataset& dataset;
  std::int64_t dwell_threshold_ms = kDefaultDwellThresholdMs;
  std::uint64_t next_seq = 1;  // advanced for every emitted event
};

namespace detail {

inline std::vector<std::string> resolve_group(const Dataset& dataset, const std::map<std::string, std::string>& group) {
  std::vector<std::pair<std::size_t, std::string>> predicates;
  for (const auto& [attr, value] : group) {
    auto idx = dataset.attribute_index(attr);
    if (!idx) throw Error(ErrorCode::unknown_entity, "unknown attribute '" + attr + "' in aggregate group");
    predicates.emplace_back(*idx, value);
  }
  std::vector<std::string> ids;
  for (const auto& rec : dataset.records()) {
    bool match = std::all_of(predicates.begin(), predicates.end(), [&](const auto& p) {
      return rec.values[p.first] && *rec.values[p.first] == p.second;
    });
    if (match) ids.push_back(rec.id);
  }
  return ids;
}

inline std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

// Turns one raw action into zero or more interaction events:
//  - hovers under the dwell threshold are discarded;
//  - filter/sort drags are discarded until the commit;
//  - provenance fields are stripped from attribute targets, so an action
//    naming only frequency/recency yields nothing;
//  - an attribute action naming several data attributes yields one event
//    per attribute, in the order given;
//  - an aggregate hover yields one event over its N constituent records.
inline std::vector<InteractionEvent> normalize_action(const RawAction& raw, NormalizeContext& ctx) {
  const auto kind = parse_event_kind(raw.kind);
  if (!kind) throw Error(ErrorCode::unknown_kind, "unsupported action kind '" + raw.kind + "'");

  std::vector<InteractionEvent> out;
  if (is_hover(*kind)) {
    if (!raw.dwell_ms) throw Error(ErrorCode::invalid_event, "hover action without dwell_ms");
    if (*raw.dwell_ms < 0) throw Error(ErrorCode::invalid_event, "negative dwell_ms");
    if (!raw.attributes.empty()) throw Error(ErrorCode::invalid_event, "hover actions target records only");

    auto targets = raw.records;
    if (raw.aggregate && targets.empty() && !raw.group.empty()) {
      targets = detail::resolve_group(ctx.dataset, raw.group);
    }
    targets = detail::sorted_unique(std::move(targets));
    if (targets.empty()) {
      throw Error(ErrorCode::invalid_event, raw.aggregate ? "aggregate hover with empty constituent set"
                                                          : "hover action without a record");
    }
    if (!raw.aggregate && targets.size() != 1) {
      throw Error(ErrorCode::invalid_event, "unit hover must name exactly one record");
    }
    for (const auto& id : targets) {
      if (!ctx.dataset.has_record(id)) throw Error(ErrorCode::unknown_entity, "unknown record '" + id + "'");
    }
    if (*raw.dwell_ms < ctx.dwell_threshold_ms) return out;

    InteractionEvent e;
    e.seq = ctx.next_seq++;
    e.timestamp_ms = raw.timestamp_ms;
    e.kind = *kind;
    e.record_targets = std::move(targets);
    e.dwell_ms = raw.dwell_ms;
    e.aggregate = raw.aggregate;
    out.push_back(std::move(e));
    return out;
  }

  if (!raw.records.empty() || raw.aggregate) {
    throw Error(ErrorCode::invalid_event, raw.kind + " actions target attributes only");
  }
  if (raw.attributes.empty()) throw Error(ErrorCode::invalid_event, raw.kind + " action without an attribute");
  if (raw.phase && *raw.phase != "commit" && *raw.phase != "drag") {
    throw Error(ErrorCode::bad_input, "unknown phase '" + *raw.phase + "'");
  }
  const bool continuous = *kind == EventKind::filter_apply || *kind == EventKind::sort_apply;
  if (continuous && raw.phase == "drag") return out;

  std::vector<std::string> data_attrs;
  for (const auto& name : raw.attributes) {
    if (is_provenance_field(name)) continue;
    if (!ctx.dataset.has_attribute(name)) throw Error(ErrorCode::unknown_entity, "unknown attribute '" + name + "'");
    if (std::find(data_attrs.begin(), data_attrs.end(), name) == data_attrs.end()) data_attrs.push_back(name);
  }
  for (auto& name : data_attrs) {
    InteractionEvent e;
    e.seq = ctx.next_seq++;
    e.timestamp_ms = raw.timestamp_ms;
    e.kind = *kind;
    e.attribute_targets = {std::move(name)};
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace provlens
