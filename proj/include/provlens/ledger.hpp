#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "provlens/dataset.hpp"
#include "provlens/event.hpp"
#include "provlens/normalize.hpp"

namespace provlens {

// One contributing interaction: the event's serial position within its
// scope and its timestamp. Entities touched by one aggregate event share it.
struct Touch {
  std::uint64_t scope_rank = 0;
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const Touch&, const Touch&) = default;
};

struct LedgerEntry {
  std::string entity;
  double units = 0.0;
  std::vector<Touch> touches;  // ascending scope_rank

  const Touch& last_touch() const { return touches.back(); }
};

struct ScopeLedger {
  std::map<std::string, LedgerEntry> entries;  // only touched entities
  std::uint64_t event_count = 0;
  std::int64_t first_timestamp_ms = 0;  // meaningful when event_count > 0
  std::int64_t last_timestamp_ms = 0;

  const LedgerEntry* find(const std::string& entity) const {
    auto it = entries.find(entity);
    return it == entries.end() ? nullptr : &it->second;
  }
};

// Accumulated interaction units and touch history per entity, kept
// separately for attributes and records. Copies share the dataset.
class ProvenanceLedger {
 public:
  explicit ProvenanceLedger(std::shared_ptr<const Dataset> dataset,
                            std::int64_t dwell_threshold_ms = kDefaultDwellThresholdMs)
      : dataset_(std::move(dataset)), dwell_threshold_ms_(dwell_threshold_ms) {
    if (!dataset_) throw Error(ErrorCode::bad_input, "ledger requires a dataset");
    if (dwell_threshold_ms_ < 0) throw Error(ErrorCode::bad_input, "dwell threshold must be non-negative");
  }

  const Dataset& dataset() const noexcept { return *dataset_; }
  const std::shared_ptr<const Dataset>& dataset_ptr() const noexcept { return dataset_; }
  std::int64_t dwell_threshold_ms() const noexcept { return dwell_threshold_ms_; }

  const ScopeLedger& scope(Scope s) const noexcept { return s == Scope::attributes ? attributes_ : records_; }
  const std::map<std::string, LedgerEntry>& attribute_entries() const noexcept { return attributes_.entries; }
  const std::map<std::string, LedgerEntry>& record_entries() const noexcept { return records_.entries; }
  std::uint64_t attribute_event_count() const noexcept { return attributes_.event_count; }
  std::uint64_t record_event_count() const noexcept { return records_.event_count; }
  std::uint64_t last_seq() const noexcept { return last_seq_; }

  // Entity names of a scope in dataset order.
  std::vector<std::string> entities(Scope s) const {
    return s == Scope::attributes ? dataset_->attribute_names() : dataset_->record_ids();
  }

  // Folds one event in. Validation happens before any mutation, so a
  // throwing call leaves the ledger untouched.
  void apply(const InteractionEvent& e) {
    validate_event(e);
    if (e.seq <= last_seq_) {
      throw Error(ErrorCode::stale_seq, "event seq " + std::to_string(e.seq) + " is not after " +
                                            std::to_string(last_seq_));
    }
    if (last_timestamp_ && e.timestamp_ms < *last_timestamp_) {
      throw Error(ErrorCode::invalid_event, "event " + std::to_string(e.seq) + ": timestamp goes backwards");
    }
    const Scope s = scope_of(e.kind);
    const auto& targets = s == Scope::attributes ? e.attribute_targets : e.record_targets;
    for (const auto& t : targets) {
      const bool known = s == Scope::attributes ? dataset_->has_attribute(t) : dataset_->has_record(t);
      if (!known) {
        throw Error(ErrorCode::unknown_entity, "unknown " + std::string(s == Scope::attributes ? "attribute" : "record") +
                                                   " '" + t + "'");
      }
    }

    auto& ledger = s == Scope::attributes ? attributes_ : records_;
    const double unit = e.aggregate ? 1.0 / static_cast<double>(targets.size()) : 1.0;
    const Touch touch{ledger.event_count + 1, e.timestamp_ms};
    for (const auto& t : targets) {
      auto [it, inserted] = ledger.entries.try_emplace(t);
      if (inserted) it->second.entity = t;
      it->second.units += unit;
      it->second.touches.push_back(touch);
    }
    if (ledger.event_count == 0) ledger.first_timestamp_ms = e.timestamp_ms;
    ledger.last_timestamp_ms = e.timestamp_ms;
    ++ledger.event_count;
    last_seq_ = e.seq;
    last_timestamp_ = e.timestamp_ms;
  }

  // Canonical form; two ledgers built from the same events serialize to the
  // same bytes.
  json to_json() const {
    auto scope_json = [](const ScopeLedger& l) {
      json entries = json::object();
      for (const auto& [name, entry] : l.entries) {
        json touches = json::array();
        for (const auto& t : entry.touches) touches.push_back({t.scope_rank, t.timestamp_ms});
        entries[name] = {{"units", entry.units}, {"touches", std::move(touches)}};
      }
      return json{{"entries", std::move(entries)},
                  {"event_count", l.event_count},
                  {"first_timestamp_ms", l.first_timestamp_ms},
                  {"last_timestamp_ms", l.last_timestamp_ms}};
    };
    return {{"attributes", scope_json(attributes_)},
            {"records", scope_json(records_)},
            {"last_seq", last_seq_},
            {"dwell_threshold_ms", dwell_threshold_ms_}};
  }

 private:
  std::shared_ptr<const Dataset> dataset_;
  std::int64_t dwell_threshold_ms_;
  ScopeLedger attributes_;
  ScopeLedger records_;
  std::uint64_t last_seq_ = 0;
  std::optional<std::int64_t> last_timestamp_;
};

// Pure form of ProvenanceLedger::apply.
inline ProvenanceLedger apply_event(ProvenanceLedger ledger, const InteractionEvent& event) {
  ledger.apply(event);
  return ledger;
}

}  // namespace provlens
