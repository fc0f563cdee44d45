#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provlens/ledger.hpp"

namespace provlens {

enum class Mode { relative, absolute, binary };

inline std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::relative: return "relative";
    case Mode::absolute: return "absolute";
    case Mode::binary: return "binary";
  }
  return "?";
}

inline Mode parse_mode(std::string_view text) {
  if (text == "relative" || text == "rel") return Mode::relative;
  if (text == "absolute" || text == "abs") return Mode::absolute;
  if (text == "binary" || text == "bin") return Mode::binary;
  throw Error(ErrorCode::bad_input, "unknown scoring mode '" + std::string(text) + "'");
}

struct Strategy {
  Mode frequency = Mode::relative;
  Mode recency = Mode::relative;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

inline json to_json(const Strategy& s) {
  return {{"frequency", to_string(s.frequency)}, {"recency", to_string(s.recency)}};
}

inline Strategy strategy_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::bad_input, "strategy must be an object");
  Strategy s;
  if (auto it = j.find("frequency"); it != j.end()) s.frequency = parse_mode(it->get<std::string>());
  if (auto it = j.find("recency"); it != j.end()) s.recency = parse_mode(it->get<std::string>());
  return s;
}

// "rel" applies to both metrics; "rel,abs" sets frequency then recency.
inline Strategy parse_strategy(std::string_view text) {
  auto comma = text.find(',');
  if (comma == std::string_view::npos) {
    auto m = parse_mode(text);
    return {m, m};
  }
  return {parse_mode(text.substr(0, comma)), parse_mode(text.substr(comma + 1))};
}

enum class Metric { frequency, recency };

inline std::string_view to_string(Metric m) { return m == Metric::frequency ? kFrequencyField : kRecencyField; }

inline std::optional<Metric> parse_metric(std::string_view text) {
  if (text == kFrequencyField) return Metric::frequency;
  if (text == kRecencyField) return Metric::recency;
  return std::nullopt;
}

using ScoreMap = std::map<std::string, double>;

// Relative: units / max units; absolute: units / total units; binary: any
// interaction scores 1. Every entity scores 0 when the scope is untouched.
inline ScoreMap frequency_scores(const ProvenanceLedger& ledger, Scope scope, Mode mode) {
  const auto& l = ledger.scope(scope);
  double max_units = 0.0;
  double total_units = 0.0;
  for (const auto& [_, e] : l.entries) {
    max_units = std::max(max_units, e.units);
    total_units += e.units;
  }
  ScoreMap out;
  for (const auto& name : ledger.entities(scope)) {
    const auto* e = l.find(name);
    double score = 0.0;
    if (e && e->units > 0.0) {
      switch (mode) {
        case Mode::relative: score = e->units / max_units; break;
        case Mode::absolute: score = e->units / total_units; break;
        case Mode::binary: score = 1.0; break;
      }
    }
    out[name] = score;
  }
  return out;
}

// Relative: rank of the entity's latest touch over the scope's event count.
// Absolute: latest touch timestamp placed linearly between the scope's first
// and last event timestamps (1 when that span is empty). Binary: 1 for the
// entities stamped by the scope's last event.
inline ScoreMap recency_scores(const ProvenanceLedger& ledger, Scope scope, Mode mode) {
  const auto& l = ledger.scope(scope);
  const double span = static_cast<double>(l.last_timestamp_ms - l.first_timestamp_ms);
  ScoreMap out;
  for (const auto& name : ledger.entities(scope)) {
    const auto* e = l.find(name);
    double score = 0.0;
    if (e && !e->touches.empty()) {
      const auto& last = e->last_touch();
      switch (mode) {
        case Mode::relative:
          score = static_cast<double>(last.scope_rank) / static_cast<double>(l.event_count);
          break;
        case Mode::absolute:
          score = l.event_count <= 1 || span <= 0.0
                      ? 1.0
                      : static_cast<double>(last.timestamp_ms - l.first_timestamp_ms) / span;
          break;
        case Mode::binary:
          score = last.scope_rank == l.event_count ? 1.0 : 0.0;
          break;
      }
    }
    out[name] = score;
  }
  return out;
}

struct ScoreRow {
  std::string entity;
  double frequency = 0.0;
  double recency = 0.0;
  std::optional<std::uint64_t> rank_frequency;
  std::optional<std::uint64_t> rank_recency;
  std::optional<std::uint64_t> last_touch;  // scope rank of the latest touch
  double units = 0.0;

  bool interacted() const noexcept { return last_touch.has_value(); }
  double score(Metric m) const noexcept { return m == Metric::frequency ? frequency : recency; }
  std::optional<std::uint64_t> rank(Metric m) const noexcept {
    return m == Metric::frequency ? rank_frequency : rank_recency;
  }
};

// Tie policy shared by ranking, sorting, and top-N: higher score first, then
// the more recent last touch, then entity id. Untouched entities sort after
// touched ones at equal score.
inline bool ranks_before(const ScoreRow& a, const ScoreRow& b, Metric m) {
  const double sa = a.score(m);
  const double sb = b.score(m);
  if (sa != sb) return sa > sb;
  const auto ta = a.last_touch.value_or(0);
  const auto tb = b.last_touch.value_or(0);
  if (ta != tb) return ta > tb;
  return a.entity < b.entity;
}

// Per-entity scores for one scope, rows in dataset order.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(Scope scope, Strategy strategy, std::vector<ScoreRow> rows)
      : scope_(scope), strategy_(strategy), rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i) index_.emplace(rows_[i].entity, i);
  }

  Scope scope() const noexcept { return scope_; }
  const Strategy& strategy() const noexcept { return strategy_; }
  const std::vector<ScoreRow>& rows() const& noexcept { return rows_; }
  std::vector<ScoreRow> rows() && { return std::move(rows_); }

  const ScoreRow* find(std::string_view entity) const {
    auto it = index_.find(std::string(entity));
    return it == index_.end() ? nullptr : &rows_[it->second];
  }
  const ScoreRow& at(std::string_view entity) const {
    const auto* row = find(entity);
    if (!row) throw Error(ErrorCode::unknown_entity, "no score row for '" + std::string(entity) + "'");
    return *row;
  }

  json to_json() const {
    json rows = json::array();
    for (const auto& r : rows_) {
      rows.push_back({{"entity", r.entity},
                      {"frequency", r.frequency},
                      {"recency", r.recency},
                      {"rank_frequency", r.rank_frequency ? json(*r.rank_frequency) : json(nullptr)},
                      {"rank_recency", r.rank_recency ? json(*r.rank_recency) : json(nullptr)}});
    }
    return {{"scope", to_string(scope_)}, {"strategy", provlens::to_json(strategy_)}, {"rows", std::move(rows)}};
  }

 private:
  Scope scope_ = Scope::records;
  Strategy strategy_;
  std::vector<ScoreRow> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::vector<ScoreRow> base_rows(const ProvenanceLedger& ledger, Scope scope, const Strategy& strategy) {
  const auto freq = frequency_scores(ledger, scope, strategy.frequency);
  const auto rec = recency_scores(ledger, scope, strategy.recency);
  const auto& l = ledger.scope(scope);
  std::vector<ScoreRow> rows;
  for (const auto& name : ledger.entities(scope)) {
    ScoreRow row;
    row.entity = name;
    row.frequency = freq.at(name);
    row.recency = rec.at(name);
    if (const auto* e = l.find(name)) {
      row.last_touch = e->last_touch().scope_rank;
      row.units = e->units;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Positions 1..k over interacted rows under the tie policy.
inline std::map<std::string, std::uint64_t> rank_rows(const std::vector<ScoreRow>& rows, Metric metric) {
  std::vector<const ScoreRow*> touched;
  for (const auto& r : rows) {
    if (r.interacted()) touched.push_back(&r);
  }
  std::sort(touched.begin(), touched.end(),
            [metric](const ScoreRow* a, const ScoreRow* b) { return ranks_before(*a, *b, metric); });
  std::map<std::string, std::uint64_t> out;
  for (std::size_t i = 0; i < touched.size(); ++i) out[touched[i]->entity] = i + 1;
  return out;
}

}  // namespace detail

// Ordinal rank over interacted entities (1 = highest score). Ties are
// broken by the more recent last touch, then entity id, so ranks form a
// total order. Untouched entities are absent.
inline std::map<std::string, std::uint64_t> provenance_ranks(const ProvenanceLedger& ledger, Scope scope,
                                                             Metric metric, const Strategy& strategy = {}) {
  return detail::rank_rows(detail::base_rows(ledger, scope, strategy), metric);
}

inline ScoreTable score_table(const ProvenanceLedger& ledger, Scope scope, const Strategy& strategy = {}) {
  auto rows = detail::base_rows(ledger, scope, strategy);
  const auto rank_f = detail::rank_rows(rows, Metric::frequency);
  const auto rank_r = detail::rank_rows(rows, Metric::recency);
  for (auto& row : rows) {
    if (auto it = rank_f.find(row.entity); it != rank_f.end()) row.rank_frequency = it->second;
    if (auto it = rank_r.find(row.entity); it != rank_r.end()) row.rank_recency = it->second;
  }
  return ScoreTable(scope, strategy, std::move(rows));
}

}  // namespace provlens
