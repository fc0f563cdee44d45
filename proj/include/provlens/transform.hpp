#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provlens/scoring.hpp"

namespace provlens {

enum class TransformKind { sort, filter, topn };
enum class Direction { asc, desc };

inline std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::sort: return "sort";
    case TransformKind::filter: return "filter";
    case TransformKind::topn: return "topn";
  }
  return "?";
}
inline std::string_view to_string(Direction d) { return d == Direction::asc ? "asc" : "desc"; }

inline Direction parse_direction(std::string_view text) {
  if (text == "asc") return Direction::asc;
  if (text == "desc") return Direction::desc;
  throw Error(ErrorCode::bad_spec, "unknown sort direction '" + std::string(text) + "'");
}

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;

  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

// One sort, filter, or top-N step. `metric` is "frequency", "recency", or a
// data attribute name (records scope only).
struct TransformSpec {
  TransformKind kind = TransformKind::sort;
  std::string metric;
  Direction direction = Direction::desc;  // sort
  std::optional<ValueRange> range;        // filter on a quantitative field
  std::vector<std::string> values;        // filter on a categorical field
  std::size_t n = 0;                      // topn

  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

inline json to_json(const TransformSpec& t) {
  json j = {{"kind", to_string(t.kind)}, {"metric", t.metric}};
  switch (t.kind) {
    case TransformKind::sort: j["direction"] = to_string(t.direction); break;
    case TransformKind::filter:
      if (t.range) {
        j["range"] = {t.range->lo, t.range->hi};
      } else {
        j["values"] = t.values;
      }
      break;
    case TransformKind::topn: j["n"] = t.n; break;
  }
  return j;
}

inline TransformSpec transform_from_json(const json& j) {
  try {
    TransformSpec t;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "sort") {
      t.kind = TransformKind::sort;
    } else if (kind == "filter") {
      t.kind = TransformKind::filter;
    } else if (kind == "topn") {
      t.kind = TransformKind::topn;
    } else {
      throw Error(ErrorCode::bad_spec, "unknown transform kind '" + kind + "'");
    }
    t.metric = j.at("metric").get<std::string>();
    switch (t.kind) {
      case TransformKind::sort:
        if (auto it = j.find("direction"); it != j.end()) t.direction = parse_direction(it->get<std::string>());
        break;
      case TransformKind::filter:
        if (auto it = j.find("range"); it != j.end()) {
          auto r = it->get<std::vector<double>>();
          if (r.size() != 2) throw Error(ErrorCode::bad_spec, "filter range must be [lo, hi]");
          t.range = ValueRange{r[0], r[1]};
        } else {
          t.values = j.at("values").get<std::vector<std::string>>();
        }
        break;
      case TransformKind::topn: {
        const auto n = j.at("n").get<long long>();
        if (n < 1) throw Error(ErrorCode::bad_spec, "topn n must be at least 1");
        t.n = static_cast<std::size_t>(n);
        break;
      }
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_spec, std::string("malformed transform: ") + e.what());
  }
}

namespace detail {

inline std::vector<const ScoreRow*> lookup_rows(std::span<const std::string> entities, const ScoreTable& table) {
  std::vector<const ScoreRow*> rows;
  rows.reserve(entities.size());
  for (const auto& e : entities) {
    const auto* row = table.find(e);
    if (!row) throw Error(ErrorCode::unknown_entity, "entity '" + e + "' is not in the score table");
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<std::string> names(const std::vector<const ScoreRow*>& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto* r : rows) out.push_back(r->entity);
  return out;
}

inline void check_range(const ValueRange& range, bool provenance) {
  if (range.lo > range.hi) throw Error(ErrorCode::bad_spec, "inverted filter range");
  if (provenance && (range.lo < 0.0 || range.hi > 1.0)) {
    throw Error(ErrorCode::bad_spec, "provenance filter range must lie within [0, 1]");
  }
}

}  // namespace detail

// Orders entities by a provenance metric. Equal scores fall back to the
// ranking tie policy in both directions, so the order is total.
inline std::vector<std::string> sort_entities(std::span<const std::string> entities, const ScoreTable& table,
                                              Metric metric, Direction direction) {
  auto rows = detail::lookup_rows(entities, table);
  std::sort(rows.begin(), rows.end(), [&](const ScoreRow* a, const ScoreRow* b) {
    const double sa = a->score(metric);
    const double sb = b->score(metric);
    if (sa != sb) return direction == Direction::desc ? sa > sb : sa < sb;
    return ranks_before(*a, *b, metric);
  });
  return detail::names(rows);
}

// Orders records by a data attribute: numerically for numerical attributes,
// lexically otherwise. Nulls go last in both directions; ties use the
// frequency tie policy of `table`.
inline std::vector<std::string> sort_entities(std::span<const std::string> entities, const ScoreTable& table,
                                              const Dataset& dataset, std::string_view attribute,
                                              Direction direction) {
  if (table.scope() != Scope::records) throw Error(ErrorCode::bad_spec, "data attributes only sort records");
  const auto attr = dataset.attribute_index(attribute);
  if (!attr) throw Error(ErrorCode::bad_spec, "unknown metric '" + std::string(attribute) + "'");
  const bool numeric = dataset.attributes()[*attr].kind == AttributeKind::numerical;
  auto rows = detail::lookup_rows(entities, table);
  struct Keyed {
    const ScoreRow* row;
    const Cell* cell;
    std::optional<double> number;
  };
  std::vector<Keyed> keyed;
  for (const auto* r : rows) {
    const auto rec = *dataset.record_index(r->entity);
    keyed.push_back({r, &dataset.records()[rec].values[*attr], numeric ? dataset.number(rec, *attr) : std::nullopt});
  }
  std::sort(keyed.begin(), keyed.end(), [&](const Keyed& a, const Keyed& b) {
    const bool an = !*a.cell;
    const bool bn = !*b.cell;
    if (an != bn) return bn;
    if (!an) {
      if (numeric) {
        if (*a.number != *b.number) return direction == Direction::desc ? *a.number > *b.number : *a.number < *b.number;
      } else if (**a.cell != **b.cell) {
        return direction == Direction::desc ? **a.cell > **b.cell : **a.cell < **b.cell;
      }
    }
    return ranks_before(*a.row, *b.row, Metric::frequency);
  });
  std::vector<std::string> out;
  for (const auto& k : keyed) out.push_back(k.row->entity);
  return out;
}

// Keeps entities with lo <= score <= hi, preserving input order.
inline std::vector<std::string> filter_entities(std::span<const std::string> entities, const ScoreTable& table,
                                                Metric metric, ValueRange range) {
  detail::check_range(range, true);
  std::vector<std::string> out;
  for (const auto* r : detail::lookup_rows(entities, table)) {
    const double s = r->score(metric);
    if (range.lo <= s && s <= range.hi) out.push_back(r->entity);
  }
  return out;
}

// Data-attribute filter over records: an inclusive numeric range, or
// membership in a category set. Nulls never match.
inline std::vector<std::string> filter_entities(std::span<const std::string> entities, const Dataset& dataset,
                                                std::string_view attribute, const TransformSpec& predicate) {
  const auto attr = dataset.attribute_index(attribute);
  if (!attr) throw Error(ErrorCode::bad_spec, "unknown metric '" + std::string(attribute) + "'");
  if (predicate.range) detail::check_range(*predicate.range, false);
  std::vector<std::string> out;
  for (const auto& id : entities) {
    const auto rec = dataset.record_index(id);
    if (!rec) throw Error(ErrorCode::unknown_entity, "unknown record '" + id + "'");
    const auto& cell = dataset.records()[*rec].values[*attr];
    if (!cell) continue;
    bool keep = false;
    if (predicate.range) {
      auto v = parse_number(*cell);
      keep = v && predicate.range->lo <= *v && *v <= predicate.range->hi;
    } else {
      keep = std::find(predicate.values.begin(), predicate.values.end(), *cell) != predicate.values.end();
    }
    if (keep) out.push_back(id);
  }
  return out;
}

// The first n interacted entities by provenance rank. Exactly
// min(n, #interacted) entities come back even when scores tie.
inline std::vector<std::string> top_n(std::span<const std::string> entities, const ScoreTable& table, Metric metric,
                                      std::size_t n) {
  if (n == 0) throw Error(ErrorCode::bad_spec, "top-N requires n >= 1");
  auto rows = detail::lookup_rows(entities, table);
  std::erase_if(rows, [](const ScoreRow* r) { return !r->interacted(); });
  std::sort(rows.begin(), rows.end(),
            [metric](const ScoreRow* a, const ScoreRow* b) { return ranks_before(*a, *b, metric); });
  if (rows.size() > n) rows.resize(n);
  return detail::names(rows);
}

// Checks a transform against the fields available in `scope`.
inline void validate_transform(const TransformSpec& t, Scope scope, const Dataset& dataset) {
  const auto metric = parse_metric(t.metric);
  if (!metric) {
    if (scope != Scope::records) {
      throw Error(ErrorCode::bad_spec, "attribute glyph transforms must use frequency or recency");
    }
    if (!dataset.has_attribute(t.metric)) throw Error(ErrorCode::bad_spec, "unknown metric '" + t.metric + "'");
    if (t.kind == TransformKind::topn) throw Error(ErrorCode::bad_spec, "top-N ranks by provenance metrics only");
  }
  if (t.kind == TransformKind::filter) {
    if (t.range) {
      detail::check_range(*t.range, metric.has_value());
      if (!metric && dataset.attribute(t.metric).kind != AttributeKind::numerical) {
        throw Error(ErrorCode::bad_spec, "range filter on categorical attribute '" + t.metric + "'");
      }
    } else if (metric) {
      throw Error(ErrorCode::bad_spec, "provenance filters need a range");
    }
  }
  if (t.kind == TransformKind::topn && t.n == 0) throw Error(ErrorCode::bad_spec, "top-N requires n >= 1");
}

// Applies transforms left to right; each step sees the previous output.
inline std::vector<std::string> apply_transforms(std::vector<std::string> entities, const ScoreTable& table,
                                                 const Dataset& dataset, std::span<const TransformSpec> transforms) {
  for (const auto& t : transforms) {
    validate_transform(t, table.scope(), dataset);
    const auto metric = parse_metric(t.metric);
    switch (t.kind) {
      case TransformKind::sort:
        entities = metric ? sort_entities(entities, table, *metric, t.direction)
                          : sort_entities(entities, table, dataset, t.metric, t.direction);
        break;
      case TransformKind::filter:
        entities = metric ? filter_entities(entities, table, *metric, *t.range)
                          : filter_entities(entities, dataset, t.metric, t);
        break;
      case TransformKind::topn:
        entities = top_n(entities, table, *metric, t.n);
        break;
    }
  }
  return entities;
}

}  // namespace provlens
