#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "provlens/csv.hpp"
#include "provlens/transform.hpp"

namespace provlens {

inline constexpr int kVisSpecVersion = 1;

// Field naming the attribute itself in attribute-panel glyph specs.
inline constexpr std::string_view kAttributeNameField = "attribute";

enum class MarkType { point, bar, line, area, text };

inline constexpr std::array<std::string_view, 5> kMarkNames = {"point", "bar", "line", "area", "text"};

inline std::string_view to_string(MarkType m) { return kMarkNames[static_cast<std::size_t>(m)]; }

inline MarkType parse_mark(std::string_view text) {
  for (std::size_t i = 0; i < kMarkNames.size(); ++i) {
    if (kMarkNames[i] == text) return static_cast<MarkType>(i);
  }
  throw Error(ErrorCode::bad_spec, "unknown mark '" + std::string(text) + "'");
}

enum class Channel {
  x, y, column, row, fill, fillOpacity, stroke, strokeOpacity, strokeWidth, size, shape, tooltip, text, annotation,
};

inline constexpr std::array<std::string_view, 14> kChannelNames = {
    "x",           "y",    "column", "row",   "fill",    "fillOpacity", "stroke",
    "strokeOpacity", "strokeWidth", "size", "shape", "tooltip", "text", "annotation"};

inline std::string_view to_string(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }

inline Channel parse_channel(std::string_view text) {
  for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
    if (kChannelNames[i] == text) return static_cast<Channel>(i);
  }
  throw Error(ErrorCode::bad_spec, "unknown channel '" + std::string(text) + "'");
}

// tooltip, text and annotation print values and have no scale.
inline bool has_scale(Channel c) {
  return c != Channel::tooltip && c != Channel::text && c != Channel::annotation;
}

enum class Aggregate { sum, mean, count };

inline std::string_view to_string(Aggregate a) {
  switch (a) {
    case Aggregate::sum: return "sum";
    case Aggregate::mean: return "mean";
    case Aggregate::count: return "count";
  }
  return "?";
}

inline Aggregate parse_aggregate(std::string_view text) {
  if (text == "sum") return Aggregate::sum;
  if (text == "mean") return Aggregate::mean;
  if (text == "count") return Aggregate::count;
  throw Error(ErrorCode::bad_spec, "unknown aggregate '" + std::string(text) + "'");
}

enum class FieldKind { quantitative, nominal };

inline std::string_view to_string(FieldKind k) { return k == FieldKind::quantitative ? "quantitative" : "nominal"; }

struct ChannelBinding {
  Channel channel = Channel::x;
  std::string field;
  std::optional<Aggregate> aggregate;
  bool reverse = false;

  friend bool operator==(const ChannelBinding&, const ChannelBinding&) = default;
};

// Resolves what `field` means in `scope`; nullopt when it does not exist.
// Provenance fields are always quantitative.
inline std::optional<FieldKind> field_kind(std::string_view field, Scope scope, const Dataset& dataset) {
  if (is_provenance_field(field)) return FieldKind::quantitative;
  if (scope == Scope::attributes) {
    if (field == kAttributeNameField) return FieldKind::nominal;
    return std::nullopt;
  }
  auto idx = dataset.attribute_index(field);
  if (!idx) return std::nullopt;
  return dataset.attributes()[*idx].kind == AttributeKind::numerical ? FieldKind::quantitative : FieldKind::nominal;
}

class VisSpec;
inline VisSpec build_vis_spec(MarkType mark, std::vector<ChannelBinding> bindings,
                              std::vector<TransformSpec> transforms, Scope scope, const Dataset& dataset);

// Declarative visualization: a mark, channel bindings (at most one per
// channel, kept in channel order), and transforms applied before binding.
class VisSpec {
 public:
  MarkType mark() const noexcept { return mark_; }
  Scope scope() const noexcept { return scope_; }
  const std::vector<ChannelBinding>& bindings() const noexcept { return bindings_; }
  const std::vector<TransformSpec>& transforms() const noexcept { return transforms_; }
  const std::map<Channel, FieldKind>& kinds() const noexcept { return kinds_; }

  const ChannelBinding* binding(Channel c) const {
    for (const auto& b : bindings_) {
      if (b.channel == c) return &b;
    }
    return nullptr;
  }
  bool aggregated() const {
    return std::any_of(bindings_.begin(), bindings_.end(), [](const auto& b) { return b.aggregate.has_value(); });
  }

  // Canonical json: object keys sorted, optional members omitted when unset.
  json to_json() const {
    json encodings = json::object();
    for (const auto& b : bindings_) {
      json enc = {{"field", b.field}, {"kind", to_string(kinds_.at(b.channel))}};
      if (b.aggregate) enc["aggregate"] = to_string(*b.aggregate);
      if (b.reverse) enc["reverse"] = true;
      encodings[std::string(to_string(b.channel))] = std::move(enc);
    }
    json transforms = json::array();
    for (const auto& t : transforms_) transforms.push_back(provlens::to_json(t));
    return {{"spec_version", kVisSpecVersion},
            {"mark", to_string(mark_)},
            {"scope", to_string(scope_)},
            {"encodings", std::move(encodings)},
            {"transforms", std::move(transforms)}};
  }
  std::string canonical() const { return to_json().dump(); }

 private:
  friend VisSpec build_vis_spec(MarkType, std::vector<ChannelBinding>, std::vector<TransformSpec>, Scope,
                                const Dataset&);

  MarkType mark_ = MarkType::point;
  Scope scope_ = Scope::records;
  std::vector<ChannelBinding> bindings_;
  std::vector<TransformSpec> transforms_;
  std::map<Channel, FieldKind> kinds_;
};

// Validates and assembles a spec. Attribute-scope specs are glyphs in the
// attribute panel and allow only point, bar and text marks.
inline VisSpec build_vis_spec(MarkType mark, std::vector<ChannelBinding> bindings,
                              std::vector<TransformSpec> transforms, Scope scope, const Dataset& dataset) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::bad_spec, what); };

  if (scope == Scope::attributes && (mark == MarkType::line || mark == MarkType::area)) {
    fail(std::string(to_string(mark)) + " marks need two values and cannot be attribute glyphs");
  }

  VisSpec spec;
  spec.mark_ = mark;
  spec.scope_ = scope;
  std::sort(bindings.begin(), bindings.end(),
            [](const ChannelBinding& a, const ChannelBinding& b) { return a.channel < b.channel; });
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    const auto& b = bindings[i];
    const auto ch = std::string(to_string(b.channel));
    if (i > 0 && bindings[i - 1].channel == b.channel) fail("channel '" + ch + "' bound twice");
    const auto kind = field_kind(b.field, scope, dataset);
    if (!kind) fail("unknown field '" + b.field + "' for " + std::string(to_string(scope)) + " scope");
    if (b.channel == Channel::shape && *kind != FieldKind::nominal) {
      fail("shape needs a categorical field, got '" + b.field + "'");
    }
    if (b.reverse && !has_scale(b.channel)) fail("channel '" + ch + "' has no scale to reverse");
    if (b.aggregate) {
      if (scope == Scope::attributes) fail("attribute glyphs cannot aggregate");
      if (*kind == FieldKind::nominal && *b.aggregate != Aggregate::count) {
        fail("cannot " + std::string(to_string(*b.aggregate)) + " categorical field '" + b.field + "'");
      }
    }
    spec.kinds_[b.channel] = *kind;
  }

  if (scope == Scope::records && mark != MarkType::text) {
    const bool positional = std::any_of(bindings.begin(), bindings.end(), [](const auto& b) {
      return b.channel == Channel::x || b.channel == Channel::y;
    });
    if (!positional) fail(std::string(to_string(mark)) + " mark needs x or y bound");
  }

  if (std::any_of(bindings.begin(), bindings.end(), [](const auto& b) { return b.aggregate.has_value(); })) {
    std::size_t groupers = 0;
    for (const auto& b : bindings) {
      if (b.aggregate) continue;
      if (spec.kinds_.at(b.channel) == FieldKind::nominal && has_scale(b.channel)) {
        ++groupers;
      } else {
        fail("channel '" + std::string(to_string(b.channel)) + "' must aggregate or group in an aggregate spec");
      }
    }
    if (groupers != 1) fail("aggregate specs need exactly one categorical grouping channel");
  }

  for (const auto& t : transforms) validate_transform(t, scope, dataset);

  spec.bindings_ = std::move(bindings);
  spec.transforms_ = std::move(transforms);
  return spec;
}

inline VisSpec vis_spec_from_json(const json& j, const Dataset& dataset) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::bad_spec, "spec must be a json object");
    if (auto it = j.find("spec_version"); it != j.end() && it->get<int>() != kVisSpecVersion) {
      throw Error(ErrorCode::bad_spec, "unsupported spec_version " + it->dump());
    }
    const auto mark = parse_mark(j.at("mark").get<std::string>());
    const auto scope = j.contains("scope") ? parse_scope(j.at("scope").get<std::string>()) : Scope::records;
    std::vector<ChannelBinding> bindings;
    std::vector<std::pair<Channel, std::string>> declared_kinds;
    if (auto it = j.find("encodings"); it != j.end()) {
      for (const auto& [channel, enc] : it->items()) {
        ChannelBinding b;
        b.channel = parse_channel(channel);
        b.field = enc.at("field").get<std::string>();
        if (auto a = enc.find("aggregate"); a != enc.end() && !a->is_null()) {
          b.aggregate = parse_aggregate(a->get<std::string>());
        }
        if (auto r = enc.find("reverse"); r != enc.end()) b.reverse = r->get<bool>();
        if (auto k = enc.find("kind"); k != enc.end()) declared_kinds.emplace_back(b.channel, k->get<std::string>());
        bindings.push_back(std::move(b));
      }
    }
    std::vector<TransformSpec> transforms;
    if (auto it = j.find("transforms"); it != j.end()) {
      for (const auto& t : *it) transforms.push_back(transform_from_json(t));
    }
    auto spec = build_vis_spec(mark, std::move(bindings), std::move(transforms), scope, dataset);
    for (const auto& [channel, kind] : declared_kinds) {
      if (to_string(spec.kinds().at(channel)) != kind) {
        throw Error(ErrorCode::bad_spec, "channel '" + std::string(to_string(channel)) + "' declares kind '" + kind +
                                             "' but its field is " + std::string(to_string(spec.kinds().at(channel))));
      }
    }
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_spec, std::string("malformed spec: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::bad_spec) throw;
    throw Error(ErrorCode::bad_spec, e.what());
  }
}

// Maps a value in [0, 1] to a normalized channel position; reversed scales
// flip it. Renderers map the position to pixels, colors or sizes.
inline double resolve_scale(const ChannelBinding& binding, double value) {
  if (!has_scale(binding.channel)) {
    throw Error(ErrorCode::bad_spec, "channel '" + std::string(to_string(binding.channel)) + "' has no scale");
  }
  return binding.reverse ? 1.0 - value : value;
}

inline std::vector<double> resolve_scale(const ChannelBinding& binding, std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(resolve_scale(binding, v));
  return out;
}

// Score labels for tooltip/text/annotation.
inline std::string format_label(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

// Dataset rows extended with frequency and recency columns, plus the
// attribute-level score table.
class AugmentedTable {
 public:
  AugmentedTable(std::shared_ptr<const Dataset> dataset, ScoreTable records, ScoreTable attributes)
      : dataset_(std::move(dataset)), records_(std::move(records)), attributes_(std::move(attributes)) {}

  const Dataset& dataset() const noexcept { return *dataset_; }
  const ScoreTable& record_scores() const noexcept { return records_; }
  const ScoreTable& attribute_scores() const noexcept { return attributes_; }
  const ScoreTable& scores(Scope s) const noexcept { return s == Scope::records ? records_ : attributes_; }

  std::vector<std::string> columns() const {
    auto cols = dataset_->attribute_names();
    cols.emplace_back(kFrequencyField);
    cols.emplace_back(kRecencyField);
    return cols;
  }

  // Numeric value of a quantitative field for an entity; nullopt for nulls.
  std::optional<double> number(Scope scope, const std::string& entity, std::string_view field) const {
    if (auto m = parse_metric(field)) return scores(scope).at(entity).score(*m);
    if (scope != Scope::records) return std::nullopt;
    return dataset_->number(*dataset_->record_index(entity), *dataset_->attribute_index(field));
  }

  // Text of a nominal field; nullopt for nulls.
  std::optional<std::string> text(Scope scope, const std::string& entity, std::string_view field) const {
    if (scope == Scope::attributes) {
      if (field == kAttributeNameField) return entity;
      return std::nullopt;
    }
    if (auto m = parse_metric(field)) return format_label(records_.at(entity).score(*m));
    return dataset_->records()[*dataset_->record_index(entity)].values[*dataset_->attribute_index(field)];
  }

  // Dataset columns in order followed by frequency,recency; scores printed
  // with 6 significant digits.
  std::string to_csv() const {
    std::string out;
    const auto cols = columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ',';
      out += csv::escape(cols[i]);
    }
    out += '\n';
    char buf[32];
    for (const auto& rec : dataset_->records()) {
      for (const auto& cell : rec.values) {
        if (cell) out += csv::escape(*cell);
        out += ',';
      }
      const auto& row = records_.at(rec.id);
      std::snprintf(buf, sizeof buf, "%.6g,%.6g\n", row.frequency, row.recency);
      out += buf;
    }
    return out;
  }

 private:
  std::shared_ptr<const Dataset> dataset_;
  ScoreTable records_;
  ScoreTable attributes_;
};

inline AugmentedTable augmented_table(std::shared_ptr<const Dataset> dataset, ScoreTable records,
                                      ScoreTable attributes) {
  if (!dataset) throw Error(ErrorCode::bad_input, "augmented table requires a dataset");
  if (records.scope() != Scope::records || attributes.scope() != Scope::attributes) {
    throw Error(ErrorCode::bad_input, "score table scope mismatch");
  }
  auto same_entities = [](const ScoreTable& t, const std::vector<std::string>& names) {
    if (t.rows().size() != names.size()) return false;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (t.rows()[i].entity != names[i]) return false;
    }
    return true;
  };
  if (!same_entities(records, dataset->record_ids()) || !same_entities(attributes, dataset->attribute_names())) {
    throw Error(ErrorCode::bad_input, "score tables were not derived from this dataset");
  }
  return AugmentedTable(std::move(dataset), std::move(records), std::move(attributes));
}

inline AugmentedTable augmented_table(const ProvenanceLedger& ledger, const Strategy& strategy = {}) {
  return augmented_table(ledger.dataset_ptr(), score_table(ledger, Scope::records, strategy),
                         score_table(ledger, Scope::attributes, strategy));
}

struct SeriesGroup {
  std::string key;
  std::size_t rows = 0;
  std::map<Channel, double> values;  // one per aggregated channel
};

// Groups the (transformed) records by the spec's categorical grouping
// channel and aggregates every aggregated binding per group. Groups come
// back ordered by key; rows with a null key are dropped.
inline std::vector<SeriesGroup> aggregate_series(const VisSpec& spec, const AugmentedTable& table) {
  if (!spec.aggregated()) throw Error(ErrorCode::bad_spec, "spec has no aggregate binding");
  const ChannelBinding* group_by = nullptr;
  for (const auto& b : spec.bindings()) {
    if (!b.aggregate) group_by = &b;
  }
  const auto& scores = table.record_scores();
  auto entities = apply_transforms(table.dataset().record_ids(), scores, table.dataset(), spec.transforms());

  struct Acc {
    std::size_t rows = 0;
    std::map<Channel, std::pair<double, std::size_t>> sums;  // sum, non-null count
  };
  std::map<std::string, Acc> groups;
  for (const auto& id : entities) {
    auto key = table.text(Scope::records, id, group_by->field);
    if (!key) continue;
    auto& acc = groups[*key];
    ++acc.rows;
    for (const auto& b : spec.bindings()) {
      if (!b.aggregate) continue;
      auto& [sum, n] = acc.sums[b.channel];
      if (spec.kinds().at(b.channel) == FieldKind::nominal) {
        if (table.text(Scope::records, id, b.field)) ++n;
      } else if (auto v = table.number(Scope::records, id, b.field)) {
        sum += *v;
        ++n;
      }
    }
  }

  std::vector<SeriesGroup> out;
  for (const auto& [key, acc] : groups) {
    SeriesGroup g{key, acc.rows, {}};
    for (const auto& b : spec.bindings()) {
      if (!b.aggregate) continue;
      const auto [sum, n] = acc.sums.count(b.channel) ? acc.sums.at(b.channel) : std::pair<double, std::size_t>{};
      switch (*b.aggregate) {
        case Aggregate::sum: g.values[b.channel] = sum; break;
        case Aggregate::mean: g.values[b.channel] = n ? sum / static_cast<double>(n) : 0.0; break;
        case Aggregate::count: g.values[b.channel] = static_cast<double>(n); break;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

namespace detail {

// Normalizes a data field's numeric values into [0, 1] over its extent.
struct Extent {
  double lo = 0.0;
  double hi = 0.0;
  double normalize(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }
};

inline json encode_value(const ChannelBinding& b, FieldKind kind, std::optional<double> number,
                         std::optional<std::string> text, const std::optional<Extent>& extent) {
  if (kind == FieldKind::nominal) return {{"value", text ? json(*text) : json(nullptr)}};
  if (!number) return {{"value", nullptr}};
  json j = {{"value", *number}};
  if (!has_scale(b.channel)) {
    j["label"] = format_label(*number);
  } else {
    const double unit = extent ? extent->normalize(*number) : *number;
    j["position"] = resolve_scale(b, unit);
  }
  return j;
}

}  // namespace detail

// Applies the spec's transforms and resolves every channel for every
// surviving entity (or group, for aggregate specs). The result is what a
// renderer draws.
inline json bind_data(const VisSpec& spec, const AugmentedTable& table) {
  json out = {{"spec", spec.to_json()}};
  const Scope scope = spec.scope();

  if (spec.aggregated()) {
    auto groups = aggregate_series(spec, table);
    std::map<Channel, detail::Extent> extents;
    for (const auto& b : spec.bindings()) {
      if (!b.aggregate) continue;
      const bool provenance_mean = is_provenance_field(b.field) && *b.aggregate == Aggregate::mean;
      if (provenance_mean || groups.empty()) continue;
      double hi = 0.0;
      for (const auto& g : groups) hi = std::max(hi, g.values.at(b.channel));
      extents[b.channel] = {0.0, hi};
    }
    json rows = json::array();
    for (const auto& g : groups) {
      json enc = json::object();
      for (const auto& b : spec.bindings()) {
        std::optional<detail::Extent> extent;
        if (auto it = extents.find(b.channel); it != extents.end()) extent = it->second;
        enc[std::string(to_string(b.channel))] =
            b.aggregate ? detail::encode_value(b, FieldKind::quantitative, g.values.at(b.channel), std::nullopt, extent)
                        : json{{"value", g.key}};
      }
      rows.push_back({{"group", g.key}, {"rows", g.rows}, {"encodings", std::move(enc)}});
    }
    out["groups"] = std::move(rows);
    return out;
  }

  const auto& scores = table.scores(scope);
  std::vector<std::string> base =
      scope == Scope::records ? table.dataset().record_ids() : table.dataset().attribute_names();
  auto entities = apply_transforms(std::move(base), scores, table.dataset(), spec.transforms());

  std::map<Channel, detail::Extent> extents;
  for (const auto& b : spec.bindings()) {
    if (spec.kinds().at(b.channel) != FieldKind::quantitative || is_provenance_field(b.field)) continue;
    std::optional<detail::Extent> e;
    for (std::size_t r = 0; r < table.dataset().records().size(); ++r) {
      if (auto v = table.dataset().number(r, *table.dataset().attribute_index(b.field))) {
        if (!e) e = detail::Extent{*v, *v};
        e->lo = std::min(e->lo, *v);
        e->hi = std::max(e->hi, *v);
      }
    }
    if (e) extents[b.channel] = *e;
  }

  json rows = json::array();
  for (const auto& id : entities) {
    json enc = json::object();
    for (const auto& b : spec.bindings()) {
      const auto kind = spec.kinds().at(b.channel);
      std::optional<detail::Extent> extent;
      if (auto it = extents.find(b.channel); it != extents.end()) extent = it->second;
      enc[std::string(to_string(b.channel))] =
          detail::encode_value(b, kind, kind == FieldKind::quantitative ? table.number(scope, id, b.field) : std::nullopt,
                               kind == FieldKind::nominal ? table.text(scope, id, b.field) : std::nullopt, extent);
    }
    rows.push_back({{"entity", id}, {"encodings", std::move(enc)}});
  }
  out["rows"] = std::move(rows);
  return out;
}

}  // namespace provlens
