#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "provlens/csv.hpp"
#include "provlens/error.hpp"

namespace provlens {

using json = nlohmann::json;

enum class AttributeKind { numerical, categorical };

inline std::string_view to_string(AttributeKind kind) {
  return kind == AttributeKind::numerical ? "numerical" : "categorical";
}

inline AttributeKind parse_attribute_kind(std::string_view text) {
  if (text == "numerical") return AttributeKind::numerical;
  if (text == "categorical") return AttributeKind::categorical;
  throw Error(ErrorCode::bad_input, "unknown attribute kind '" + std::string(text) + "'");
}

struct AttributeDescriptor {
  std::string name;
  AttributeKind kind = AttributeKind::categorical;
  std::optional<std::string> description;
};

// Raw cell text; nullopt is a missing value.
using Cell = std::optional<std::string>;

struct Record {
  std::string id;
  std::vector<Cell> values;  // aligned with Dataset::attributes()
};

// Parses a finite real, tolerating surrounding blanks and a leading '+'.
inline std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

// Immutable typed table. Construction validates every invariant, so a
// Dataset that exists is well-formed.
class Dataset {
 public:
  Dataset(std::vector<AttributeDescriptor> attributes, std::vector<Record> records)
      : attributes_(std::move(attributes)), records_(std::move(records)) {
    if (records_.empty()) throw Error(ErrorCode::bad_input, "dataset has no records");
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
      const auto& name = attributes_[i].name;
      if (name.empty()) throw Error(ErrorCode::bad_input, "attribute name is empty");
      if (name == "frequency" || name == "recency") {
        throw Error(ErrorCode::bad_input, "attribute name '" + name + "' is reserved for provenance");
      }
      if (!attribute_index_.emplace(name, i).second) {
        throw Error(ErrorCode::bad_input, "duplicate attribute '" + name + "'");
      }
    }
    for (std::size_t r = 0; r < records_.size(); ++r) {
      const auto& rec = records_[r];
      if (rec.id.empty()) throw Error(ErrorCode::bad_input, "row " + std::to_string(r) + ": empty record id");
      if (!record_index_.emplace(rec.id, r).second) {
        throw Error(ErrorCode::bad_input, "row " + std::to_string(r) + ": duplicate record id '" + rec.id + "'");
      }
      if (rec.values.size() != attributes_.size()) {
        throw Error(ErrorCode::bad_input, "row " + std::to_string(r) + ": expected " +
                                              std::to_string(attributes_.size()) + " values");
      }
      for (std::size_t a = 0; a < attributes_.size(); ++a) {
        if (attributes_[a].kind == AttributeKind::numerical && rec.values[a] &&
            !parse_number(*rec.values[a])) {
          throw Error(ErrorCode::bad_input, "row " + std::to_string(r) + ": attribute '" +
                                                attributes_[a].name + "' value '" + *rec.values[a] +
                                                "' is not a finite number");
        }
      }
    }
  }

  const std::vector<AttributeDescriptor>& attributes() const noexcept { return attributes_; }
  const std::vector<Record>& records() const noexcept { return records_; }

  std::optional<std::size_t> attribute_index(std::string_view name) const {
    auto it = attribute_index_.find(std::string(name));
    if (it == attribute_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> record_index(std::string_view id) const {
    auto it = record_index_.find(std::string(id));
    if (it == record_index_.end()) return std::nullopt;
    return it->second;
  }
  bool has_attribute(std::string_view name) const { return attribute_index(name).has_value(); }
  bool has_record(std::string_view id) const { return record_index(id).has_value(); }

  const AttributeDescriptor& attribute(std::string_view name) const {
    auto idx = attribute_index(name);
    if (!idx) throw Error(ErrorCode::unknown_entity, "unknown attribute '" + std::string(name) + "'");
    return attributes_[*idx];
  }

  std::optional<double> number(std::size_t record, std::size_t attr) const {
    const auto& cell = records_.at(record).values.at(attr);
    return cell ? parse_number(*cell) : std::nullopt;
  }

  std::vector<std::string> attribute_names() const {
    std::vector<std::string> out;
    out.reserve(attributes_.size());
    for (const auto& a : attributes_) out.push_back(a.name);
    return out;
  }
  std::vector<std::string> record_ids() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.id);
    return out;
  }

  // FNV-1a 64 over a canonical, delimiter-separated rendering of schema and
  // cells. Identical content loaded from csv or json hashes identically.
  std::string content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::string_view bytes) {
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& a : attributes_) {
      feed(a.name);
      feed("\x1f");
      feed(to_string(a.kind));
      feed("\x1e");
    }
    feed("\x1d");
    for (const auto& r : records_) {
      feed(r.id);
      for (const auto& v : r.values) {
        feed("\x1f");
        if (v) {
          feed("s");
          feed(*v);
        } else {
          feed("n");
        }
      }
      feed("\x1e");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  json to_json() const {
    json attrs = json::array();
    for (const auto& a : attributes_) {
      json j = {{"name", a.name}, {"kind", to_string(a.kind)}};
      if (a.description) j["description"] = *a.description;
      attrs.push_back(std::move(j));
    }
    json recs = json::array();
    for (const auto& r : records_) {
      json values = json::array();
      for (const auto& v : r.values) values.push_back(v ? json(*v) : json(nullptr));
      recs.push_back({{"id", r.id}, {"values", std::move(values)}});
    }
    return {{"attributes", std::move(attrs)}, {"records", std::move(recs)}};
  }

  static Dataset from_json(const json& j) {
    try {
      std::vector<AttributeDescriptor> attrs;
      for (const auto& a : j.at("attributes")) {
        AttributeDescriptor d{a.at("name").get<std::string>(),
                              parse_attribute_kind(a.at("kind").get<std::string>()), std::nullopt};
        if (a.contains("description")) d.description = a.at("description").get<std::string>();
        attrs.push_back(std::move(d));
      }
      std::vector<Record> recs;
      for (const auto& r : j.at("records")) {
        Record rec{r.at("id").get<std::string>(), {}};
        for (const auto& v : r.at("values")) {
          rec.values.push_back(v.is_null() ? Cell{} : Cell{v.get<std::string>()});
        }
        recs.push_back(std::move(rec));
      }
      return Dataset(std::move(attrs), std::move(recs));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::bad_input, std::string("malformed dataset document: ") + e.what());
    }
  }

 private:
  std::vector<AttributeDescriptor> attributes_;
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> attribute_index_;
  std::unordered_map<std::string, std::size_t> record_index_;
};

enum class DataFormat { csv, json_rows };

inline DataFormat parse_data_format(std::string_view text) {
  if (text == "csv") return DataFormat::csv;
  if (text == "json" || text == "json-rows") return DataFormat::json_rows;
  throw Error(ErrorCode::bad_input, "unknown dataset format '" + std::string(text) + "'");
}

// Schema sidecar: {"attribute": "numerical" | "categorical"}. An entry may
// also be an object {"kind": ..., "description": ...}.
struct SchemaEntry {
  std::optional<AttributeKind> kind;
  std::optional<std::string> description;
};
using SchemaOverrides = std::unordered_map<std::string, SchemaEntry>;

inline SchemaOverrides parse_schema_sidecar(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_input, std::string("schema sidecar is not json: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::bad_input, "schema sidecar must be a json object");
  SchemaOverrides out;
  for (const auto& [name, entry] : j.items()) {
    SchemaEntry parsed;
    if (entry.is_string()) {
      parsed.kind = parse_attribute_kind(entry.get<std::string>());
    } else if (entry.is_object()) {
      if (auto it = entry.find("kind"); it != entry.end()) {
        if (!it->is_string()) throw Error(ErrorCode::bad_input, "schema kind for '" + name + "' must be a string");
        parsed.kind = parse_attribute_kind(it->get<std::string>());
      }
      if (auto it = entry.find("description"); it != entry.end()) {
        if (!it->is_string()) throw Error(ErrorCode::bad_input, "description for '" + name + "' must be a string");
        parsed.description = it->get<std::string>();
      }
    } else {
      throw Error(ErrorCode::bad_input, "schema entry for '" + name + "' must be a string or object");
    }
    out[name] = std::move(parsed);
  }
  return out;
}

namespace detail {

// Columnar intermediate shared by both loaders.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline Dataset build_dataset(RawTable table, const SchemaOverrides& schema) {
  if (table.columns.empty()) throw Error(ErrorCode::bad_input, "dataset has no columns");
  if (table.rows.empty()) throw Error(ErrorCode::bad_input, "dataset has no records");

  std::vector<AttributeDescriptor> attrs;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    bool any_value = false;
    bool all_numeric = true;
    for (const auto& row : table.rows) {
      if (!row[c]) continue;
      any_value = true;
      if (!parse_number(*row[c])) {
        all_numeric = false;
        break;
      }
    }
    auto kind = any_value && all_numeric ? AttributeKind::numerical : AttributeKind::categorical;
    attrs.push_back({table.columns[c], kind, std::nullopt});
  }
  for (const auto& [name, entry] : schema) {
    auto it = std::find(table.columns.begin(), table.columns.end(), name);
    if (it == table.columns.end()) {
      throw Error(ErrorCode::unknown_entity, "schema names unknown attribute '" + name + "'");
    }
    auto& attr = attrs[static_cast<std::size_t>(it - table.columns.begin())];
    if (entry.kind) attr.kind = *entry.kind;
    if (entry.description) attr.description = entry.description;
  }

  std::optional<std::size_t> id_col;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c] == "id") id_col = c;
  }

  std::vector<Record> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Record rec;
    if (id_col) {
      const auto& cell = table.rows[r][*id_col];
      if (!cell || cell->empty()) throw Error(ErrorCode::bad_input, "row " + std::to_string(r) + ": missing id");
      rec.id = *cell;
    } else {
      rec.id = "r" + std::to_string(r);
    }
    rec.values = std::move(table.rows[r]);
    records.push_back(std::move(rec));
  }
  return Dataset(std::move(attrs), std::move(records));
}

inline RawTable read_csv(std::string_view bytes) {
  auto rows = csv::parse(bytes);
  if (rows.empty()) throw Error(ErrorCode::bad_input, "csv has no header row");
  RawTable table;
  for (auto& f : rows.front()) table.columns.push_back(std::move(f.text));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.columns.size()) {
      throw Error(ErrorCode::bad_input, "malformed csv at row " + std::to_string(r - 1) + ": expected " +
                                            std::to_string(table.columns.size()) + " fields, got " +
                                            std::to_string(rows[r].size()));
    }
    std::vector<Cell> cells;
    cells.reserve(rows[r].size());
    for (auto& f : rows[r]) {
      cells.push_back(f.text.empty() && !f.quoted ? Cell{} : Cell{std::move(f.text)});
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

inline RawTable read_json_rows(std::string_view bytes) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(bytes);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_input, std::string("dataset is not valid json: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::bad_input, "json dataset must be an array of objects");

  RawTable table;
  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    if (!doc[r].is_object()) throw Error(ErrorCode::bad_input, "row " + std::to_string(r) + ": not an object");
    for (const auto& [key, _] : doc[r].items()) {
      (void)_;
      if (col_index.emplace(key, table.columns.size()).second) table.columns.push_back(key);
    }
  }
  // Columns follow first appearance across rows.
  for (std::size_t r = 0; r < doc.size(); ++r) {
    std::vector<Cell> cells(table.columns.size());
    for (const auto& [key, value] : doc[r].items()) {
      auto& cell = cells[col_index.at(key)];
      if (value.is_null()) continue;
      if (value.is_string()) {
        cell = value.get<std::string>();
      } else if (value.is_number() || value.is_boolean()) {
        cell = value.dump();
      } else {
        throw Error(ErrorCode::bad_input, "row " + std::to_string(r) + ": attribute '" + key + "' is not a scalar");
      }
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace detail

// Loads csv or a json array-of-objects. Kinds are inferred (every non-null
// value a finite real -> numerical, else categorical) and then overridden by
// `schema`. Record ids come from an `id` column when present, else r0, r1, ...
inline Dataset load_dataset(std::string_view bytes, DataFormat format, const SchemaOverrides& schema = {}) {
  auto table = format == DataFormat::csv ? detail::read_csv(bytes) : detail::read_json_rows(bytes);
  return detail::build_dataset(std::move(table), schema);
}

}  // namespace provlens
