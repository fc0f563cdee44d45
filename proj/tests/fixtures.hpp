#pragma once

// Shared test data: a small movies table and random event streams.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "provlens/provlens.hpp"

namespace provlens::fx {

inline constexpr const char* kMoviesCsv =
    "id,Title,Genre,Release Year,Running Time,IMDB Rating,Production Budget,Worldwide Gross\n"
    "godzilla,Godzilla,Action,1998,139,5.4,125000000,376000000\n"
    "kingpin,Kingpin,Comedy,1996,113,6.9,25000000,32000000\n"
    "titanic,Titanic,Drama,1997,194,7.9,200000000,2186000000\n"
    "ryan,Saving Private Ryan,Drama,1998,169,8.6,70000000,481840909\n"
    "button,The Curious Case of Benjamin Button,Drama,2008,166,7.8,160000000,333932083\n"
    "matrix,The Matrix,Action,1999,136,8.7,63000000,460279930\n"
    "speed,Speed,Action,1994,116,7.2,30000000,350448145\n"
    "mummy,The Mummy,Adventure,1999,124,7.0,80000000,415933406\n"
    "toystory,Toy Story,Adventure,1995,81,8.3,30000000,361958736\n"
    "fargo,Fargo,Thriller,1996,98,8.1,7000000,60611975\n";

inline std::shared_ptr<const Dataset> movies() {
  static const auto ds = std::make_shared<const Dataset>(load_dataset(kMoviesCsv, DataFormat::csv));
  return ds;
}

inline constexpr std::int64_t kT0 = 1700000000000;

inline RawAction encode(std::string attr, std::int64_t t) {
  RawAction a;
  a.kind = "encode-assign";
  a.timestamp_ms = t;
  a.attributes = {std::move(attr)};
  return a;
}

inline RawAction hover(std::string record, std::int64_t t, std::int64_t dwell = 500) {
  RawAction a;
  a.kind = "record-hover";
  a.timestamp_ms = t;
  a.records = {std::move(record)};
  a.dwell_ms = dwell;
  return a;
}

inline RawAction aggregate_hover(std::vector<std::string> records, std::int64_t t, std::int64_t dwell = 500) {
  RawAction a;
  a.kind = "record-hover";
  a.timestamp_ms = t;
  a.records = std::move(records);
  a.dwell_ms = dwell;
  a.aggregate = true;
  return a;
}

// Encode Running Time -> x, IMDB Rating -> y, hover Godzilla, hover Kingpin.
inline std::vector<RawAction> scatter_actions() {
  return {encode("Running Time", kT0), encode("IMDB Rating", kT0 + 3000), hover("godzilla", kT0 + 8000),
          hover("kingpin", kT0 + 11000)};
}

inline SessionState scatter_session() {
  SessionState s("scatter", SessionMode::edit, movies());
  for (const auto& a : scatter_actions()) ingest(s, a);
  return s;
}

// Attribute interactions reproducing the attribute-glyph ordering: Title 6,
// Worldwide Gross 5, Production Budget 4, Genre 3, then id, Release Year and
// Running Time once each. Interleaved so counts and recency disagree.
inline SessionState glyph_session() {
  SessionState s("glyph", SessionMode::edit, movies());
  const std::vector<std::pair<std::string, int>> counts = {
      {"Title", 6}, {"Worldwide Gross", 5}, {"Production Budget", 4}, {"Genre", 3},
      {"id", 1},    {"Release Year", 1},    {"Running Time", 1}};
  std::vector<std::string> order;
  for (int round = 0; round < 6; ++round) {
    for (const auto& [name, n] : counts) {
      if (round < n) order.push_back(name);
    }
  }
  std::reverse(order.begin(), order.end());
  std::int64_t t = kT0;
  for (const auto& name : order) ingest(s, encode(name, t += 1000));
  return s;
}

// A synthetic dataset with `attrs` attributes a0.. and `records` records r0..
inline std::shared_ptr<const Dataset> synthetic_dataset(std::size_t attrs, std::size_t records) {
  std::vector<AttributeDescriptor> descs;
  for (std::size_t a = 0; a < attrs; ++a) {
    descs.push_back({"a" + std::to_string(a), a % 2 ? AttributeKind::categorical : AttributeKind::numerical, {}});
  }
  std::vector<Record> recs;
  for (std::size_t r = 0; r < records; ++r) {
    Record rec{"r" + std::to_string(r), {}};
    for (std::size_t a = 0; a < attrs; ++a) {
      rec.values.push_back(a % 2 ? Cell{"c" + std::to_string((r + a) % 3)} : Cell{std::to_string(r * 10 + a)});
    }
    recs.push_back(std::move(rec));
  }
  return std::make_shared<const Dataset>(std::move(descs), std::move(recs));
}

struct RandomStream {
  std::shared_ptr<const Dataset> dataset;
  std::vector<InteractionEvent> events;
};

// Random valid event stream: mixed attribute events, unit hovers, and
// aggregate hovers; timestamps non-decreasing with occasional repeats.
inline RandomStream random_stream(std::mt19937_64& rng, std::size_t max_events = 200, std::size_t max_attrs = 10,
                                  std::size_t max_records = 50) {
  auto pick = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  RandomStream out;
  const auto n_attrs = pick(1, max_attrs);
  const auto n_records = pick(1, max_records);
  out.dataset = synthetic_dataset(n_attrs, n_records);
  const auto n_events = pick(0, max_events);
  std::int64_t t = kT0;
  const EventKind attr_kinds[] = {EventKind::attribute_inspect, EventKind::encode_assign, EventKind::filter_apply,
                                  EventKind::sort_apply};
  for (std::size_t i = 0; i < n_events; ++i) {
    t += static_cast<std::int64_t>(pick(0, 3) == 0 ? 0 : pick(1, 5000));
    InteractionEvent e;
    e.seq = i + 1;
    e.timestamp_ms = t;
    if (pick(0, 1) == 0) {
      e.kind = attr_kinds[pick(0, 3)];
      e.attribute_targets = {"a" + std::to_string(pick(0, n_attrs - 1))};
    } else {
      e.kind = pick(0, 1) ? EventKind::record_hover : EventKind::table_row_hover;
      e.dwell_ms = static_cast<std::int64_t>(pick(250, 3000));
      if (pick(0, 2) == 0) {
        e.aggregate = true;
        std::vector<std::string> ids;
        for (std::size_t r = 0; r < n_records; ++r) {
          if (pick(0, 2) == 0) ids.push_back("r" + std::to_string(r));
        }
        if (ids.empty()) ids.push_back("r0");
        std::sort(ids.begin(), ids.end());
        e.record_targets = std::move(ids);
      } else {
        e.record_targets = {"r" + std::to_string(pick(0, n_records - 1))};
      }
    }
    out.events.push_back(std::move(e));
  }
  return out;
}

// Random session built from raw actions, so thresholds and fan-out apply.
inline SessionState random_session(std::mt19937_64& rng, int index) {
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const Strategy strategy{static_cast<Mode>(pick(0, 2)), static_cast<Mode>(pick(0, 2))};
  SessionState s("s" + std::to_string(index), SessionMode::edit, movies(), strategy, pick(0, 500));
  const auto attrs = movies()->attribute_names();
  const auto ids = movies()->record_ids();
  std::int64_t t = kT0;
  const int n = pick(0, 60);
  for (int i = 0; i < n; ++i) {
    t += pick(0, 4000);
    switch (pick(0, 3)) {
      case 0: ingest(s, encode(attrs[pick(0, static_cast<int>(attrs.size()) - 1)], t)); break;
      case 1: ingest(s, hover(ids[pick(0, static_cast<int>(ids.size()) - 1)], t, pick(0, 1000))); break;
      case 2: {
        RawAction a = aggregate_hover({}, t, pick(0, 1000));
        a.group = {{"Genre", std::vector<std::string>{"Action", "Drama", "Adventure"}[pick(0, 2)]}};
        ingest(s, a);
        break;
      }
      default: {
        RawAction a = encode(attrs[pick(0, static_cast<int>(attrs.size()) - 1)], t);
        a.kind = "sort-apply";
        a.phase = pick(0, 1) ? "commit" : "drag";
        ingest(s, a);
      }
    }
  }
  return s;
}

}  // namespace provlens::fx
