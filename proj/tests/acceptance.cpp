// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <thread>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "provlens/service.hpp"

using namespace provlens;
using namespace provlens::fx;

namespace {

constexpr double kTol = 1e-9;
constexpr Mode kModes[] = {Mode::relative, Mode::absolute, Mode::binary};

int mode_index(Mode m) { return m == Mode::relative ? 0 : m == Mode::absolute ? 1 : 2; }

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
  void expect(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool near(double a, double b) { return std::fabs(a - b) <= kTol; }

Outcome scatter_golden() {
  Outcome o;
  const auto t0 = Clock::now();
  auto s = scatter_session();
  auto attrs = score_table(s.ledger, Scope::attributes);
  auto recs = score_table(s.ledger, Scope::records);
  const double elapsed = seconds_since(t0);

  const std::map<std::string, std::pair<double, double>> want_attrs = {{"Running Time", {1.0, 0.5}},
                                                                       {"IMDB Rating", {1.0, 1.0}}};
  const std::map<std::string, std::pair<double, double>> want_recs = {{"godzilla", {1.0, 0.5}},
                                                                      {"kingpin", {1.0, 1.0}}};
  for (const auto& [table, want] : {std::pair{&attrs, &want_attrs}, std::pair{&recs, &want_recs}}) {
    for (const auto& row : table->rows()) {
      auto it = want->find(row.entity);
      const auto expected = it == want->end() ? std::pair{0.0, 0.0} : it->second;
      o.expect(near(row.frequency, expected.first) && near(row.recency, expected.second),
               row.entity + " scored (" + std::to_string(row.frequency) + ", " + std::to_string(row.recency) + ")");
    }
  }
  o.expect(elapsed < 1.0, "took " + std::to_string(elapsed) + " s");
  if (o.pass) o.detail = "runtime " + std::to_string(elapsed * 1000.0) + " ms";
  return o;
}

Outcome aggregate_fanout() {
  Outcome o;
  SessionState bar("bar", SessionMode::edit, movies());
  const std::vector<std::string> five = {"godzilla", "matrix", "speed", "mummy", "toystory"};
  ingest(bar, aggregate_hover(five, kT0));
  for (const auto& id : five) {
    o.expect(near(bar.ledger.record_entries().at(id).units, 0.2), id + " did not get 0.2 units");
  }

  std::mt19937_64 rng(1000);
  auto ds = synthetic_dataset(3, 50);
  ProvenanceLedger l(ds);
  double worst = 0.0;
  for (std::uint64_t i = 1; i <= 1000; ++i) {
    InteractionEvent e;
    e.seq = i;
    e.timestamp_ms = kT0 + static_cast<std::int64_t>(i);
    e.kind = EventKind::record_hover;
    e.dwell_ms = 300;
    e.aggregate = true;
    const auto n = std::uniform_int_distribution<int>(1, 50)(rng);
    std::vector<std::string> ids;
    for (int r = 0; r < 50; ++r) ids.push_back("r" + std::to_string(r));
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(static_cast<std::size_t>(n));
    std::sort(ids.begin(), ids.end());
    e.record_targets = ids;

    std::map<std::string, double> before;
    for (const auto& id : ids) {
      const auto* entry = l.scope(Scope::records).find(id);
      before[id] = entry ? entry->units : 0.0;
    }
    l.apply(e);
    double added = 0.0;
    for (const auto& id : ids) added += l.record_entries().at(id).units - before[id];
    worst = std::max(worst, std::fabs(added - 1.0));
  }
  o.expect(worst <= kTol, "worst per-event deviation " + std::to_string(worst));
  if (o.pass) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "1000 events, max |sum-1| = %.2e", worst);
    o.detail = buf;
  }
  return o;
}

Outcome glyph_sort_filter() {
  Outcome o;
  auto s = glyph_session();
  auto table = score_table(s.ledger, Scope::attributes);
  const auto all = s.ledger.entities(Scope::attributes);
  auto sorted = sort_entities(all, table, Metric::frequency, Direction::desc);
  o.expect(!sorted.empty() && sorted.front() == "Title", "sort did not put Title first");
  o.expect(sorted.size() >= 3 && sorted[1] == "Worldwide Gross" && sorted[2] == "Production Budget",
           "sort order after Title is wrong");
  auto kept = filter_entities(all, table, Metric::frequency, {0.5, 1.0});
  const std::set<std::string> want = {"Title", "Worldwide Gross", "Production Budget", "Genre"};
  o.expect(std::set<std::string>(kept.begin(), kept.end()) == want && kept.size() == 4,
           "filter kept " + std::to_string(kept.size()) + " attributes");
  if (o.pass) o.detail = "sort head Title; filter kept 4";
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(500);
  std::size_t checks = 0;
  for (int trial = 0; trial < 500 && o.pass; ++trial) {
    auto stream = random_stream(rng, 200, 10, 50);
    ProvenanceLedger l(stream.dataset);
    std::vector<InteractionEvent> prefix;
    for (std::size_t i = 0; i < stream.events.size() && o.pass; ++i) {
      l.apply(stream.events[i]);
      prefix.push_back(stream.events[i]);
      const Scope touched = scope_of(stream.events[i].kind);
      const bool last = i + 1 == stream.events.size();
      for (Scope s : {Scope::attributes, Scope::records}) {
        if (s != touched && !last) continue;
        const auto all = l.entities(s);
        const auto stats = oracle::scan(prefix, s);
        for (Mode fm : kModes) {
          for (Mode rm : kModes) {
            const auto of = oracle::frequency(stats, all, mode_index(fm));
            const auto orr = oracle::recency(stats, all, mode_index(rm));
            if (!last) {
              const auto f = frequency_scores(l, s, fm);
              const auto r = recency_scores(l, s, rm);
              for (const auto& name : all) {
                ++checks;
                if (!near(f.at(name), of.at(name)) || !near(r.at(name), orr.at(name))) {
                  o.fail("stream " + std::to_string(trial) + " event " + std::to_string(i) + " entity " + name);
                }
              }
              continue;
            }
            const auto table = score_table(l, s, {fm, rm});
            const auto rf = oracle::ranks(stats, of);
            const auto rr = oracle::ranks(stats, orr);
            for (const auto& row : table.rows()) {
              ++checks;
              const auto itf = rf.find(row.entity);
              const auto itr = rr.find(row.entity);
              const bool ranks_ok = row.rank_frequency == (itf == rf.end() ? std::nullopt : std::optional(itf->second)) &&
                                    row.rank_recency == (itr == rr.end() ? std::nullopt : std::optional(itr->second));
              if (!near(row.frequency, of.at(row.entity)) || !near(row.recency, orr.at(row.entity)) || !ranks_ok) {
                o.fail("stream " + std::to_string(trial) + " final table, entity " + row.entity);
              }
            }
          }
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  o.expect(elapsed < 30.0, "took " + std::to_string(elapsed) + " s");
  if (o.pass) o.detail = std::to_string(checks) + " score checks in " + std::to_string(elapsed) + " s";
  return o;
}

Outcome relative_recency_law() {
  Outcome o;
  std::mt19937_64 rng(480);
  for (int trial = 0; trial < 500 && o.pass; ++trial) {
    auto stream = random_stream(rng);
    auto l = replay(stream.events, stream.dataset);
    for (Scope s : {Scope::attributes, Scope::records}) {
      const auto& sl = l.scope(s);
      if (sl.event_count == 0) continue;
      const auto rec = recency_scores(l, s, Mode::relative);
      for (const auto& [name, entry] : sl.entries) {
        const auto rank = entry.last_touch().scope_rank;
        if (rank == sl.event_count && rec.at(name) != 1.0) o.fail(name + " stamped last but scored " + std::to_string(rec.at(name)));
        for (const auto& [other, oe] : sl.entries) {
          const auto orank = oe.last_touch().scope_rank;
          if ((rank < orank) != (rec.at(name) < rec.at(other))) o.fail("order of " + name + " and " + other);
        }
      }
    }
  }
  if (o.pass) o.detail = "500 streams";
  return o;
}

Outcome round_trip() {
  Outcome o;
  std::mt19937_64 rng(100);
  std::size_t events = 0;
  for (int i = 0; i < 100 && o.pass; ++i) {
    auto s = random_session(rng, i);
    events += s.event_log.size();
    const auto first = export_log(s);
    auto imported = import_log(first, movies(), SessionMode::view);
    o.expect(export_log(imported) == first, "session " + std::to_string(i) + " export differs");
    for (Scope sc : {Scope::attributes, Scope::records}) {
      for (Mode fm : kModes) {
        for (Mode rm : kModes) {
          o.expect(score_table(imported.ledger, sc, {fm, rm}).to_json() == score_table(s.ledger, sc, {fm, rm}).to_json(),
                   "session " + std::to_string(i) + " tables differ");
        }
      }
    }
  }
  if (o.pass) o.detail = "100 sessions, " + std::to_string(events) + " events";
  return o;
}

Outcome top_n_cardinality() {
  Outcome o;
  std::mt19937_64 rng(1001);
  std::size_t tied_tables = 0;
  for (int trial = 0; trial < 1000 && o.pass; ++trial) {
    // Aggregate-heavy streams under binary or relative modes tie often.
    auto stream = random_stream(rng, 60, 6, 20);
    auto l = replay(stream.events, stream.dataset);
    const Scope scope = trial % 2 ? Scope::records : Scope::attributes;
    const Strategy strategy{kModes[trial % 3], kModes[(trial / 3) % 3]};
    const Metric metric = trial % 4 < 2 ? Metric::frequency : Metric::recency;
    const auto table = score_table(l, scope, strategy);
    const auto all = l.entities(scope);
    const auto stats = oracle::scan(stream.events, scope);
    std::map<std::string, double> score;
    std::set<double> distinct;
    for (const auto& row : table.rows()) {
      score[row.entity] = row.score(metric);
      if (row.interacted()) distinct.insert(row.score(metric));
    }
    if (distinct.size() < stats.touched.size()) ++tied_tables;
    const auto ranks = oracle::ranks(stats, score);
    std::vector<std::string> by_rank(ranks.size());
    for (const auto& [name, rank] : ranks) by_rank[rank - 1] = name;
    const auto n = std::uniform_int_distribution<std::size_t>(1, all.size() + 2)(rng);
    const auto top = top_n(all, table, metric, n);
    o.expect(top.size() == std::min(n, stats.touched.size()),
             "trial " + std::to_string(trial) + ": got " + std::to_string(top.size()));
    o.expect(std::equal(top.begin(), top.end(), by_rank.begin()), "trial " + std::to_string(trial) + " order");
  }
  if (o.pass) o.detail = "1000 trials, " + std::to_string(tied_tables) + " with tied scores";
  return o;
}

Outcome dwell_gate() {
  Outcome o;
  std::string pattern;
  for (std::int64_t dwell : {100, 249, 250, 400}) {
    SessionState s("dwell", SessionMode::edit, movies(), {}, 250);
    ingest(s, hover("godzilla", kT0, dwell));
    pattern += s.event_log.empty() ? "no " : "yes ";
  }
  pattern.pop_back();
  o.expect(pattern == "no no yes yes", "pattern was " + pattern);
  o.detail = pattern;
  return o;
}

Outcome scale_properties() {
  Outcome o;
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000 && o.pass; ++trial) {
    std::vector<double> v(1 + rng() % 50);
    for (auto& x : v) x = u(rng);
    ChannelBinding b;
    b.channel = static_cast<Channel>(rng() % 11);
    b.field = "frequency";
    b.reverse = true;
    const auto once = resolve_scale(b, v);
    const auto twice = resolve_scale(b, once);
    for (std::size_t i = 0; i < v.size(); ++i) {
      o.expect(std::fabs(twice[i] - v[i]) <= 1e-15, "involution broke at trial " + std::to_string(trial));
    }
    const auto argmax = std::max_element(v.begin(), v.end()) - v.begin();
    o.expect(std::min_element(once.begin(), once.end()) - once.begin() == argmax,
             "reversed extremum moved at trial " + std::to_string(trial));
    b.reverse = false;
    const auto plain = resolve_scale(b, v);
    o.expect(std::max_element(plain.begin(), plain.end()) - plain.begin() == argmax, "identity scale moved argmax");
  }
  if (o.pass) o.detail = "1000 vectors";
  return o;
}

Outcome service_contract() {
  Outcome o;
  service::ProvenanceService svc;
  httplib::Server server;
  service::mount(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(10, 0);
  auto session = [&](const std::string& mode) {
    auto r = c.Post("/sessions", json{{"mode", mode}}.dump(), "application/json");
    const std::string id = json::parse(r->body).at("session_id");
    c.Post("/sessions/" + id + "/dataset?format=csv", kMoviesCsv, "text/csv");
    return id;
  };

  const auto view = session("view");
  auto rejected = c.Post("/sessions/" + view + "/events", json::array({to_json(hover("godzilla", kT0))}).dump(),
                         "application/json");
  o.expect(rejected && rejected->status == 409, "view-mode post returned " +
                                                    std::to_string(rejected ? rejected->status : -1));

  constexpr int kEvents = 500;
  const auto edit = session("edit");
  std::string received;
  std::mutex mu;
  std::atomic<bool> ready{false};
  std::thread reader([&] {
    httplib::Client sc("127.0.0.1", port);
    sc.set_read_timeout(10, 0);
    sc.Get("/sessions/" + edit + "/stream", [&](const char* data, std::size_t len) {
      std::lock_guard lock(mu);
      received.append(data, len);
      ready = true;
      return std::count(received.begin(), received.end(), '\n') < 4 * (kEvents + 1);
    });
  });
  const auto wait_start = Clock::now();
  while (!ready && seconds_since(wait_start) < 10) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  const auto ids = movies()->record_ids();
  std::size_t accepted = 0;
  for (int i = 0; i < kEvents; i += 25) {
    json batch = json::array();
    for (int k = i; k < i + 25; ++k) {
      batch.push_back(to_json(k % 7 == 3 ? aggregate_hover({ids[k % ids.size()], ids[(k + 1) % ids.size()]}, kT0 + k)
                                         : hover(ids[k % ids.size()], kT0 + k)));
    }
    auto r = c.Post("/sessions/" + edit + "/events", batch.dump(), "application/json");
    if (r && r->status == 200) accepted += json::parse(r->body).at("accepted").get<std::size_t>();
  }
  reader.join();
  svc.shutdown();
  server.stop();
  listener.join();

  o.expect(accepted == kEvents, "accepted " + std::to_string(accepted));
  std::vector<std::uint64_t> seqs;
  std::size_t pos = 0;
  while ((pos = received.find("event: score", pos)) != std::string::npos) {
    const auto id_start = received.rfind("id: ", pos);
    seqs.push_back(std::stoull(received.substr(id_start + 4, pos - id_start - 5)));
    pos += 12;
  }
  o.expect(seqs.size() == kEvents, "stream delivered " + std::to_string(seqs.size()) + " score messages");
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    o.expect(seqs[i] == i + 1, "gap at message " + std::to_string(i));
  }
  if (o.pass) o.detail = "409 on view post; 500/500 messages, seq 1..500";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"scatterplot golden case (4 events, exact to 1e-9, < 1 s)", scatter_golden},
      {"aggregate fan-out (0.2 per record; per-event total 1 +/- 1e-9 over 1000 events)", aggregate_fanout},
      {"attribute glyph sort/filter golden cases", glyph_sort_filter},
      {"oracle equivalence (500 streams x 9 strategies, 1e-9, < 30 s)", oracle_equivalence},
      {"relative-recency law", relative_recency_law},
      {"export/import round trip (100 sessions)", round_trip},
      {"top-N cardinality under ties (1000 trials)", top_n_cardinality},
      {"dwell gate 100/249/250/400 ms at 250 ms", dwell_gate},
      {"scale reverse involution and argmax invariance (1000 vectors)", scale_properties},
      {"service contract (409 on view post; gap-free 500-event stream)", service_contract},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s  %s  [%s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
