// provlens: serve, replay, audit and export interaction provenance.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "provlens/provlens.hpp"
#include "provlens/service.hpp"

namespace {

using namespace provlens;

constexpr int kUsageError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Inputs {
  std::string dataset_path;
  std::string dataset_format;
  std::string schema_path;
  std::string log_path;
  bool allow_hash_mismatch = false;

  void add_to(CLI::App* cmd, bool log_required = true) {
    cmd->add_option("--dataset", dataset_path, "dataset file (csv or json rows)")->required();
    cmd->add_option("--dataset-format", dataset_format, "csv | json (default: by extension)");
    cmd->add_option("--schema", schema_path, "schema sidecar json");
    auto* log = cmd->add_option("--log", log_path, "exported provenance log (jsonl)");
    if (log_required) log->required();
    cmd->add_flag("--allow-hash-mismatch", allow_hash_mismatch, "import a log recorded against another dataset");
  }

  std::shared_ptr<const Dataset> dataset() const {
    DataFormat format = DataFormat::csv;
    if (!dataset_format.empty()) {
      format = parse_data_format(dataset_format);
    } else if (dataset_path.size() >= 5 && dataset_path.substr(dataset_path.size() - 5) == ".json") {
      format = DataFormat::json_rows;
    }
    SchemaOverrides schema;
    if (!schema_path.empty()) schema = parse_schema_sidecar(read_file(schema_path));
    return std::make_shared<const Dataset>(load_dataset(read_file(dataset_path), format, schema));
  }

  SessionState session() const {
    auto ds = dataset();
    if (log_path.empty()) return SessionState("cli", SessionMode::view, ds);
    std::vector<std::string> warnings;
    auto state = import_log(read_file(log_path), ds, SessionMode::view, {allow_hash_mismatch, &warnings});
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return state;
  }
};

void print_table(const ScoreTable& table, const std::string& format) {
  if (format == "json") {
    std::cout << table.to_json().dump(2) << "\n";
    return;
  }
  auto rank = [](const std::optional<std::uint64_t>& r) { return r ? std::to_string(*r) : std::string(); };
  if (format == "csv") {
    std::cout << "entity,frequency,recency,rank_frequency,rank_recency\n";
    for (const auto& r : table.rows()) {
      std::cout << csv::escape(r.entity) << ',' << fmt6(r.frequency) << ',' << fmt6(r.recency) << ','
                << rank(r.rank_frequency) << ',' << rank(r.rank_recency) << "\n";
    }
    return;
  }
  std::size_t width = 6;
  for (const auto& r : table.rows()) width = std::max(width, r.entity.size());
  std::printf("%-*s  %9s  %9s  %6s  %6s\n", static_cast<int>(width), "entity", "frequency", "recency", "rank_f",
              "rank_r");
  for (const auto& r : table.rows()) {
    std::printf("%-*s  %9s  %9s  %6s  %6s\n", static_cast<int>(width), r.entity.c_str(), fmt6(r.frequency).c_str(),
                fmt6(r.recency).c_str(), rank(r.rank_frequency).c_str(), rank(r.rank_recency).c_str());
  }
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"provlens: interaction provenance as data attributes"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  int port = 8080;
  std::string host = "0.0.0.0";
  std::string data_dir;
  std::int64_t serve_dwell = kDefaultDwellThresholdMs;
  if (auto p = env("PROVLENS_PORT")) port = std::atoi(p->c_str());
  if (auto d = env("PROVLENS_DATA_DIR")) data_dir = *d;
  if (auto d = env("PROVLENS_DWELL_MS")) serve_dwell = std::atoll(d->c_str());
  serve->add_option("--port", port, "listen port (env PROVLENS_PORT)");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--data-dir", data_dir, "session persistence directory (env PROVLENS_DATA_DIR)");
  serve->add_option("--dwell-ms", serve_dwell, "default dwell threshold (env PROVLENS_DWELL_MS)");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "rebuild and print a score table from a log");
  Inputs replay_in;
  replay_in.add_to(replay_cmd);
  std::string strategy = "rel";
  std::string scope = "records";
  std::string format = "table";
  std::optional<std::int64_t> rethreshold;
  replay_cmd->add_option("--strategy", strategy, "rel|abs|bin, or freq,recency pair")->capture_default_str();
  replay_cmd->add_option("--scope", scope, "attrs|records")->capture_default_str();
  replay_cmd->add_option("--format", format, "table|json|csv")->check(CLI::IsMember({"table", "json", "csv"}));
  replay_cmd->add_option("--dwell-ms", rethreshold, "re-apply a stricter dwell threshold");

  // augment
  auto* augment = app.add_subcommand("augment", "write the dataset with frequency/recency columns");
  Inputs augment_in;
  augment_in.add_to(augment);
  std::string out_path;
  std::string augment_strategy = "rel";
  augment->add_option("--out", out_path, "output csv (default: stdout)");
  augment->add_option("--strategy", augment_strategy, "rel|abs|bin, or freq,recency pair");

  // query
  auto* query = app.add_subcommand("query", "exact top-N entities by provenance rank");
  Inputs query_in;
  query_in.add_to(query);
  std::size_t top = 0;
  std::string metric = "recency";
  std::string query_scope = "records";
  std::string query_strategy = "rel";
  std::string query_format = "table";
  query->add_option("--top", top, "N")->required()->check(CLI::PositiveNumber);
  query->add_option("--metric", metric, "frequency|recency")->check(CLI::IsMember({"frequency", "recency"}));
  query->add_option("--scope", query_scope, "attrs|records");
  query->add_option("--strategy", query_strategy, "rel|abs|bin, or freq,recency pair");
  query->add_option("--format", query_format, "table|json")->check(CLI::IsMember({"table", "json"}));

  // spec
  auto* spec_cmd = app.add_subcommand("spec", "validate a VisSpec and emit bound data");
  Inputs spec_in;
  spec_in.add_to(spec_cmd, false);
  std::string spec_path;
  std::string spec_strategy = "rel";
  spec_cmd->add_option("--file", spec_path, "VisSpec json")->required();
  spec_cmd->add_option("--strategy", spec_strategy, "rel|abs|bin, or freq,recency pair");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*serve) {
      service::Config config;
      config.default_dwell_ms = serve_dwell;
      if (!data_dir.empty()) config.data_dir = data_dir;
      config.bearer_token = env("PROVLENS_TOKEN");
      service::ProvenanceService svc(config);
      httplib::Server server;
      service::mount(server, svc);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "provlens listening on http://" << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      svc.shutdown();
      return 0;
    }

    if (*replay_cmd) {
      auto state = replay_in.session();
      const auto strat = parse_strategy(strategy);
      const auto s = parse_scope(scope);
      if (rethreshold) {
        print_table(score_table(replay(state.event_log, state.dataset, *rethreshold), s, strat), format);
      } else {
        print_table(score_table(state.ledger, s, strat), format);
      }
      return 0;
    }

    if (*augment) {
      auto state = augment_in.session();
      const auto csv_text = augmented_table(state.ledger, parse_strategy(augment_strategy)).to_csv();
      if (out_path.empty()) {
        std::cout << csv_text;
      } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        out << csv_text;
        if (!out) throw Error(ErrorCode::bad_input, "cannot write '" + out_path + "'");
      }
      return 0;
    }

    if (*query) {
      auto state = query_in.session();
      const auto s = parse_scope(query_scope);
      const auto table = score_table(state.ledger, s, parse_strategy(query_strategy));
      const auto ids = top_n(state.ledger.entities(s), table, *parse_metric(metric), top);
      if (query_format == "json") {
        std::cout << json(ids).dump() << "\n";
      } else {
        for (const auto& id : ids) std::cout << id << "\n";
      }
      return 0;
    }

    if (*spec_cmd) {
      auto state = spec_in.session();
      json spec_json;
      try {
        spec_json = json::parse(read_file(spec_path));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::bad_spec, std::string("spec file is not json: ") + e.what());
      }
      const auto spec = vis_spec_from_json(spec_json, *state.dataset);
      std::cout << bind_data(spec, augmented_table(state.ledger, parse_strategy(spec_strategy))).dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}
