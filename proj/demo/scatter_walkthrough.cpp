// Walks through the scatterplot scenario on the movies dataset: map Running
// Time to x and IMDB Rating to y, then hover Godzilla and Kingpin. Prints
// both score tables and writes the session log for the CLI.
//
//   scatter_walkthrough demo/movies.csv [out.log]

#include <fstream>
#include <iostream>
#include <sstream>

#include "provlens/provlens.hpp"

int main(int argc, char** argv) {
  using namespace provlens;
  if (argc < 2) {
    std::cerr << "usage: scatter_walkthrough movies.csv [out.log]\n";
    return 2;
  }
  std::ifstream in(argv[1], std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();

  try {
    auto dataset = std::make_shared<const Dataset>(load_dataset(buf.str(), DataFormat::csv));
    SessionState session("scatter", SessionMode::edit, dataset);

    const std::int64_t t0 = 1700000000000;
    ingest(session, {.kind = "encode-assign", .timestamp_ms = t0, .attributes = {"Running Time"}, .channel = "x"});
    ingest(session, {.kind = "encode-assign", .timestamp_ms = t0 + 4000, .attributes = {"IMDB Rating"}, .channel = "y"});
    ingest(session, {.kind = "record-hover", .timestamp_ms = t0 + 9000, .records = {"m01"}, .dwell_ms = 800});
    ingest(session, {.kind = "record-hover", .timestamp_ms = t0 + 12000, .records = {"m02"}, .dwell_ms = 650});

    for (auto scope : {Scope::attributes, Scope::records}) {
      std::cout << to_string(scope) << ":\n";
      for (const auto& row : score_table(session.ledger, scope).rows()) {
        if (!row.interacted()) continue;
        std::cout << "  " << row.entity << "  frequency=" << row.frequency << "  recency=" << row.recency << "\n";
      }
    }
    if (argc > 2) {
      std::ofstream out(argv[2], std::ios::binary | std::ios::trunc);
      out << export_log(session);
      std::cout << "log written to " << argv[2] << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
