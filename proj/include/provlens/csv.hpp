#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "provlens/error.hpp"

namespace provlens::csv {

// One parsed field. `quoted` distinguishes `""` (empty string) from an
// empty unquoted field (null).
struct Field {
  std::string text;
  bool quoted = false;
};

using Row = std::vector<Field>;

// RFC-4180 reader: comma separated, CRLF or LF line endings, double-quote
// quoting with "" escapes, quoted fields may span lines. Blank lines are
// skipped. A leading UTF-8 BOM is dropped.
//
// Errors report the zero-based row index counted over non-blank rows, with
// the header as row -1 so data rows line up with auto-assigned record ids.
inline std::vector<Row> parse(std::string_view input) {
  if (input.size() >= 3 && input.substr(0, 3) == "\xEF\xBB\xBF") input.remove_prefix(3);

  std::vector<Row> rows;
  Row row;
  Field field;
  bool in_quotes = false;
  bool after_quote = false;  // just closed a quoted field
  bool row_has_content = false;

  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::bad_input,
                "malformed csv at row " + std::to_string(static_cast<long long>(rows.size()) - 1) + ": " + what);
  };
  auto end_field = [&] {
    row.push_back(std::move(field));
    field = Field{};
    after_quote = false;
  };
  auto end_row = [&] {
    if (row_has_content) {
      end_field();
      rows.push_back(std::move(row));
    }
    row.clear();
    field = Field{};
    after_quote = false;
    row_has_content = false;
  };

  for (std::size_t i = 0; i < input.size(); ++i) {
    const char c = input[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < input.size() && input[i + 1] == '"') {
          field.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        field.text.push_back(c);
      }
      continue;
    }
    switch (c) {
      case ',':
        row_has_content = true;
        end_field();
        break;
      case '\r':
        if (i + 1 < input.size() && input[i + 1] == '\n') ++i;
        end_row();
        break;
      case '\n':
        end_row();
        break;
      case '"':
        if (after_quote || !field.text.empty()) fail("unexpected quote inside field");
        in_quotes = true;
        field.quoted = true;
        row_has_content = true;
        break;
      default:
        if (after_quote) fail("characters after closing quote");
        field.text.push_back(c);
        row_has_content = true;
        break;
    }
  }
  if (in_quotes) fail("unterminated quoted field");
  end_row();
  return rows;
}

inline bool needs_quoting(std::string_view text) {
  return text.find_first_of(",\"\r\n") != std::string_view::npos || text.empty();
}

// Quotes `text` when RFC-4180 requires it. Empty strings are quoted so they
// stay distinguishable from nulls.
inline std::string escape(std::string_view text) {
  if (!needs_quoting(text)) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace provlens::csv
