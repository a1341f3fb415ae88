#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "winprob/common.hpp"

// Strict CSV ingestion: mandatory header, comma separator, optional RFC-style
// double-quote escaping, '.' decimal separator, no thousands separators, no
// field trimming. Schema errors report every offending row, not just the
// first one.

namespace winprob {

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;  // quotes only open an empty, unstarted field
  auto end_field = [&] {
    fields.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(fields.size() == 1 && fields[0].empty())) records.push_back(fields);
    fields.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      ++i;
    } else if (c == '\n' || c == '\r') {
      end_record();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quote in CSV");
  if (field_started || !fields.empty()) end_record();
  return records;
}

struct DataRow {
  std::string subject_id;
  int group = 0;  // 0 = placebo, 1 = active
  std::optional<double> response;
  std::optional<std::string> stratum;
  std::optional<double> covariate;
  std::optional<bool> died;
  std::optional<double> death_time;
  std::optional<double> last_value;
  std::optional<bool> missing;
};

struct Dataset {
  std::vector<std::string> columns;
  std::vector<DataRow> rows;

  bool has(const std::string& col) const {
    for (const auto& c : columns)
      if (c == col) return true;
    return false;
  }
};

// Loads a dataset whose header must match the required column set exactly;
// extra columns are as much an error as missing ones, so an analysis never
// silently ignores data the caller thought mattered.
inline Dataset load_dataset(const std::string& text,
                            const std::vector<std::string>& required_columns) {
  const auto records = parse_csv(text);
  if (records.empty()) throw DataError("empty CSV: header row required");
  const std::vector<std::string>& header = records.front();

  std::string schema_errors;
  auto add_schema = [&](const std::string& msg) {
    if (!schema_errors.empty()) schema_errors += "; ";
    schema_errors += msg;
  };
  for (const auto& col : required_columns) {
    bool found = false;
    for (const auto& h : header)
      if (h == col) found = true;
    if (!found) add_schema("missing column: " + col);
  }
  for (const auto& h : header) {
    bool wanted = false;
    for (const auto& col : required_columns)
      if (h == col) wanted = true;
    if (!wanted) add_schema("unexpected column: " + h);
  }
  for (std::size_t a = 0; a < header.size(); ++a)
    for (std::size_t b = a + 1; b < header.size(); ++b)
      if (header[a] == header[b]) add_schema("duplicate column: " + header[a]);
  if (!schema_errors.empty()) throw DataError(schema_errors);

  auto col_index = [&](const std::string& col) -> std::size_t {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == col) return k;
    return header.size();
  };
  const std::size_t i_subject = col_index("subject_id");
  const std::size_t i_group = col_index("group");
  const std::size_t i_response = col_index("response");
  const std::size_t i_stratum = col_index("stratum");
  const std::size_t i_covariate = col_index("covariate");
  const std::size_t i_died = col_index("died");
  const std::size_t i_death_time = col_index("death_time");
  const std::size_t i_last_value = col_index("last_value");
  const std::size_t i_missing = col_index("missing");

  Dataset ds;
  ds.columns = header;
  std::string row_errors;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r);
    auto add_row = [&](const std::string& msg) {
      if (!row_errors.empty()) row_errors += "; ";
      row_errors += where + ": " + msg;
    };
    if (rec.size() != header.size()) {
      add_row("expected " + std::to_string(header.size()) + " fields, got " +
              std::to_string(rec.size()));
      continue;
    }
    DataRow row;
    auto get = [&](std::size_t idx) -> const std::string& { return rec[idx]; };
    auto opt_double = [&](std::size_t idx, const char* name) -> std::optional<double> {
      if (idx >= header.size() || get(idx).empty()) return std::nullopt;
      auto v = parse_double_strict(get(idx));
      if (!v) add_row(std::string("invalid ") + name + ": '" + get(idx) + "'");
      return v;
    };
    auto opt_flag = [&](std::size_t idx, const char* name) -> std::optional<bool> {
      if (idx >= header.size()) return std::nullopt;
      const std::string& s = get(idx);
      if (s == "0") return false;
      if (s == "1") return true;
      add_row(std::string(name) + " must be 0 or 1, got '" + s + "'");
      return std::nullopt;
    };

    row.subject_id = get(i_subject);
    if (row.subject_id.empty()) add_row("empty subject_id");
    if (get(i_group) == "0") {
      row.group = 0;
    } else if (get(i_group) == "1") {
      row.group = 1;
    } else {
      add_row("group must be 0 or 1, got '" + get(i_group) + "'");
    }
    row.response = opt_double(i_response, "response");
    if (i_stratum < header.size()) {
      if (get(i_stratum).empty()) {
        add_row("empty stratum");
      } else {
        row.stratum = get(i_stratum);
      }
    }
    row.covariate = opt_double(i_covariate, "covariate");
    if (i_covariate < header.size() && get(i_covariate).empty()) add_row("empty covariate");
    row.died = opt_flag(i_died, "died");
    row.death_time = opt_double(i_death_time, "death_time");
    row.last_value = opt_double(i_last_value, "last_value");
    row.missing = opt_flag(i_missing, "missing");
    ds.rows.push_back(std::move(row));
  }
  if (!row_errors.empty()) throw DataError(row_errors);
  if (ds.rows.empty()) throw DataError("empty sample");
  return ds;
}

}  // namespace winprob
