#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cxr/errors.hpp"

namespace cxr {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Reads a simple (unquoted) CSV file with a header line. Rows must have the
/// header's column count. CR line endings are tolerated on read.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseFailure("cannot open CSV file: " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseFailure("CSV row with " + std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(table.header.size()) + ": " + path.string());
    }
    table.rows.push_back(std::move(fields));
  }
  if (first) throw ParseFailure("empty CSV file: " + path.string());
  return table;
}

/// Writes rows as UTF-8 CSV with LF endings. Fields must not contain commas
/// or newlines; this format never quotes.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  if (!out) throw IoFailure("write failed: " + path.string());
}

/// 6 significant digits, the history CSV float format.
inline std::string format_sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw ParseFailure("trailing characters in number: " + s);
    return v;
  } catch (const std::invalid_argument&) {
    throw ParseFailure("not a number: " + s);
  } catch (const std::out_of_range&) {
    throw ParseFailure("number out of range: " + s);
  }
}

inline long long parse_int(const std::string& s) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw ParseFailure("trailing characters in integer: " + s);
    return v;
  } catch (const std::invalid_argument&) {
    throw ParseFailure("not an integer: " + s);
  } catch (const std::out_of_range&) {
    throw ParseFailure("integer out of range: " + s);
  }
}

}  // namespace cxr
