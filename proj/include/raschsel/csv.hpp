#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/response_matrix.hpp"

namespace raschsel {

// Malformed CSV input; the message names the offending row/column.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace detail

// Header row of item labels, optional leading "person_id" column (ignored),
// then one row of 0/1 cells per person.
inline ResponseMatrix read_response_csv(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw CsvError("empty CSV: no header row");
  for (auto& h : header) h = detail::trim(h);
  const bool has_id = header.front() == "person_id";
  std::vector<std::string> labels(header.begin() + (has_id ? 1 : 0), header.end());
  {
    std::vector<std::string> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 1; k < sorted.size(); ++k)
      if (sorted[k] == sorted[k - 1]) throw CsvError("duplicate item label '" + sorted[k] + "'");
  }
  std::vector<std::uint8_t> cells;
  std::size_t persons = 0, row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw CsvError("row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                     " fields, header has " + std::to_string(header.size()));
    for (std::size_t c = has_id ? 1 : 0; c < fields.size(); ++c) {
      const auto v = detail::trim(fields[c]);
      if (v != "0" && v != "1")
        throw CsvError("row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                       " ('" + header[c] + "'): value '" + v + "' is not 0 or 1");
      cells.push_back(v == "1" ? 1 : 0);
    }
    ++persons;
  }
  if (persons == 0) throw CsvError("CSV has a header but no data rows");
  try {
    return ResponseMatrix(persons, std::move(labels), std::move(cells));
  } catch (const DomainError& e) {
    throw CsvError(e.what());
  }
}

inline ResponseMatrix ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  return read_response_csv(in);
}

inline void write_response_csv(std::ostream& out, const ResponseMatrix& data,
                               bool person_ids = true) {
  if (person_ids) out << "person_id,";
  for (std::size_t i = 0; i < data.items(); ++i)
    out << (i ? "," : "") << detail::csv_field(data.label(i));
  out << '\n';
  for (std::size_t p = 0; p < data.persons(); ++p) {
    if (person_ids) out << p + 1 << ',';
    for (std::size_t i = 0; i < data.items(); ++i) out << (i ? "," : "") << int(data(p, i));
    out << '\n';
  }
}

}  // namespace raschsel
