/*
 * Copyright 2026 The IAMs Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "iams/csv.hpp"

#include <charconv>
#include <fstream>

#include "iams/error.hpp"

namespace iams::csv {

std::string Escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void WriteRow(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << Escape(fields[i]);
  }
  out << '\n';
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) Fail(ErrorCode::kInternal, "cannot format double");
  return std::string(buf, end);
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  Fail(ErrorCode::kValidation, "csv column '" + std::string(name) + "' not found");
}

namespace {

// Reads one record; returns false at end of input.
bool ReadRecord(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) Fail(ErrorCode::kValidation, "csv: unterminated quoted field");
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

Table Read(std::istream& in) {
  Table table;
  while (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    table.comments.push_back(line.substr(1));
  }
  std::vector<std::string> record;
  if (!ReadRecord(in, table.header)) return table;
  while (ReadRecord(in, record)) {
    if (record.size() != table.header.size()) {
      Fail(ErrorCode::kValidation,
           "csv: row " + std::to_string(table.rows.size() + 1) + " has " +
               std::to_string(record.size()) + " fields, header has " +
               std::to_string(table.header.size()));
    }
    table.rows.push_back(record);
  }
  return table;
}

Table ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path);
  return Read(in);
}

}  // namespace iams::csv
