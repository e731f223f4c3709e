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

#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace iams::csv {

// RFC 4180 quoting: fields containing ',', '"', CR or LF are quoted.
std::string Escape(std::string_view field);
void WriteRow(std::ostream& out, const std::vector<std::string>& fields);

// Shortest representation that parses back to the same double.
std::string FormatDouble(double v);

struct Table {
  std::vector<std::string> comments;  // lines starting with '#', without '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws if absent
};

// Leading '#' lines are collected as comments; the next record is the header.
Table Read(std::istream& in);
Table ReadFile(const std::string& path);

}  // namespace iams::csv
