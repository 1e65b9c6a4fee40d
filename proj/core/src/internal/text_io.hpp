// Copyright 2026 The fairgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small text helpers shared by the manifest, report and config writers.

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairgen::internal {

/// RFC 4180 style: fields containing a comma, quote or newline are quoted.
std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);
/// Parses a whole CSV document into rows of fields. Throws parse errors on
/// unterminated quotes.
std::vector<std::vector<std::string>> csv_parse(std::string_view text);

std::string base64_encode(std::string_view bytes);
std::optional<std::string> base64_decode(std::string_view text);

/// Shortest representation that round-trips through parse_double.
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);
std::optional<std::uint64_t> parse_uint(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace fairgen::internal
