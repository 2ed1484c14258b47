#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace sdpuf::io {

/// Opens for writing; throws Io naming the path on failure.
std::ofstream open_output(const std::string& path);
std::ifstream open_input(const std::string& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// Strict parsers: the whole field must be consumed. Empty optional-like
/// failure is reported by returning false.
bool parse_int(std::string_view s, std::int64_t& out);
bool parse_double(std::string_view s, double& out);

/// Reads a whole file as lines, stripping a trailing '\r'.
std::vector<std::string> read_lines(const std::string& path);

} // namespace sdpuf::io
