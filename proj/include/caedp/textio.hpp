#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace caedp {

/// Shortest round-trip decimal representation (locale independent).
std::string format_double(double value);

/// Strict locale-independent parsers; throw std::invalid_argument naming
/// `what` on malformed or partially consumed input.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

/// Splits on a delimiter without quoting rules (fields never contain commas).
std::vector<std::string_view> split(std::string_view line, char delim = ',');

std::string_view trim(std::string_view text);

}  // namespace caedp
