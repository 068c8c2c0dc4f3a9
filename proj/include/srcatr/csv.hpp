#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace srcatr::csv {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

/// RFC-4180 field quoting: quotes only when needed, doubles embedded quotes.
std::string quote(std::string_view field);

std::string join_row(const std::vector<std::string>& fields);

/// Splits one RFC-4180 record (no embedded newlines).
std::vector<std::string> split_row(std::string_view line);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

} // namespace srcatr::csv
