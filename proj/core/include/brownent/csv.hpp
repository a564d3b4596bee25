#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brownent::csv {

/// Shortest decimal form that parses back to the same double.
std::string format(double v);

/// Strict parse of a whole field; nullopt on trailing garbage or empty input.
std::optional<double> parse(std::string_view field);

/// Splits one line on commas (no quoting) and strips a trailing '\r'.
std::vector<std::string_view> split(std::string_view line);

void write_header(std::ostream& os, std::span<const std::string> names);
void write_row(std::ostream& os, std::span<const double> values);

}  // namespace brownent::csv
