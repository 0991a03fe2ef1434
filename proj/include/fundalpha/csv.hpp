#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace fundalpha::csv {

/// Splits one record. Double-quoted fields may contain the delimiter; `""`
/// inside quotes is a literal quote. Surrounding whitespace is trimmed.
std::vector<std::string> split(std::string_view line, char delim = ',');

/// Reads the next non-blank line, stripping a trailing '\r'.
bool next_line(std::istream& in, std::string& line);

/// Base-10 decimal with optional sign and exponent. Throws ParseError with
/// `context` in the message.
double parse_decimal(std::string_view text, std::string_view context);

/// Shortest text that parses back to exactly `v`.
std::string format_decimal(double v);

/// Fixed-point with `digits` decimals, for human-facing tables.
std::string format_fixed(double v, int digits);

/// Quotes a field when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field);

std::string lower(std::string_view s);

} // namespace fundalpha::csv
