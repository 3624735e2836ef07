#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eegemo::text {

std::string_view trim(std::string_view s) noexcept;

/// Splits on commas; fields are trimmed and surrounding double quotes removed.
std::vector<std::string_view> split_csv(std::string_view line);

/// Finite decimal values only; "NaN", "inf" and trailing garbage are rejected.
std::optional<double> parse_finite(std::string_view field);

/// Shortest representation that parses back to the identical double.
std::string format_double(double value);

std::string lower(std::string_view s);

}  // namespace eegemo::text
