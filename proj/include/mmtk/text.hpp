#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmtk::text {

std::string_view trim(std::string_view s);
std::string_view ltrim(std::string_view s);
std::string_view rtrim(std::string_view s);

// ASCII case folding; non-ASCII bytes pass through.
std::string casefold(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

// Position of the last case-insensitive occurrence of needle, or npos.
std::size_t rfind_icase(std::string_view hay, std::string_view needle);

std::vector<std::string_view> split_words(std::string_view s);

// Optimal string alignment distance (Levenshtein plus adjacent transposition).
std::size_t osa_distance(std::string_view a, std::string_view b);

// Parses a decimal number with optional sign, thousands separators and
// exponent. Returns nullopt unless the whole (trimmed) string is consumed.
std::optional<double> parse_number(std::string_view s);

// Every number occurring in free text, in order of appearance.
std::vector<double> extract_numbers(std::string_view s);

// Shortest round-trippable-ish rendering: integers without a decimal point,
// otherwise up to 12 significant digits with trailing zeros removed.
std::string format_number(double v);

// Fixed-point rendering with the given number of decimals.
std::string format_fixed(double v, int decimals);

}  // namespace mmtk::text
