#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parsers.
namespace emosim::text {

std::string trim(std::string_view s);
std::string lower(std::string_view s);
bool istarts_with(std::string_view s, std::string_view prefix);
bool iequals(std::string_view a, std::string_view b);

std::vector<std::string> split(std::string_view s, char delim);
std::vector<std::string> lines(std::string_view s);

/// Collapse runs of whitespace into one space and trim both ends.
std::string collapse_whitespace(std::string_view s);

/// Strip trailing '.', '!', '?', ';', ':' and ',' (and whitespace).
std::string strip_terminal_punctuation(std::string_view s);

/// Lowercase, collapse whitespace, strip terminal punctuation.
std::string normalize(std::string_view s);

/// Lowercased alphanumeric runs.
std::vector<std::string> tokens(std::string_view s);

bool ends_with_sentence_punct(std::string_view s);

/// Append a period unless the text already ends in . ! or ?
std::string as_sentence(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t value);

} // namespace emosim::text
