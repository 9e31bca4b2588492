#include "emosim/text.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

namespace emosim::text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
} // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b]))
        ++b;
    while (e > b && is_space(s[e - 1]))
        --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), to_lower);
    return out;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return to_lower(x) == to_lower(y); });
}

std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string> lines(std::string_view s) {
    auto out = split(s, '\n');
    for (auto& l : out)
        if (!l.empty() && l.back() == '\r')
            l.pop_back();
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending)
            out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

std::string strip_terminal_punctuation(std::string_view s) {
    std::string out = trim(s);
    while (!out.empty() && (out.back() == '.' || out.back() == '!' || out.back() == '?' ||
                            out.back() == ';' || out.back() == ':' || out.back() == ',' || is_space(out.back())))
        out.pop_back();
    return out;
}

std::string normalize(std::string_view s) {
    return strip_terminal_punctuation(collapse_whitespace(lower(s)));
}

std::vector<std::string> tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_alnum(c)) {
            cur.push_back(to_lower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

bool ends_with_sentence_punct(std::string_view s) {
    auto t = trim(s);
    return !t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?');
}

std::string as_sentence(std::string_view s) {
    auto t = trim(s);
    if (!ends_with_sentence_punct(t))
        t.push_back('.');
    return t;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    return fmt::format("{}", fmt::join(parts, sep));
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

} // namespace emosim::text
