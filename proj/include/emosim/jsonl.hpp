#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emosim/error.hpp"

namespace emosim::jsonl {

/// Read every nonblank line of a JSONL file. Throws UnreadableFile.
std::vector<nlohmann::json> read(const std::filesystem::path& path);

/// One compact JSON object per line, '\n' terminated.
std::string dump(const std::vector<nlohmann::json>& rows);

void write(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
void append_line(const std::filesystem::path& path, const nlohmann::json& row);

template <class T>
std::vector<T> read_as(const std::filesystem::path& path) {
    std::vector<T> out;
    for (const auto& row : read(path))
        out.push_back(row.get<T>());
    return out;
}

template <class T>
void write_all(const std::filesystem::path& path, const std::vector<T>& items) {
    std::vector<nlohmann::json> rows;
    rows.reserve(items.size());
    for (const auto& item : items)
        rows.emplace_back(item);
    write(path, rows);
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

} // namespace emosim::jsonl
