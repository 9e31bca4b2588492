#include "emosim/jsonl.hpp"

#include <sstream>

#include "emosim/text.hpp"

namespace emosim::jsonl {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::UnreadableFile, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
    out << content;
}

std::vector<nlohmann::json> read(const std::filesystem::path& path) {
    std::vector<nlohmann::json> rows;
    std::size_t n = 0;
    for (const auto& line : text::lines(read_file(path))) {
        ++n;
        if (text::trim(line).empty())
            continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::SchemaMismatch, path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return rows;
}

std::string dump(const std::vector<nlohmann::json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

void write(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
    write_file(path, dump(rows));
}

void append_line(const std::filesystem::path& path, const nlohmann::json& row) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        fail(ErrorCode::UnreadableFile, "cannot append to " + path.string());
    out << row.dump() << '\n';
}

} // namespace emosim::jsonl
