#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace emosim {

struct CommandOptions {
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> cassette;
    bool record = false;
    int jobs = 0;  // 0: take the config value
    std::optional<std::filesystem::path> out_dir;
};

// Exit codes: 0 ok, 1 operational error (JSON error object on err).
int cmd_simulate_dialogue(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_simulate_group(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_export_dataset(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_evaluate(const std::filesystem::path& results, const std::filesystem::path& annotations,
                 const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
                 std::ostream& err);
int cmd_analyze_changes(const std::filesystem::path& paired_runs,
                        const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
                        std::ostream& err);

} // namespace emosim
