#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emosim/dataset.hpp"
#include "emosim/dialogue.hpp"
#include "emosim/gateway.hpp"

namespace emosim {

struct DialogueBlock {
    std::filesystem::path cases_path;
    std::vector<SeMode> modes;
};

struct GroupBlock {
    std::string topic_title;
    std::string group_description;
    std::size_t group_size = 6;
    int n_runs = 10;
    std::vector<Valence> valences{Valence::Positive, Valence::Negative};
    int max_rounds = 12;
    int global_budget = 0;
};

struct DatasetBlock {
    std::filesystem::path ed_path;
    ColumnMapping columns;
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    bool with_se = false;
    std::optional<std::filesystem::path> se_lookup_path;
    std::string format = "jsonl";  // or "tsv"
    std::size_t token_budget = 512;
};

/// A run configuration document (JSON). Relative paths resolve against the
/// directory holding the config file.
struct RunConfig {
    BackendConfig backend;
    std::uint64_t seed = 0;
    SeMode se_mode = SeMode::RandomEvent;
    std::filesystem::path label_pool_path;
    std::filesystem::path template_dir;
    std::filesystem::path output_dir = "runs";
    int jobs = 1;
    std::optional<DialogueBlock> dialogue;
    std::optional<GroupBlock> group;
    std::optional<DatasetBlock> dataset;

    json document;     // as loaded
    std::string hash;  // fnv1a64 of the canonical document

    /// Throws ConfigError on schema violations and UnreadableFile /
    /// ConfigError when a referenced path does not exist.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const json& doc, const std::filesystem::path& base_dir);
};

} // namespace emosim
