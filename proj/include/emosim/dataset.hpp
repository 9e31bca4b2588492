#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "emosim/domain.hpp"

namespace emosim {

/// Column names of an ED-style CSV file.
struct ColumnMapping {
    std::string conversation_id = "conv_id";
    std::string utterance_index = "utterance_idx";
    std::string speaker = "speaker_idx";
    std::string emotion = "context";
    std::string text = "utterance";
};

void from_json(const json& j, ColumnMapping& m);

struct IngestResult {
    /// Conversations in first-seen order; role tags "friend" (first speaker)
    /// and "me"; metadata["friend_emotion"] holds the emotion label.
    std::vector<Transcript> conversations;
    std::size_t skipped_rows = 0;
};

/// Split one CSV record honoring double-quoted fields.
std::vector<std::string> parse_csv_record(std::string_view line);

/// Throws UnreadableFile or SchemaMismatch (mapped column absent from header).
IngestResult ingest_ed(const std::filesystem::path& path, const ColumnMapping& mapping = {});
IngestResult ingest_ed_text(std::string_view csv, const ColumnMapping& mapping = {});

struct TrainingInstance {
    std::string input;
    std::string label;
    std::string conversation_id;
    std::size_t turn_index = 0;
    bool se_mode = false;
};

struct ExportOptions {
    bool with_se = false;
    std::size_t token_budget = 512;   // whitespace tokens scaled by token_factor
    double token_factor = 1.3;
    std::string eos_token = "<eos_token>";
};

/// One instance per "me" turn that has at least one preceding utterance.
/// se_lookup maps conversation id to a first-person self-emotion sentence;
/// throws MissingSelfEmotion when with_se and the lookup misses.
std::vector<TrainingInstance> export_seq2seq(const std::vector<Transcript>& conversations,
                                             const ExportOptions& options,
                                             const std::map<std::string, std::string>& se_lookup = {});

struct DatasetSplit {
    std::vector<TrainingInstance> train;
    std::vector<TrainingInstance> val;
    std::vector<TrainingInstance> test;
    std::array<std::vector<std::string>, 3> conversation_ids;
};

/// Partition by conversation id; deterministic in seed. Throws
/// InvalidArgument unless the ratios sum to 1 within 1e-9.
DatasetSplit split(const std::vector<TrainingInstance>& instances, std::array<double, 3> ratios,
                   std::uint64_t seed);

std::string to_tsv(const std::vector<TrainingInstance>& instances);

void to_json(json& j, const TrainingInstance& t);
void from_json(const json& j, TrainingInstance& t);

} // namespace emosim
