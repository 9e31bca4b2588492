#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "emosim/domain.hpp"
#include "emosim/emotion.hpp"
#include "emosim/templates.hpp"

namespace emosim {

enum class SeMode { None, Label, RandomEvent, ProfileEvent };

std::string_view to_string(SeMode m);
SeMode se_mode_from_string(std::string_view s);

struct FixedContextCase {
    std::string id;
    Transcript source_conversation;
    std::vector<Utterance> context;
    EmotionLabel friend_emotion;
    /// (friend, me): the ED speaker, then the responding agent.
    std::optional<std::pair<AgentProfile, AgentProfile>> profiles;
    std::optional<SelfEmotion> self_emotion;

    void validate() const;
};

struct ContinuationResult {
    std::string case_id;
    SeMode mode = SeMode::None;
    StrategyChoice choice;
    std::vector<Utterance> continuation;
    std::string raw_completion;
    bool filtered = false;
    std::optional<std::string> error;
    std::vector<std::string> warnings;
    std::optional<SelfEmotion> self_emotion;
    int attempts = 0;
};

struct ParsedOutput {
    StrategyChoice choice;
    std::vector<Utterance> utterances;
    std::vector<std::string> warnings;  // dropped strategy names
};

/// First 3 utterances when the conversation is longer than 3, else the
/// first one. Throws EmptyConversation.
std::vector<Utterance> extract_context(const Transcript& conv);

/// STRATEGIES line (";"-separated) plus DIALOGUE block of "me:"/"friend:"
/// lines. Throws FormatError.
ParsedOutput parse_model_output(std::string_view text,
                                const StrategyPool& pool = StrategyPool::default_pool());

/// The prompt sent for a case; the self-emotion sentence, when present,
/// precedes the context.
std::string build_continuation_prompt(const FixedContextCase& c, const PromptRunner& llm,
                                      const StrategyPool& pool = StrategyPool::default_pool());

/// Retries once on a format error, then marks the result filtered. Gateway
/// errors propagate.
ContinuationResult continue_conversation(const FixedContextCase& c, PromptRunner& llm,
                                         const StrategyPool& pool = StrategyPool::default_pool(),
                                         const std::string& tag = "dialogue/continue");

struct ExperimentOptions {
    std::set<SeMode> modes{SeMode::None};
    int jobs = 1;
    std::uint64_t seed = 0;
};

struct ExperimentResult {
    std::vector<ContinuationResult> results;  // input order, then mode order
    std::size_t filtered = 0;
    std::map<SeMode, std::size_t> filtered_by_mode;
};

/// One result per (case, mode). Per-case failures are recorded as filtered
/// results; the batch never aborts.
ExperimentResult run_fixed_context_experiment(const std::vector<FixedContextCase>& cases,
                                              const ExperimentOptions& options, PromptRunner& llm,
                                              const LabelPool& labels,
                                              const StrategyPool& pool = StrategyPool::default_pool());

void to_json(json& j, const FixedContextCase& c);
void from_json(const json& j, FixedContextCase& c);
void to_json(json& j, const ContinuationResult& r);
void from_json(const json& j, ContinuationResult& r);

} // namespace emosim
