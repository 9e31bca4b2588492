#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emosim/domain.hpp"
#include "emosim/emotion.hpp"
#include "emosim/genesis.hpp"
#include "emosim/templates.hpp"

namespace emosim {

inline constexpr std::string_view kManagerId = "manager";

enum class Resolution { Agreement, Delegation, Vote, SingleAgent, CompromisedAgreement };

std::string_view to_string(Resolution r);
/// Accepts "agreement", "vote", "single agent", "compromise", ... Returns
/// nullopt for anything else.
std::optional<Resolution> resolution_from_string(std::string_view s);

struct Decision {
    std::size_t step_index = 0;
    std::string summary;
    Resolution resolution = Resolution::Agreement;
    std::vector<std::string> decided_by;

    bool operator==(const Decision&) const = default;
};

struct SEAssignment {
    std::optional<std::string> target_member;
    std::optional<SelfEmotion> self_emotion;
};

struct DiscussionConfig {
    int max_rounds = 12;          // manager turns per step
    int global_budget = 0;        // total turns; 0 means 12 * |steps|
    std::size_t history_window = 16;
    double member_temperature = 0.7;
    double judge_temperature = 0.0;

    int budget_for(const Topic& topic) const {
        return global_budget > 0 ? global_budget : 12 * static_cast<int>(topic.steps.size());
    }
};

struct DiscussionState {
    std::vector<GroupMember> group;
    Topic topic;
    std::size_t step_index = 0;
    Transcript history;
    std::vector<Decision> decisions;
    int rounds_in_step = 0;
    int total_turns = 0;
    std::map<std::string, int> selections_in_step;  // member id -> times picked this step
    std::vector<std::string> picked_since_check;

    bool finished() const { return step_index >= topic.steps.size(); }
    const std::string& current_step() const { return topic.steps.at(step_index); }
    std::size_t utterances_in_step() const;
    const GroupMember& member(const std::string& id) const;

    /// Record a decision for the current step and advance.
    void close_step(Decision d);
};

struct Verdict {
    enum class Kind { Continue, Agreed, ForcedDelegation };
    Kind kind = Kind::Continue;
    std::string summary;
    Resolution resolution = Resolution::Agreement;
    std::vector<std::string> decided_by;
};

/// "CONTINUE", "AGREED: <summary> (resolution: <kind>[, by: <who>])" or
/// "DELEGATED: <summary>". Unparseable text yields Continue.
Verdict parse_verdict(std::string_view text, const std::vector<GroupMember>& group);

/// Member picked by the hidden manager; falls back to the least-picked
/// member of the current step (roster order breaks ties).
std::string next_speaker(const DiscussionState& state, PromptRunner& llm,
                         const DiscussionConfig& cfg = {}, const std::string& tag = "group/next_speaker");

/// nullopt when the gateway fails or returns nothing: the member passes.
std::optional<std::string> member_respond(const GroupMember& member, const DiscussionState& state,
                                          PromptRunner& llm, const DiscussionConfig& cfg = {},
                                          const std::string& tag = "group/member_response");

Verdict check_agreement(const DiscussionState& state, PromptRunner& llm,
                        const DiscussionConfig& cfg = {}, const std::string& tag = "group/agreement");

struct DiscussionRun {
    Transcript transcript;
    std::vector<Decision> decisions;
    SEAssignment se;
    bool budget_exceeded = false;
};

DiscussionRun run_discussion(const std::vector<GroupMember>& group, const Topic& topic,
                             const SEAssignment& se, PromptRunner& llm, std::uint64_t seed,
                             const DiscussionConfig& cfg = {}, const std::string& tag_prefix = "group");

struct PairedRunSet {
    Topic topic;
    Valence valence = Valence::Positive;
    std::uint64_t seed = 0;
    std::vector<GroupMember> group;
    DiscussionRun baseline;
    std::vector<DiscussionRun> runs;
    std::vector<std::string> errors;  // one entry per failed self-emotion run
};

/// One baseline run without self-emotion plus n_runs runs where a random
/// member carries a generated event of the requested valence.
PairedRunSet run_experiment(const std::vector<GroupMember>& group, const Topic& topic, int n_runs,
                            Valence valence, PromptRunner& llm, const LabelPool& labels,
                            std::uint64_t seed, const DiscussionConfig& cfg = {}, int jobs = 1);

void to_json(json& j, const Decision& d);
void from_json(const json& j, Decision& d);
void to_json(json& j, const SEAssignment& s);
void from_json(const json& j, SEAssignment& s);
void to_json(json& j, const DiscussionRun& r);
void from_json(const json& j, DiscussionRun& r);
void to_json(json& j, const PairedRunSet& p);
void from_json(const json& j, PairedRunSet& p);

} // namespace emosim
