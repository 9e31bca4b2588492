#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emosim/domain.hpp"
#include "emosim/templates.hpp"

namespace emosim {

enum class MemberRole { Leader, Member };

std::string_view to_string(MemberRole r);

struct GroupMember {
    std::string id;
    AgentProfile profile;
    MemberRole role = MemberRole::Member;
    std::string position;
    std::string goal;
    std::optional<SelfEmotion> self_emotion;

    bool is_leader() const { return role == MemberRole::Leader; }
};

struct Topic {
    std::string title;
    std::vector<std::string> steps;

    /// At least one step; steps nonempty and unique.
    void validate() const;
};

/// Exactly one leader and a position per member.
void validate_group(const std::vector<GroupMember>& group);
const GroupMember& group_leader(const std::vector<GroupMember>& group);

/// Parse labeled-field profile blocks (Name:, Age:, Innate:, Occupation:,
/// Origin:, Gender:, Description:). Throws ProfileParseError.
std::vector<AgentProfile> parse_profiles(std::string_view completion);

/// Two profiles plausibly behind the conversation, in the order the
/// completion lists them. One retry on a malformed completion.
std::pair<AgentProfile, AgentProfile> generate_speaker_profiles(
    const std::vector<Utterance>& context, PromptRunner& llm,
    const std::string& tag = "genesis/profiles");

/// Parse member blocks. Throws GroupParseError when the block count differs
/// from size; repairs a zero/multi leader roster (first member leads).
std::vector<GroupMember> parse_group(std::string_view completion, std::size_t size);

/// Promote the first member when there is not exactly one leader. Returns
/// true when a repair happened.
bool enforce_single_leader(std::vector<GroupMember>& group);

std::vector<GroupMember> generate_group(const std::string& description, std::size_t size,
                                        PromptRunner& llm, const std::string& tag = "genesis/group");

/// Numbered list, either one item per line or inline ("1. a 2. b").
/// Throws TopicParseError.
Topic parse_topic(const std::string& title, std::string_view completion);

Topic generate_topic_steps(const std::string& title, PromptRunner& llm,
                           const std::string& tag = "genesis/topic");

/// "speaker: text" lines.
std::string format_utterances(const std::vector<Utterance>& utterances);

void to_json(json& j, const GroupMember& m);
void from_json(const json& j, GroupMember& m);
void to_json(json& j, const Topic& t);
void from_json(const json& j, Topic& t);

} // namespace emosim
