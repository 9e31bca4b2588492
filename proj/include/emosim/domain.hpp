#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace emosim {

using json = nlohmann::json;

inline constexpr std::string_view kSchemaVersion = "emosim/1";

struct AgentProfile {
    std::string name;
    std::string first_name;
    std::string last_name;
    int age = 0;
    std::vector<std::string> innate;
    std::string occupation;
    std::string origin;
    std::string gender;
    std::string description;

    /// Throws InvalidArgument on an empty name or an age outside [1, 120].
    void validate() const;

    /// Name used in rendered sentences: first_name when present.
    const std::string& call_name() const { return first_name.empty() ? name : first_name; }

    bool operator==(const AgentProfile&) const = default;
};

enum class Valence { Positive, Negative, Neutral };

std::string_view to_string(Valence v);
Valence valence_from_string(std::string_view s);

struct EmotionLabel {
    std::string label;
    Valence valence = Valence::Neutral;

    bool operator==(const EmotionLabel&) const = default;
};

enum class SelfEmotionStyle { RandomLabel, RandomEvent, ProfileEvent };

std::string_view to_string(SelfEmotionStyle s);
SelfEmotionStyle style_from_string(std::string_view s);

struct SelfEmotion {
    SelfEmotionStyle style = SelfEmotionStyle::RandomLabel;
    EmotionLabel label;
    std::optional<std::string> event;
    std::string rendered;

    /// Event present iff style != RandomLabel; rendered nonempty and
    /// contains the label token.
    void validate() const;

    bool operator==(const SelfEmotion&) const = default;
};

struct Strategy {
    std::string id;
    std::string display_name;

    bool operator==(const Strategy&) const = default;
};

/// Ordered, configurable pool of dialogue strategies. Declaration order
/// fixes the multi-hot layout.
class StrategyPool {
public:
    StrategyPool() = default;
    explicit StrategyPool(std::vector<Strategy> entries);

    /// The ten strategies of the empathetic-intent taxonomy used by default.
    static const StrategyPool& default_pool();

    /// Build a pool from display names; ids are derived slugs.
    static StrategyPool from_names(const std::vector<std::string>& names);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const Strategy& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<Strategy>& entries() const { return entries_; }

    std::optional<std::size_t> index_of(std::string_view id) const;
    const Strategy& by_id(std::string_view id) const;

private:
    std::vector<Strategy> entries_;
};

/// Insertion-ordered set of strategies.
class StrategyChoice {
public:
    StrategyChoice() = default;
    StrategyChoice(std::initializer_list<Strategy> items);

    /// Returns false when the strategy was already present.
    bool add(const Strategy& s);
    bool contains(std::string_view id) const;

    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    const std::vector<Strategy>& items() const { return items_; }

    std::vector<std::string> display_names() const;

    bool operator==(const StrategyChoice&) const = default;

private:
    std::vector<Strategy> items_;
};

/// Resolve a free-text strategy name against the pool. Exact match after
/// normalization first, then a unique token-subsequence match in either
/// direction. Throws UnknownStrategy.
const Strategy& strategy_from_name(std::string_view name, const StrategyPool& pool);

/// Position i is 1 iff pool[i] is in the choice. Throws InvalidArgument if
/// the choice holds a strategy outside the pool.
std::vector<int> multi_hot(const StrategyChoice& choice, const StrategyPool& pool);

struct Utterance {
    std::string speaker_id;
    std::string role_tag;
    std::string text;
    std::size_t turn_index = 0;
    std::optional<StrategyChoice> strategies;
    std::optional<std::size_t> step_index;  // group discussions only

    bool operator==(const Utterance&) const = default;
};

struct Transcript {
    std::string id;
    std::vector<Utterance> utterances;
    std::map<std::string, std::string> metadata;

    /// New transcript with the schema tag set.
    static Transcript make(std::string id);

    /// Append with the next turn index, registering the speaker.
    Utterance& append(std::string speaker_id, std::string role_tag, std::string text);

    /// Register a speaker id in metadata["speakers"].
    void register_speaker(const std::string& speaker_id);
    std::vector<std::string> speakers() const;

    /// Turn indices contiguous from 0; every speaker registered.
    void validate() const;

    bool operator==(const Transcript&) const = default;
};

void to_json(json& j, const AgentProfile& p);
void from_json(const json& j, AgentProfile& p);
void to_json(json& j, const EmotionLabel& e);
void from_json(const json& j, EmotionLabel& e);
void to_json(json& j, const SelfEmotion& s);
void from_json(const json& j, SelfEmotion& s);
void to_json(json& j, const Strategy& s);
void from_json(const json& j, Strategy& s);
void to_json(json& j, const StrategyChoice& c);
void from_json(const json& j, StrategyChoice& c);
void to_json(json& j, const Utterance& u);
void from_json(const json& j, Utterance& u);
void to_json(json& j, const Transcript& t);
void from_json(const json& j, Transcript& t);

} // namespace emosim
