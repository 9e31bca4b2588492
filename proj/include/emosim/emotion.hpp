#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emosim/domain.hpp"
#include "emosim/rng.hpp"
#include "emosim/templates.hpp"

namespace emosim {

/// Emotion labels with their configured valence.
class LabelPool {
public:
    LabelPool() = default;

    /// Throws InvalidArgument on an empty pool or duplicate labels.
    explicit LabelPool(std::vector<EmotionLabel> labels);

    /// "label,valence" rows; blank lines and '#' comments ignored.
    static LabelPool load(const std::filesystem::path& path);
    static LabelPool parse(std::string_view csv);

    const std::vector<EmotionLabel>& labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }

    const EmotionLabel* find(std::string_view label) const;
    Valence valence_of(std::string_view label) const;

    /// Labels of one valence. Throws InvalidArgument if none exist.
    LabelPool only(Valence v) const;

    std::string joined_names(std::string_view sep = ", ") const;

private:
    std::vector<EmotionLabel> labels_;
};

EmotionLabel sample_label(const LabelPool& pool, Rng& rng);

/// "<name> is feeling <label> right now."
SelfEmotion render_label_emotion(std::string_view name, const EmotionLabel& label);

/// "<name> is feeling <label> because <event>."
SelfEmotion render_event_emotion(std::string_view name, const EmotionLabel& label,
                                 std::string_view event);

/// "<name> is feeling <label> after recalling <event>[, even though <context>]."
SelfEmotion render_profile_event_emotion(std::string_view name, const EmotionLabel& label,
                                         std::string_view event,
                                         std::optional<std::string_view> context = std::nullopt);

struct EventCompletion {
    std::string label;
    std::string event;
    std::optional<std::string> context;
};

/// "label: ...; event: ...[; context: ...]" on one line or separate lines.
/// Throws EmotionParseError.
EventCompletion parse_event_completion(std::string_view completion);

/// Pool member for a parsed label: exact (case-insensitive) match, else a
/// unique token of the text that is itself a pool label. Throws LabelOutOfPool.
const EmotionLabel& resolve_label(std::string_view raw, const LabelPool& pool);

SelfEmotion generate_random_event(const AgentProfile& profile, const LabelPool& pool,
                                  PromptRunner& llm, const std::string& tag = "emotion/random_event");

/// Event grounded in profile.description. Throws InvalidArgument (no
/// gateway call) when the description is empty.
SelfEmotion generate_profile_event(const AgentProfile& profile, const LabelPool& pool,
                                   PromptRunner& llm, const std::string& tag = "emotion/profile_event");

} // namespace emosim
