#include "emosim/domain.hpp"

#include <algorithm>

#include "emosim/error.hpp"
#include "emosim/text.hpp"

namespace emosim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownStrategy: return "UnknownStrategy";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::BackendRefusal: return "BackendRefusal";
    case ErrorCode::MockExhausted: return "MockExhausted";
    case ErrorCode::CassetteMiss: return "CassetteMiss";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::ProfileParseError: return "ProfileParseError";
    case ErrorCode::GroupParseError: return "GroupParseError";
    case ErrorCode::TopicParseError: return "TopicParseError";
    case ErrorCode::EmotionParseError: return "EmotionParseError";
    case ErrorCode::LabelOutOfPool: return "LabelOutOfPool";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::EmptyConversation: return "EmptyConversation";
    case ErrorCode::UndefinedForEmpty: return "UndefinedForEmpty";
    case ErrorCode::StepMismatch: return "StepMismatch";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MissingSelfEmotion: return "MissingSelfEmotion";
    case ErrorCode::GlobalBudgetExceeded: return "GlobalBudgetExceeded";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

void AgentProfile::validate() const {
    require(!text::trim(name).empty(), "profile name is empty");
    require(age >= 1 && age <= 120, "profile age out of [1, 120]: " + std::to_string(age));
}

std::string_view to_string(Valence v) {
    switch (v) {
    case Valence::Positive: return "positive";
    case Valence::Negative: return "negative";
    case Valence::Neutral: return "neutral";
    }
    return "neutral";
}

Valence valence_from_string(std::string_view s) {
    auto n = text::normalize(s);
    if (n == "positive" || n == "pos")
        return Valence::Positive;
    if (n == "negative" || n == "neg")
        return Valence::Negative;
    if (n == "neutral")
        return Valence::Neutral;
    fail(ErrorCode::InvalidArgument, "unknown valence '" + std::string(s) + "'");
}

std::string_view to_string(SelfEmotionStyle s) {
    switch (s) {
    case SelfEmotionStyle::RandomLabel: return "random_label";
    case SelfEmotionStyle::RandomEvent: return "random_event";
    case SelfEmotionStyle::ProfileEvent: return "profile_event";
    }
    return "random_label";
}

SelfEmotionStyle style_from_string(std::string_view s) {
    if (s == "random_label")
        return SelfEmotionStyle::RandomLabel;
    if (s == "random_event")
        return SelfEmotionStyle::RandomEvent;
    if (s == "profile_event")
        return SelfEmotionStyle::ProfileEvent;
    fail(ErrorCode::InvalidArgument, "unknown self-emotion style '" + std::string(s) + "'");
}

void SelfEmotion::validate() const {
    require(!rendered.empty(), "self-emotion sentence is empty");
    require(rendered.find(label.label) != std::string::npos,
            "self-emotion sentence does not mention its label '" + label.label + "'");
    if (style == SelfEmotionStyle::RandomLabel)
        require(!event.has_value(), "random-label self-emotion carries an event");
    else
        require(event.has_value() && !event->empty(), "event-style self-emotion has no event");
}

// --- strategies --------------------------------------------------------------

namespace {

std::string slug(std::string_view name) { return text::join(text::tokens(name), "_"); }

bool is_subsequence(const std::vector<std::string>& needle, const std::vector<std::string>& hay) {
    if (needle.empty())
        return false;
    std::size_t i = 0;
    for (const auto& t : hay)
        if (i < needle.size() && t == needle[i])
            ++i;
    return i == needle.size();
}

} // namespace

StrategyPool::StrategyPool(std::vector<Strategy> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        require(!entries_[i].id.empty() && !entries_[i].display_name.empty(), "strategy with empty id or name");
        for (std::size_t k = 0; k < i; ++k)
            require(entries_[k].id != entries_[i].id, "duplicate strategy id '" + entries_[i].id + "'");
    }
}

const StrategyPool& StrategyPool::default_pool() {
    static const StrategyPool pool = from_names({
        "Questioning for details",
        "Acknowledging or admitting",
        "Encouraging",
        "Sympathizing",
        "Suggesting",
        "Sharing own thoughts/opinion",
        "Sharing or relating to own experience",
        "Expressing care or concern",
        "Disapproving",
        "Rejection",
    });
    return pool;
}

StrategyPool StrategyPool::from_names(const std::vector<std::string>& names) {
    std::vector<Strategy> entries;
    entries.reserve(names.size());
    for (const auto& n : names) {
        auto display = text::strip_terminal_punctuation(n);
        entries.push_back({slug(display), display});
    }
    return StrategyPool(std::move(entries));
}

std::optional<std::size_t> StrategyPool::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].id == id)
            return i;
    return std::nullopt;
}

const Strategy& StrategyPool::by_id(std::string_view id) const {
    auto i = index_of(id);
    if (!i)
        fail(ErrorCode::UnknownStrategy, "no strategy with id '" + std::string(id) + "'");
    return entries_[*i];
}

StrategyChoice::StrategyChoice(std::initializer_list<Strategy> items) {
    for (const auto& s : items)
        add(s);
}

bool StrategyChoice::add(const Strategy& s) {
    if (contains(s.id))
        return false;
    items_.push_back(s);
    return true;
}

bool StrategyChoice::contains(std::string_view id) const {
    return std::any_of(items_.begin(), items_.end(), [&](const Strategy& s) { return s.id == id; });
}

std::vector<std::string> StrategyChoice::display_names() const {
    std::vector<std::string> out;
    for (const auto& s : items_)
        out.push_back(s.display_name);
    return out;
}

const Strategy& strategy_from_name(std::string_view name, const StrategyPool& pool) {
    require(!pool.empty(), "strategy pool is empty");
    const auto wanted = text::normalize(name);
    if (wanted.empty())
        fail(ErrorCode::UnknownStrategy, "empty strategy name");

    for (const auto& s : pool.entries())
        if (text::normalize(s.display_name) == wanted || s.id == wanted)
            return s;

    const auto in_tokens = text::tokens(name);
    const Strategy* match = nullptr;
    int matches = 0;
    for (const auto& s : pool.entries()) {
        auto entry_tokens = text::tokens(s.display_name);
        if (is_subsequence(in_tokens, entry_tokens) || is_subsequence(entry_tokens, in_tokens)) {
            match = &s;
            ++matches;
        }
    }
    if (matches == 1)
        return *match;
    fail(ErrorCode::UnknownStrategy,
         matches == 0 ? "unknown strategy '" + std::string(name) + "'"
                      : "ambiguous strategy '" + std::string(name) + "'");
}

std::vector<int> multi_hot(const StrategyChoice& choice, const StrategyPool& pool) {
    std::vector<int> v(pool.size(), 0);
    for (const auto& s : choice.items()) {
        auto i = pool.index_of(s.id);
        require(i.has_value(), "strategy '" + s.id + "' is not in the pool");
        v[*i] = 1;
    }
    return v;
}

// --- transcripts -------------------------------------------------------------

Transcript Transcript::make(std::string id) {
    Transcript t;
    t.id = std::move(id);
    t.metadata["schema"] = std::string(kSchemaVersion);
    return t;
}

Utterance& Transcript::append(std::string speaker_id, std::string role_tag, std::string text) {
    register_speaker(speaker_id);
    Utterance u;
    u.speaker_id = std::move(speaker_id);
    u.role_tag = std::move(role_tag);
    u.text = std::move(text);
    u.turn_index = utterances.size();
    utterances.push_back(std::move(u));
    return utterances.back();
}

void Transcript::register_speaker(const std::string& speaker_id) {
    auto known = speakers();
    if (std::find(known.begin(), known.end(), speaker_id) != known.end())
        return;
    auto& field = metadata["speakers"];
    field += field.empty() ? speaker_id : "," + speaker_id;
}

std::vector<std::string> Transcript::speakers() const {
    auto it = metadata.find("speakers");
    if (it == metadata.end() || it->second.empty())
        return {};
    return text::split(it->second, ',');
}

void Transcript::validate() const {
    auto known = speakers();
    for (std::size_t i = 0; i < utterances.size(); ++i) {
        const auto& u = utterances[i];
        require(u.turn_index == i, "transcript " + id + ": turn indices not contiguous at " + std::to_string(i));
        require(!u.text.empty(), "transcript " + id + ": empty utterance at " + std::to_string(i));
        require(std::find(known.begin(), known.end(), u.speaker_id) != known.end(),
                "transcript " + id + ": unregistered speaker '" + u.speaker_id + "'");
    }
}

// --- json --------------------------------------------------------------------

void to_json(json& j, const AgentProfile& p) {
    j = json{{"name", p.name},         {"first_name", p.first_name}, {"last_name", p.last_name},
             {"age", p.age},           {"innate", p.innate},         {"occupation", p.occupation},
             {"origin", p.origin},     {"gender", p.gender},         {"description", p.description}};
}

void from_json(const json& j, AgentProfile& p) {
    p.name = j.at("name").get<std::string>();
    p.first_name = j.value("first_name", "");
    p.last_name = j.value("last_name", "");
    p.age = j.at("age").get<int>();
    p.innate = j.value("innate", std::vector<std::string>{});
    p.occupation = j.value("occupation", "");
    p.origin = j.value("origin", "");
    p.gender = j.value("gender", "");
    p.description = j.value("description", "");
}

void to_json(json& j, const EmotionLabel& e) {
    j = json{{"label", e.label}, {"valence", to_string(e.valence)}};
}

void from_json(const json& j, EmotionLabel& e) {
    if (j.is_string()) {
        e.label = j.get<std::string>();
        e.valence = Valence::Neutral;
        return;
    }
    e.label = j.at("label").get<std::string>();
    e.valence = valence_from_string(j.value("valence", "neutral"));
}

void to_json(json& j, const SelfEmotion& s) {
    j = json{{"style", to_string(s.style)}, {"label", s.label}, {"rendered", s.rendered}};
    j["event"] = s.event ? json(*s.event) : json(nullptr);
}

void from_json(const json& j, SelfEmotion& s) {
    s.style = style_from_string(j.at("style").get<std::string>());
    s.label = j.at("label").get<EmotionLabel>();
    s.rendered = j.at("rendered").get<std::string>();
    if (j.contains("event") && !j["event"].is_null())
        s.event = j["event"].get<std::string>();
    else
        s.event.reset();
}

void to_json(json& j, const Strategy& s) { j = json{{"id", s.id}, {"display_name", s.display_name}}; }

void from_json(const json& j, Strategy& s) {
    s.id = j.at("id").get<std::string>();
    s.display_name = j.at("display_name").get<std::string>();
}

void to_json(json& j, const StrategyChoice& c) { j = json(c.items()); }

void from_json(const json& j, StrategyChoice& c) {
    c = StrategyChoice{};
    for (const auto& item : j)
        c.add(item.get<Strategy>());
}

void to_json(json& j, const Utterance& u) {
    j = json{{"speaker_id", u.speaker_id}, {"role_tag", u.role_tag}, {"text", u.text}, {"turn_index", u.turn_index}};
    if (u.strategies)
        j["strategies"] = *u.strategies;
    if (u.step_index)
        j["step_index"] = *u.step_index;
}

void from_json(const json& j, Utterance& u) {
    u.speaker_id = j.at("speaker_id").get<std::string>();
    u.role_tag = j.value("role_tag", "");
    u.text = j.at("text").get<std::string>();
    u.turn_index = j.value("turn_index", std::size_t{0});
    if (j.contains("strategies"))
        u.strategies = j["strategies"].get<StrategyChoice>();
    else
        u.strategies.reset();
    if (j.contains("step_index"))
        u.step_index = j["step_index"].get<std::size_t>();
    else
        u.step_index.reset();
}

void to_json(json& j, const Transcript& t) {
    j = json{{"id", t.id}, {"utterances", t.utterances}, {"metadata", t.metadata}};
}

void from_json(const json& j, Transcript& t) {
    t.id = j.at("id").get<std::string>();
    t.utterances = j.at("utterances").get<std::vector<Utterance>>();
    t.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

} // namespace emosim
