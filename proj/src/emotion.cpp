#include "emosim/emotion.hpp"

#include <regex>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "emosim/error.hpp"
#include "emosim/jsonl.hpp"
#include "emosim/text.hpp"

namespace emosim {

LabelPool::LabelPool(std::vector<EmotionLabel> labels) : labels_(std::move(labels)) {
    require(!labels_.empty(), "label pool is empty");
    std::set<std::string> seen;
    for (const auto& l : labels_) {
        require(!l.label.empty(), "empty emotion label");
        require(seen.insert(l.label).second, "duplicate emotion label '" + l.label + "'");
    }
}

LabelPool LabelPool::parse(std::string_view csv) {
    std::vector<EmotionLabel> labels;
    for (const auto& raw : text::lines(csv)) {
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#')
            continue;
        auto cols = text::split(line, ',');
        require(cols.size() == 2, "label pool row must be 'label,valence': '" + line + "'");
        labels.push_back({text::lower(text::trim(cols[0])), valence_from_string(text::trim(cols[1]))});
    }
    return LabelPool(std::move(labels));
}

LabelPool LabelPool::load(const std::filesystem::path& path) { return parse(jsonl::read_file(path)); }

const EmotionLabel* LabelPool::find(std::string_view label) const {
    for (const auto& l : labels_)
        if (text::iequals(l.label, label))
            return &l;
    return nullptr;
}

Valence LabelPool::valence_of(std::string_view label) const {
    const auto* l = find(label);
    if (!l)
        fail(ErrorCode::LabelOutOfPool, "label '" + std::string(label) + "' is not in the pool");
    return l->valence;
}

LabelPool LabelPool::only(Valence v) const {
    std::vector<EmotionLabel> out;
    for (const auto& l : labels_)
        if (l.valence == v)
            out.push_back(l);
    require(!out.empty(), "label pool has no " + std::string(to_string(v)) + " labels");
    return LabelPool(std::move(out));
}

std::string LabelPool::joined_names(std::string_view sep) const {
    std::vector<std::string> names;
    for (const auto& l : labels_)
        names.push_back(l.label);
    return text::join(names, sep);
}

EmotionLabel sample_label(const LabelPool& pool, Rng& rng) {
    require(pool.size() > 0, "cannot sample from an empty label pool");
    return pool.labels()[rng.below(pool.size())];
}

SelfEmotion render_label_emotion(std::string_view name, const EmotionLabel& label) {
    require(!text::trim(name).empty(), "self-emotion needs a speaker name");
    SelfEmotion se;
    se.style = SelfEmotionStyle::RandomLabel;
    se.label = label;
    se.rendered = fmt::format("{} is feeling {} right now.", name, label.label);
    return se;
}

SelfEmotion render_event_emotion(std::string_view name, const EmotionLabel& label, std::string_view event) {
    require(!text::trim(name).empty(), "self-emotion needs a speaker name");
    auto ev = text::strip_terminal_punctuation(event);
    require(!ev.empty(), "self-emotion event is empty");
    SelfEmotion se;
    se.style = SelfEmotionStyle::RandomEvent;
    se.label = label;
    se.event = ev;
    se.rendered = fmt::format("{} is feeling {} because {}.", name, label.label, ev);
    return se;
}

SelfEmotion render_profile_event_emotion(std::string_view name, const EmotionLabel& label, std::string_view event,
                                         std::optional<std::string_view> context) {
    require(!text::trim(name).empty(), "self-emotion needs a speaker name");
    auto ev = text::strip_terminal_punctuation(event);
    require(!ev.empty(), "self-emotion event is empty");
    SelfEmotion se;
    se.style = SelfEmotionStyle::ProfileEvent;
    se.label = label;
    se.event = ev;
    se.rendered = fmt::format("{} is feeling {} after recalling {}", name, label.label, ev);
    if (context) {
        auto ctx = text::strip_terminal_punctuation(*context);
        if (!ctx.empty())
            se.rendered += ", even though " + ctx;
    }
    se.rendered += '.';
    return se;
}

EventCompletion parse_event_completion(std::string_view completion) {
    static const std::regex key(R"((?:^|[\s;*-])(label|emotion|event|context)\s*\**\s*:)", std::regex::icase);
    const std::string s(completion);
    struct Hit {
        std::string key;
        std::size_t value_start, key_start;
    };
    std::vector<Hit> hits;
    for (std::sregex_iterator it(s.begin(), s.end(), key), end; it != end; ++it)
        hits.push_back({text::lower((*it)[1].str()), static_cast<std::size_t>(it->position(0) + it->length(0)),
                        static_cast<std::size_t>(it->position(1))});

    EventCompletion out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        auto stop = i + 1 < hits.size() ? hits[i + 1].key_start : s.size();
        auto value = text::trim(s.substr(hits[i].value_start, stop - hits[i].value_start));
        while (!value.empty() && (value.back() == ';' || value.back() == '*'))
            value = text::trim(value.substr(0, value.size() - 1));
        const auto& k = hits[i].key;
        if ((k == "label" || k == "emotion") && out.label.empty())
            out.label = text::strip_terminal_punctuation(value);
        else if (k == "event" && out.event.empty())
            out.event = value;
        else if (k == "context" && !out.context && !text::strip_terminal_punctuation(value).empty())
            out.context = value;
    }
    if (out.label.empty() || text::strip_terminal_punctuation(out.event).empty())
        fail(ErrorCode::EmotionParseError, "completion lacks a label and an event: '" + s.substr(0, 200) + "'");
    return out;
}

const EmotionLabel& resolve_label(std::string_view raw, const LabelPool& pool) {
    if (const auto* l = pool.find(text::strip_terminal_punctuation(raw)))
        return *l;
    const EmotionLabel* match = nullptr;
    int count = 0;
    std::set<std::string> seen;
    for (const auto& tok : text::tokens(raw)) {
        if (!seen.insert(tok).second)
            continue;
        if (const auto* l = pool.find(tok)) {
            match = l;
            ++count;
        }
    }
    if (count == 1)
        return *match;
    fail(ErrorCode::LabelOutOfPool, "label '" + std::string(raw) + "' is not in the pool");
}

namespace {

std::string profile_summary(const AgentProfile& p) {
    std::string out = fmt::format("Name: {}\nAge: {}\n", p.name, p.age);
    if (!p.innate.empty())
        out += "Innate: " + text::join(p.innate, ", ") + "\n";
    if (!p.occupation.empty())
        out += "Occupation: " + p.occupation + "\n";
    if (!p.origin.empty())
        out += "Origin: " + p.origin + "\n";
    if (!p.gender.empty())
        out += "Gender: " + p.gender + "\n";
    if (!p.description.empty())
        out += "Description: " + p.description + "\n";
    return out;
}

template <class Render>
SelfEmotion generate_event(const std::string& template_name, const Bindings& b, const LabelPool& pool,
                           PromptRunner& llm, const std::string& tag, Render render) {
    for (int attempt = 0;; ++attempt) {
        auto completion = llm.ask(template_name, b, attempt == 0 ? tag : tag + "#retry");
        try {
            auto parsed = parse_event_completion(completion);
            const auto& label = resolve_label(parsed.label, pool);
            return render(label, parsed);
        } catch (const Error& e) {
            if (attempt >= 1 || (e.code() != ErrorCode::EmotionParseError && e.code() != ErrorCode::LabelOutOfPool))
                throw;
            spdlog::warn("{}: {}; retrying once", template_name, e.what());
        }
    }
}

} // namespace

SelfEmotion generate_random_event(const AgentProfile& profile, const LabelPool& pool, PromptRunner& llm,
                                  const std::string& tag) {
    profile.validate();
    const Bindings b{{"name", profile.call_name()}, {"profile", profile_summary(profile)},
                     {"labels", pool.joined_names()}};
    return generate_event("random_event", b, pool, llm, tag, [&](const EmotionLabel& label, const EventCompletion& c) {
        return render_event_emotion(profile.call_name(), label, c.event);
    });
}

SelfEmotion generate_profile_event(const AgentProfile& profile, const LabelPool& pool, PromptRunner& llm,
                                   const std::string& tag) {
    profile.validate();
    require(!text::trim(profile.description).empty(), "profile event needs a profile description");
    const Bindings b{{"name", profile.call_name()}, {"description", profile.description},
                     {"labels", pool.joined_names()}};
    return generate_event("profile_event", b, pool, llm, tag, [&](const EmotionLabel& label, const EventCompletion& c) {
        std::optional<std::string_view> ctx;
        if (c.context)
            ctx = *c.context;
        return render_profile_event_emotion(profile.call_name(), label, c.event, ctx);
    });
}

} // namespace emosim
