#include "emosim/dialogue.hpp"

#include <algorithm>
#include <atomic>
#include <regex>
#include <thread>

#include <spdlog/spdlog.h>

#include "emosim/error.hpp"
#include "emosim/genesis.hpp"
#include "emosim/rng.hpp"
#include "emosim/text.hpp"

namespace emosim {

std::string_view to_string(SeMode m) {
    switch (m) {
    case SeMode::None: return "none";
    case SeMode::Label: return "label";
    case SeMode::RandomEvent: return "random_event";
    case SeMode::ProfileEvent: return "profile_event";
    }
    return "none";
}

SeMode se_mode_from_string(std::string_view s) {
    if (s == "none")
        return SeMode::None;
    if (s == "label")
        return SeMode::Label;
    if (s == "random_event")
        return SeMode::RandomEvent;
    if (s == "profile_event")
        return SeMode::ProfileEvent;
    fail(ErrorCode::InvalidArgument, "unknown self-emotion mode '" + std::string(s) + "'");
}

void FixedContextCase::validate() const {
    require(!id.empty(), "case without id");
    require(!context.empty(), "case " + id + " has an empty context");
    require(context.size() <= source_conversation.utterances.size(), "case " + id + ": context longer than source");
    for (std::size_t i = 0; i < context.size(); ++i)
        require(context[i].text == source_conversation.utterances[i].text,
                "case " + id + ": context is not a prefix of the source conversation");
    require(!friend_emotion.label.empty(), "case " + id + " has no friend emotion");
}

std::vector<Utterance> extract_context(const Transcript& conv) {
    if (conv.utterances.empty())
        fail(ErrorCode::EmptyConversation, "conversation " + conv.id + " has no utterances");
    const std::size_t n = conv.utterances.size() > 3 ? 3 : 1;
    return {conv.utterances.begin(), conv.utterances.begin() + static_cast<std::ptrdiff_t>(n)};
}

ParsedOutput parse_model_output(std::string_view text_in, const StrategyPool& pool) {
    static const std::regex strategies_re(R"(^[#*\s]*strateg(?:y|ies)\s*\**\s*:\s*\**\s*(.*)$)", std::regex::icase);
    static const std::regex dialogue_re(R"(^[#*\s]*dialogue\s*\**\s*:\s*\**\s*(.*)$)", std::regex::icase);
    static const std::regex turn_re(R"(^[-*\s]*\**(me|friend|you)\**\s*:\s*(.*)$)", std::regex::icase);

    const auto all = text::lines(text_in);
    std::optional<std::size_t> s_idx, d_idx;
    std::string strategy_text, first_dialogue;
    for (std::size_t i = 0; i < all.size(); ++i) {
        std::smatch m;
        const auto line = text::trim(all[i]);
        if (!s_idx && std::regex_match(line, m, strategies_re)) {
            s_idx = i;
            strategy_text = m[1].str();
        } else if (!d_idx && std::regex_match(line, m, dialogue_re)) {
            d_idx = i;
            first_dialogue = m[1].str();
        }
    }
    if (!s_idx)
        fail(ErrorCode::FormatError, "missing STRATEGIES section");
    if (!d_idx)
        fail(ErrorCode::FormatError, "missing DIALOGUE section");

    ParsedOutput out;
    for (const auto& part : text::split(strategy_text, ';')) {
        if (text::strip_terminal_punctuation(part).empty())
            continue;
        try {
            out.choice.add(strategy_from_name(part, pool));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UnknownStrategy)
                throw;
            out.warnings.push_back("dropped strategy '" + text::trim(part) + "'");
            spdlog::warn("{}", out.warnings.back());
        }
    }
    if (out.choice.empty())
        fail(ErrorCode::FormatError, "no known strategy in STRATEGIES section");

    std::vector<std::string> dialogue_lines;
    if (!text::trim(first_dialogue).empty())
        dialogue_lines.push_back(first_dialogue);
    const std::size_t stop = *s_idx > *d_idx ? *s_idx : all.size();
    for (std::size_t i = *d_idx + 1; i < stop; ++i)
        dialogue_lines.push_back(all[i]);

    for (const auto& raw : dialogue_lines) {
        const auto line = text::trim(raw);
        if (line.empty())
            continue;
        std::smatch m;
        if (std::regex_match(line, m, turn_re)) {
            auto who = text::lower(m[1].str());
            if (who == "you")
                who = "me";
            auto said = text::trim(m[2].str());
            if (!out.utterances.empty() && out.utterances.back().role_tag == who) {
                if (!said.empty())
                    out.utterances.back().text += " " + said;
                continue;
            }
            Utterance u;
            u.speaker_id = who;
            u.role_tag = who;
            u.text = said;
            u.turn_index = out.utterances.size();
            out.utterances.push_back(std::move(u));
        } else if (!out.utterances.empty()) {
            out.utterances.back().text += " " + line;
        }
    }
    std::erase_if(out.utterances, [](const Utterance& u) { return text::trim(u.text).empty(); });
    for (std::size_t i = 0; i < out.utterances.size(); ++i)
        out.utterances[i].turn_index = i;
    if (out.utterances.empty())
        fail(ErrorCode::FormatError, "DIALOGUE section has no me:/friend: lines");
    return out;
}

std::string build_continuation_prompt(const FixedContextCase& c, const PromptRunner& llm, const StrategyPool& pool) {
    std::string strategies;
    for (const auto& s : pool.entries())
        strategies += "- " + s.display_name + "\n";
    if (!strategies.empty())
        strategies.pop_back();
    Bindings b{{"friend_emotion", c.friend_emotion.label},
               {"context", format_utterances(c.context)},
               {"strategies", strategies}};
    if (c.self_emotion) {
        b["self_emotion"] = c.self_emotion->rendered;
        return llm.render("conversation_with_se", b);
    }
    return llm.render("conversation_no_se", b);
}

ContinuationResult continue_conversation(const FixedContextCase& c, PromptRunner& llm, const StrategyPool& pool,
                                         const std::string& tag) {
    c.validate();
    const auto prompt = build_continuation_prompt(c, llm, pool);
    ContinuationResult r;
    r.case_id = c.id;
    r.self_emotion = c.self_emotion;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto req = ChatRequest::make(attempt == 0 ? tag : tag + "#retry", {}, prompt);
        req.model = llm.model();
        r.raw_completion = llm.backend().complete(req).text;
        r.attempts = attempt + 1;
        try {
            auto parsed = parse_model_output(r.raw_completion, pool);
            r.choice = std::move(parsed.choice);
            r.continuation = std::move(parsed.utterances);
            for (auto& u : r.continuation)
                u.turn_index += c.context.size();
            r.warnings = std::move(parsed.warnings);
            r.filtered = false;
            r.error.reset();
            return r;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::FormatError)
                throw;
            r.filtered = true;
            r.error = std::string(to_string(e.code())) + ": " + e.what();
        }
    }
    spdlog::info("case {} filtered: {}", c.id, *r.error);
    return r;
}

namespace {

ContinuationResult filtered_result(const std::string& case_id, SeMode mode, const Error& e) {
    ContinuationResult r;
    r.case_id = case_id;
    r.mode = mode;
    r.filtered = true;
    r.error = std::string(to_string(e.code())) + ": " + e.what();
    return r;
}

std::vector<ContinuationResult> run_case(const FixedContextCase& input, const ExperimentOptions& options,
                                         PromptRunner& llm, const LabelPool& labels, const StrategyPool& pool) {
    std::vector<ContinuationResult> out;
    const std::string prefix = "dialogue/" + input.id;

    FixedContextCase base = input;
    std::optional<Error> case_error;
    try {
        if (base.context.empty())
            base.context = extract_context(base.source_conversation);
        const auto* fe = labels.find(base.friend_emotion.label);
        if (!fe)
            fail(ErrorCode::LabelOutOfPool, "friend emotion '" + base.friend_emotion.label + "' is not in the pool");
        base.friend_emotion = *fe;
        base.validate();
    } catch (const Error& e) {
        case_error = e;
    }

    std::optional<Error> profile_error;
    const bool needs_profiles = std::any_of(options.modes.begin(), options.modes.end(),
                                            [](SeMode m) { return m != SeMode::None; });
    if (!case_error && needs_profiles && !base.profiles) {
        try {
            base.profiles = generate_speaker_profiles(base.context, llm, prefix + "/profiles");
        } catch (const Error& e) {
            profile_error = e;
        }
    }

    for (SeMode mode : options.modes) {
        if (case_error) {
            out.push_back(filtered_result(input.id, mode, *case_error));
            continue;
        }
        if (mode != SeMode::None && profile_error) {
            out.push_back(filtered_result(input.id, mode, *profile_error));
            continue;
        }
        const std::string tag = prefix + "/" + std::string(to_string(mode));
        try {
            FixedContextCase c = base;
            if (mode == SeMode::None) {
                c.self_emotion.reset();
            } else {
                const auto& me = c.profiles->second;
                const auto want = mode == SeMode::Label         ? SelfEmotionStyle::RandomLabel
                                  : mode == SeMode::RandomEvent ? SelfEmotionStyle::RandomEvent
                                                                : SelfEmotionStyle::ProfileEvent;
                if (!c.self_emotion || c.self_emotion->style != want) {
                    if (mode == SeMode::Label) {
                        Rng rng(mix_seed(options.seed, text::fnv1a64(input.id)));
                        c.self_emotion = render_label_emotion(me.call_name(), sample_label(labels, rng));
                    } else if (mode == SeMode::RandomEvent) {
                        c.self_emotion = generate_random_event(me, labels, llm, tag + "/event");
                    } else {
                        c.self_emotion = generate_profile_event(me, labels, llm, tag + "/event");
                    }
                }
            }
            auto r = continue_conversation(c, llm, pool, tag + "/continue");
            r.mode = mode;
            out.push_back(std::move(r));
        } catch (const Error& e) {
            out.push_back(filtered_result(input.id, mode, e));
        }
    }
    return out;
}

} // namespace

ExperimentResult run_fixed_context_experiment(const std::vector<FixedContextCase>& cases,
                                              const ExperimentOptions& options, PromptRunner& llm,
                                              const LabelPool& labels, const StrategyPool& pool) {
    require(!cases.empty(), "fixed-context experiment needs at least one case");
    require(!options.modes.empty(), "fixed-context experiment needs at least one mode");

    std::vector<std::vector<ContinuationResult>> per_case(cases.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            try {
                per_case[i] = run_case(cases[i], options, llm, labels, pool);
            } catch (const std::exception& e) {
                // Anything not already absorbed per mode (e.g. a non-Error exception).
                per_case[i].clear();
                for (SeMode m : options.modes)
                    per_case[i].push_back(filtered_result(cases[i].id, m, Error(ErrorCode::TransportError, e.what())));
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(cases.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool_threads;
        for (int j = 0; j < jobs; ++j)
            pool_threads.emplace_back(worker);
    }

    ExperimentResult out;
    for (auto& rs : per_case)
        for (auto& r : rs) {
            if (r.filtered) {
                ++out.filtered;
                ++out.filtered_by_mode[r.mode];
            }
            out.results.push_back(std::move(r));
        }
    return out;
}

void to_json(json& j, const FixedContextCase& c) {
    j = json{{"id", c.id}, {"source_conversation", c.source_conversation}, {"context", c.context},
             {"friend_emotion", c.friend_emotion}};
    if (c.profiles)
        j["profiles"] = json::array({c.profiles->first, c.profiles->second});
    if (c.self_emotion)
        j["self_emotion"] = *c.self_emotion;
}

void from_json(const json& j, FixedContextCase& c) {
    c.id = j.at("id").get<std::string>();
    c.source_conversation = j.at("source_conversation").get<Transcript>();
    c.context = j.value("context", std::vector<Utterance>{});
    c.friend_emotion = j.at("friend_emotion").get<EmotionLabel>();
    c.profiles.reset();
    if (j.contains("profiles") && j["profiles"].is_array() && j["profiles"].size() == 2)
        c.profiles = std::make_pair(j["profiles"][0].get<AgentProfile>(), j["profiles"][1].get<AgentProfile>());
    c.self_emotion.reset();
    if (j.contains("self_emotion") && !j["self_emotion"].is_null())
        c.self_emotion = j["self_emotion"].get<SelfEmotion>();
}

void to_json(json& j, const ContinuationResult& r) {
    j = json{{"case_id", r.case_id},
             {"mode", to_string(r.mode)},
             {"choice", r.choice},
             {"continuation", r.continuation},
             {"raw_completion", r.raw_completion},
             {"filtered", r.filtered},
             {"warnings", r.warnings},
             {"attempts", r.attempts}};
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    j["self_emotion"] = r.self_emotion ? json(*r.self_emotion) : json(nullptr);
}

void from_json(const json& j, ContinuationResult& r) {
    r.case_id = j.at("case_id").get<std::string>();
    r.mode = se_mode_from_string(j.at("mode").get<std::string>());
    r.choice = j.at("choice").get<StrategyChoice>();
    r.continuation = j.at("continuation").get<std::vector<Utterance>>();
    r.raw_completion = j.value("raw_completion", "");
    r.filtered = j.at("filtered").get<bool>();
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.attempts = j.value("attempts", 0);
    r.error.reset();
    if (j.contains("error") && !j["error"].is_null())
        r.error = j["error"].get<std::string>();
    r.self_emotion.reset();
    if (j.contains("self_emotion") && !j["self_emotion"].is_null())
        r.self_emotion = j["self_emotion"].get<SelfEmotion>();
}

} // namespace emosim
