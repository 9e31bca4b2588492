#include "emosim/groupsim.hpp"

#include <algorithm>
#include <atomic>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "emosim/error.hpp"
#include "emosim/rng.hpp"
#include "emosim/text.hpp"

namespace emosim {

std::string_view to_string(Resolution r) {
    switch (r) {
    case Resolution::Agreement: return "agreement";
    case Resolution::Delegation: return "delegation";
    case Resolution::Vote: return "vote";
    case Resolution::SingleAgent: return "single_agent";
    case Resolution::CompromisedAgreement: return "compromised_agreement";
    }
    return "agreement";
}

std::optional<Resolution> resolution_from_string(std::string_view s) {
    const auto n = text::join(text::tokens(s), " ");
    if (n == "agreement" || n == "agreed" || n == "consensus")
        return Resolution::Agreement;
    if (n == "delegation" || n == "delegated")
        return Resolution::Delegation;
    if (n == "vote" || n == "voting" || n == "majority" || n == "majority vote")
        return Resolution::Vote;
    if (n == "single agent" || n == "single" || n == "individual" || n == "single person")
        return Resolution::SingleAgent;
    if (n == "compromise" || n == "compromised" || n == "compromised agreement")
        return Resolution::CompromisedAgreement;
    return std::nullopt;
}

std::size_t DiscussionState::utterances_in_step() const {
    return static_cast<std::size_t>(std::count_if(history.utterances.begin(), history.utterances.end(),
                                                  [&](const Utterance& u) { return u.step_index == step_index; }));
}

const GroupMember& DiscussionState::member(const std::string& id) const {
    auto it = std::find_if(group.begin(), group.end(), [&](const GroupMember& m) { return m.id == id; });
    require(it != group.end(), "unknown member id '" + id + "'");
    return *it;
}

void DiscussionState::close_step(Decision d) {
    require(!finished(), "discussion already finished");
    require(!d.summary.empty(), "decision summary is empty");
    d.step_index = step_index;
    decisions.push_back(std::move(d));
    ++step_index;
    rounds_in_step = 0;
    selections_in_step.clear();
    picked_since_check.clear();
}

namespace {

std::vector<std::string> all_ids(const std::vector<GroupMember>& group) {
    std::vector<std::string> ids;
    for (const auto& m : group)
        ids.push_back(m.id);
    return ids;
}

// Member named by free text: exact id/position/name first, then a unique
// member whose position or name occurs inside the text.
const GroupMember* find_member(std::string_view raw, const std::vector<GroupMember>& group) {
    const auto want = text::join(text::tokens(raw), " ");
    if (want.empty())
        return nullptr;
    auto norm = [](const std::string& s) { return text::join(text::tokens(s), " "); };
    for (const auto& m : group)
        if (want == norm(m.id) || want == norm(m.position) || want == norm(m.profile.name) ||
            want == norm(m.profile.first_name))
            return &m;
    const GroupMember* hit = nullptr;
    int hits = 0;
    const auto padded = " " + want + " ";
    for (const auto& m : group) {
        bool found = false;
        for (const auto& key : {norm(m.position), norm(m.profile.name), norm(m.profile.first_name)})
            if (!key.empty() && padded.find(" " + key + " ") != std::string::npos)
                found = true;
        if (found) {
            hit = &m;
            ++hits;
        }
    }
    return hits == 1 ? hit : nullptr;
}

std::string roster_text(const std::vector<GroupMember>& group) {
    std::string out;
    for (const auto& m : group)
        out += fmt::format("- {} ({}){}\n", m.profile.name, m.position, m.is_leader() ? ", leader" : "");
    if (!out.empty())
        out.pop_back();
    return out;
}

std::string history_text(const DiscussionState& state, std::size_t window, bool current_step_only) {
    std::vector<const Utterance*> picked;
    for (const auto& u : state.history.utterances)
        if (!current_step_only || u.step_index == state.step_index)
            picked.push_back(&u);
    const auto first = picked.size() > window ? picked.size() - window : 0;
    std::string out;
    for (std::size_t i = first; i < picked.size(); ++i) {
        const auto& u = *picked[i];
        const auto& m = state.member(u.speaker_id);
        out += fmt::format("{} ({}): {}\n", m.profile.name, m.position, u.text);
    }
    if (out.empty())
        return "(nothing yet)";
    out.pop_back();
    return out;
}

std::string decisions_text(const DiscussionState& state) {
    if (state.decisions.empty())
        return "(none yet)";
    std::string out;
    for (const auto& d : state.decisions)
        out += fmt::format("{}. {}: {}\n", d.step_index + 1, state.topic.steps.at(d.step_index), d.summary);
    out.pop_back();
    return out;
}

std::string fallback_speaker(const DiscussionState& state) {
    const GroupMember* best = nullptr;
    int best_count = 0;
    for (const auto& m : state.group) {
        auto it = state.selections_in_step.find(m.id);
        int c = it == state.selections_in_step.end() ? 0 : it->second;
        if (!best || c < best_count) {
            best = &m;
            best_count = c;
        }
    }
    return best->id;
}

std::string strip_speaker_prefix(std::string said, const GroupMember& m) {
    for (const auto& prefix : {m.profile.name + " (" + m.position + "):", m.profile.name + ":",
                               m.profile.first_name + ":", m.position + ":"}) {
        if (prefix.size() > 1 && text::istarts_with(said, prefix)) {
            said = text::trim(said.substr(prefix.size()));
            break;
        }
    }
    return said;
}

} // namespace

Verdict parse_verdict(std::string_view raw, const std::vector<GroupMember>& group) {
    static const std::regex continue_re(R"(^[^A-Za-z]*continue\b.*$)", std::regex::icase);
    static const std::regex agreed_re(R"(^[^A-Za-z]*(agreed?|delegated?)\s*\**\s*:\s*(.*)$)", std::regex::icase);
    static const std::regex detail_re(R"(\(\s*resolution\s*:\s*([^,;)]*)(?:[,;]\s*by\s*:\s*([^)]*))?\)\s*\.?\s*$)",
                                      std::regex::icase);

    const GroupMember* leader = nullptr;
    for (const auto& m : group)
        if (m.is_leader())
            leader = &m;

    for (const auto& raw_line : text::lines(raw)) {
        const auto line = text::trim(raw_line);
        std::smatch m;
        if (std::regex_match(line, m, continue_re))
            return Verdict{};
        if (!std::regex_match(line, m, agreed_re))
            continue;

        Verdict v;
        v.kind = Verdict::Kind::Agreed;
        const bool delegated = text::istarts_with(m[1].str(), "delegat");
        std::string body = m[2].str();
        std::string by;
        v.resolution = delegated ? Resolution::Delegation : Resolution::Agreement;
        std::smatch d;
        if (std::regex_search(body, d, detail_re)) {
            if (auto r = resolution_from_string(d[1].str()))
                v.resolution = *r;
            by = d[2].matched ? d[2].str() : "";
            body = body.substr(0, static_cast<std::size_t>(d.position(0)));
        }
        v.summary = text::strip_terminal_punctuation(text::collapse_whitespace(body));
        if (v.summary.empty())
            continue;

        for (const auto& name : text::split(by, ','))
            if (const auto* who = find_member(name, group))
                v.decided_by.push_back(who->id);
        if (v.decided_by.empty()) {
            if (v.resolution == Resolution::Delegation || v.resolution == Resolution::SingleAgent) {
                if (leader)
                    v.decided_by.push_back(leader->id);
            } else {
                v.decided_by = all_ids(group);
            }
        }
        return v;
    }
    return Verdict{};
}

std::string next_speaker(const DiscussionState& state, PromptRunner& llm, const DiscussionConfig& cfg,
                         const std::string& tag) {
    require(!state.finished(), "discussion already finished");
    const Bindings b{{"topic", state.topic.title},
                     {"step", state.current_step()},
                     {"roster", roster_text(state.group)},
                     {"history", history_text(state, cfg.history_window, false)}};
    std::string completion;
    try {
        completion = llm.ask("next_speaker", b, tag, cfg.judge_temperature);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::TemplateError)
            throw;
        spdlog::warn("manager call failed ({}); using round-robin fallback", e.what());
        return fallback_speaker(state);
    }

    static const std::regex next_re(R"(next\s*(?:speaker)?\s*\**\s*:\s*(.+))", std::regex::icase);
    std::smatch m;
    std::string named = completion;
    if (std::regex_search(completion, m, next_re))
        named = text::lines(m[1].str()).front();
    if (const auto* who = find_member(named, state.group))
        return who->id;
    spdlog::warn("unparseable manager output '{}'; using round-robin fallback", text::trim(completion).substr(0, 80));
    return fallback_speaker(state);
}

std::optional<std::string> member_respond(const GroupMember& member, const DiscussionState& state,
                                          PromptRunner& llm, const DiscussionConfig& cfg, const std::string& tag) {
    const Bindings b{{"name", member.profile.name},
                     {"position", member.position},
                     {"goal", member.goal},
                     {"topic", state.topic.title},
                     {"step", state.current_step()},
                     {"decisions", decisions_text(state)},
                     {"history", history_text(state, cfg.history_window, false)},
                     {"self_emotion", member.self_emotion ? member.self_emotion->rendered + "\n" : std::string{}}};
    try {
        auto said = strip_speaker_prefix(text::trim(llm.ask("member_response", b, tag, cfg.member_temperature)), member);
        if (said.empty())
            return std::nullopt;
        return said;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::TemplateError)
            throw;
        spdlog::warn("{} passes the turn: {}", member.id, e.what());
        return std::nullopt;
    }
}

Verdict check_agreement(const DiscussionState& state, PromptRunner& llm, const DiscussionConfig& cfg,
                        const std::string& tag) {
    require(!state.finished(), "discussion already finished");
    const bool timed_out = state.rounds_in_step >= cfg.max_rounds;
    const auto& leader = group_leader(state.group);

    Verdict v;
    if (state.utterances_in_step() > 0) {
        std::string members;
        for (const auto& m : state.group)
            members += fmt::format("- {} ({})\n", m.profile.name, m.position);
        const Bindings b{{"leader_name", leader.profile.name},
                         {"topic", state.topic.title},
                         {"step", state.current_step()},
                         {"members", members},
                         {"history", history_text(state, cfg.history_window, true)}};
        try {
            v = parse_verdict(llm.ask("agreement_check", b, tag, cfg.judge_temperature), state.group);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::TemplateError)
                throw;
            spdlog::warn("agreement check failed ({}); continuing", e.what());
        }
    } else {
        require(timed_out, "agreement check needs at least one utterance in the current step");
    }

    if (v.kind == Verdict::Kind::Continue && timed_out) {
        v.kind = Verdict::Kind::ForcedDelegation;
        v.resolution = Resolution::Delegation;
        v.summary = fmt::format("delegated to {}: {}", leader.profile.name, state.current_step());
        v.decided_by = {leader.id};
    }
    return v;
}

DiscussionRun run_discussion(const std::vector<GroupMember>& group, const Topic& topic, const SEAssignment& se,
                             PromptRunner& llm, std::uint64_t seed, const DiscussionConfig& cfg,
                             const std::string& tag_prefix) {
    validate_group(group);
    topic.validate();
    require(cfg.max_rounds >= 1, "max_rounds must be at least 1");

    DiscussionState state;
    state.group = group;
    for (auto& m : state.group)
        m.self_emotion.reset();
    if (se.target_member) {
        auto it = std::find_if(state.group.begin(), state.group.end(),
                               [&](const GroupMember& m) { return m.id == *se.target_member; });
        require(it != state.group.end(), "self-emotion target '" + *se.target_member + "' is not in the group");
        it->self_emotion = se.self_emotion;
    }
    state.topic = topic;
    state.history = Transcript::make(fmt::format("{}/{}", tag_prefix, text::hex64(seed)));
    auto& meta = state.history.metadata;
    meta["topic"] = topic.title;
    meta["seed"] = std::to_string(seed);
    meta["backend"] = llm.backend().id();
    meta["leader"] = group_leader(group).id;
    meta["se_target"] = se.target_member.value_or("");
    meta["se_valence"] = se.self_emotion ? std::string(to_string(se.self_emotion->label.valence)) : "";
    meta["se_label"] = se.self_emotion ? se.self_emotion->label.label : "";
    meta["se_mode"] = se.self_emotion ? std::string(to_string(se.self_emotion->style)) : "none";
    for (const auto& m : state.group)
        state.history.register_speaker(m.id);

    DiscussionRun run;
    const int budget = cfg.budget_for(topic);
    while (!state.finished()) {
        if (state.total_turns >= budget) {
            run.budget_exceeded = true;
            spdlog::warn("{}: global turn budget of {} exhausted at step {}", state.history.id, budget, state.step_index);
            const auto& leader = group_leader(state.group);
            while (!state.finished())
                state.close_step({0, "unresolved: " + state.current_step(), Resolution::Delegation, {leader.id}});
            break;
        }

        const auto turn_tag = fmt::format("{}/step-{}/turn-{}", tag_prefix, state.step_index, state.rounds_in_step);
        const auto speaker_id = next_speaker(state, llm, cfg, turn_tag + "/next_speaker");
        const auto& speaker = state.member(speaker_id);
        ++state.selections_in_step[speaker_id];
        ++state.rounds_in_step;
        ++state.total_turns;
        if (std::find(state.picked_since_check.begin(), state.picked_since_check.end(), speaker_id) ==
            state.picked_since_check.end())
            state.picked_since_check.push_back(speaker_id);

        if (auto said = member_respond(speaker, state, llm, cfg, turn_tag + "/member_response")) {
            auto& u = state.history.append(speaker_id, speaker.position, std::move(*said));
            u.step_index = state.step_index;
        }

        const bool cycle_done = state.picked_since_check.size() == state.group.size();
        const bool timed_out = state.rounds_in_step >= cfg.max_rounds;
        if (!(speaker.is_leader() || cycle_done || timed_out))
            continue;
        if (state.utterances_in_step() == 0 && !timed_out)
            continue;
        state.picked_since_check.clear();

        auto verdict = check_agreement(state, llm, cfg, turn_tag + "/agreement");
        if (verdict.kind == Verdict::Kind::Continue)
            continue;
        state.close_step({0, verdict.summary, verdict.resolution, verdict.decided_by});
    }

    run.transcript = std::move(state.history);
    run.decisions = std::move(state.decisions);
    run.se = se;
    return run;
}

PairedRunSet run_experiment(const std::vector<GroupMember>& group, const Topic& topic, int n_runs, Valence valence,
                            PromptRunner& llm, const LabelPool& labels, std::uint64_t seed,
                            const DiscussionConfig& cfg, int jobs) {
    require(n_runs >= 1, "run_experiment needs n_runs >= 1");
    require(valence != Valence::Neutral, "run_experiment valence must be positive or negative");
    validate_group(group);
    topic.validate();
    const auto pool = labels.only(valence);
    const std::string prefix = fmt::format("group/{}", to_string(valence));

    PairedRunSet out;
    out.topic = topic;
    out.valence = valence;
    out.seed = seed;
    out.group = group;
    out.baseline = run_discussion(group, topic, {}, llm, mix_seed(seed, 0), cfg, prefix + "/baseline");

    std::vector<std::optional<DiscussionRun>> runs(static_cast<std::size_t>(n_runs));
    std::vector<std::string> errors(runs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) {
            const auto sub = mix_seed(seed, i + 1);
            const auto tag = fmt::format("{}/run-{}", prefix, i);
            try {
                Rng rng(sub);
                const auto& target = group[rng.below(group.size())];
                SEAssignment se{target.id, generate_random_event(target.profile, pool, llm, tag + "/event")};
                runs[i] = run_discussion(group, topic, se, llm, sub, cfg, tag);
            } catch (const Error& e) {
                errors[i] = fmt::format("run {}: {}: {}", i, to_string(e.code()), e.what());
                spdlog::warn("{}", errors[i]);
            }
        }
    };
    const int threads = std::clamp(jobs, 1, n_runs);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool_threads;
        for (int t = 0; t < threads; ++t)
            pool_threads.emplace_back(worker);
    }

    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i])
            out.runs.push_back(std::move(*runs[i]));
        else
            out.errors.push_back(errors[i]);
    }
    return out;
}

void to_json(json& j, const Decision& d) {
    j = json{{"step_index", d.step_index}, {"summary", d.summary}, {"resolution", to_string(d.resolution)},
             {"decided_by", d.decided_by}};
}

void from_json(const json& j, Decision& d) {
    d.step_index = j.at("step_index").get<std::size_t>();
    d.summary = j.at("summary").get<std::string>();
    auto r = resolution_from_string(j.at("resolution").get<std::string>());
    if (!r)
        fail(ErrorCode::SchemaMismatch, "unknown resolution '" + j.at("resolution").get<std::string>() + "'");
    d.resolution = *r;
    d.decided_by = j.value("decided_by", std::vector<std::string>{});
}

void to_json(json& j, const SEAssignment& s) {
    j = json{{"target_member", s.target_member ? json(*s.target_member) : json(nullptr)},
             {"self_emotion", s.self_emotion ? json(*s.self_emotion) : json(nullptr)}};
}

void from_json(const json& j, SEAssignment& s) {
    s.target_member.reset();
    s.self_emotion.reset();
    if (j.contains("target_member") && !j["target_member"].is_null())
        s.target_member = j["target_member"].get<std::string>();
    if (j.contains("self_emotion") && !j["self_emotion"].is_null())
        s.self_emotion = j["self_emotion"].get<SelfEmotion>();
}

void to_json(json& j, const DiscussionRun& r) {
    j = json(r.transcript);
    j["decisions"] = r.decisions;
    j["se_assignment"] = r.se;
    j["budget_exceeded"] = r.budget_exceeded;
}

void from_json(const json& j, DiscussionRun& r) {
    r.transcript = j.get<Transcript>();
    r.decisions = j.value("decisions", std::vector<Decision>{});
    r.se = j.contains("se_assignment") ? j["se_assignment"].get<SEAssignment>() : SEAssignment{};
    r.budget_exceeded = j.value("budget_exceeded", false);
}

void to_json(json& j, const PairedRunSet& p) {
    j = json{{"topic", p.topic},       {"valence", to_string(p.valence)}, {"seed", p.seed},
             {"group", p.group},       {"baseline", p.baseline},          {"runs", p.runs},
             {"errors", p.errors}};
}

void from_json(const json& j, PairedRunSet& p) {
    p.topic = j.at("topic").get<Topic>();
    p.valence = valence_from_string(j.at("valence").get<std::string>());
    p.seed = j.value("seed", std::uint64_t{0});
    p.group = j.value("group", std::vector<GroupMember>{});
    p.baseline = j.at("baseline").get<DiscussionRun>();
    p.runs = j.value("runs", std::vector<DiscussionRun>{});
    p.errors = j.value("errors", std::vector<std::string>{});
}

} // namespace emosim
