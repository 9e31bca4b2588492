#include "emosim/genesis.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include <spdlog/spdlog.h>

#include "emosim/error.hpp"
#include "emosim/text.hpp"

namespace emosim {

std::string_view to_string(MemberRole r) { return r == MemberRole::Leader ? "leader" : "member"; }

void Topic::validate() const {
    require(!steps.empty(), "topic '" + title + "' has no steps");
    std::set<std::string> seen;
    for (const auto& s : steps) {
        require(!text::trim(s).empty(), "topic '" + title + "' has an empty step");
        require(seen.insert(text::normalize(s)).second, "topic '" + title + "' repeats step '" + s + "'");
    }
}

void validate_group(const std::vector<GroupMember>& group) {
    require(group.size() >= 2, "a group needs at least two members");
    auto leaders = std::count_if(group.begin(), group.end(), [](const GroupMember& m) { return m.is_leader(); });
    require(leaders == 1, "a group needs exactly one leader, found " + std::to_string(leaders));
    std::set<std::string> ids;
    for (const auto& m : group) {
        require(!m.position.empty(), "member '" + m.profile.name + "' has no position");
        require(!m.id.empty() && ids.insert(m.id).second, "member ids must be unique and nonempty");
    }
}

const GroupMember& group_leader(const std::vector<GroupMember>& group) {
    auto it = std::find_if(group.begin(), group.end(), [](const GroupMember& m) { return m.is_leader(); });
    require(it != group.end(), "group has no leader");
    return *it;
}

namespace {

// One "Key: value" block; keys lowercased, continuation lines appended to the
// previous key.
using Block = std::map<std::string, std::string>;

std::vector<Block> parse_blocks(std::string_view completion, const std::set<std::string>& keys) {
    static const std::regex field(R"(^\s*(?:[-*]\s*)?\**\s*([A-Za-z][A-Za-z ]*?)\s*\**\s*:\s*\**\s*(.*)$)");
    std::vector<Block> blocks;
    std::string last_key;
    for (const auto& raw : text::lines(completion)) {
        const auto line = text::trim(raw);
        if (line.empty())
            continue;
        std::smatch m;
        if (std::regex_match(line, m, field)) {
            auto key = text::lower(text::collapse_whitespace(m[1].str()));
            if (keys.contains(key)) {
                if (blocks.empty() || blocks.back().contains(key))
                    blocks.emplace_back();
                blocks.back()[key] = text::trim(m[2].str());
                last_key = key;
                continue;
            }
        }
        if (!blocks.empty() && !last_key.empty()) {
            auto& v = blocks.back()[last_key];
            v += v.empty() ? line : " " + line;
        }
    }
    return blocks;
}

std::optional<int> leading_int(const std::string& s) {
    static const std::regex num(R"((\d{1,3}))");
    std::smatch m;
    if (!std::regex_search(s, m, num))
        return std::nullopt;
    return std::stoi(m[1].str());
}

std::vector<std::string> split_traits(const std::string& s) {
    std::vector<std::string> out;
    auto normalized = std::regex_replace(s, std::regex(R"(\s+and\s+|;)"), ",");
    for (const auto& part : text::split(normalized, ',')) {
        auto t = text::strip_terminal_punctuation(part);
        if (!t.empty())
            out.push_back(t);
    }
    return out;
}

AgentProfile profile_from_block(const Block& b, const std::vector<std::string>& required, ErrorCode code) {
    for (const auto& k : required) {
        auto it = b.find(k);
        if (it == b.end() || it->second.empty())
            fail(code, "profile block lacks '" + k + ":'");
    }
    AgentProfile p;
    auto get = [&](const std::string& k) {
        auto it = b.find(k);
        return it == b.end() ? std::string{} : it->second;
    };
    p.name = text::strip_terminal_punctuation(get("name"));
    auto parts = text::split(text::collapse_whitespace(p.name), ' ');
    p.first_name = b.contains("first name") ? get("first name") : parts.front();
    p.last_name = b.contains("last name") ? get("last name") : (parts.size() > 1 ? parts.back() : "");
    if (b.contains("age")) {
        auto age = leading_int(get("age"));
        if (!age)
            fail(code, "unreadable age '" + get("age") + "'");
        p.age = *age;
    }
    p.innate = split_traits(get("innate"));
    p.occupation = get("occupation");
    p.origin = get("origin");
    p.gender = get("gender");
    p.description = get("description");
    try {
        p.validate();
    } catch (const Error& e) {
        fail(code, e.what());
    }
    return p;
}

std::string member_slug(const std::string& name, std::set<std::string>& taken) {
    auto base = text::join(text::tokens(name), "-");
    if (base.empty())
        base = "member";
    auto id = base;
    for (int k = 2; !taken.insert(id).second; ++k)
        id = base + "-" + std::to_string(k);
    return id;
}

} // namespace

std::vector<AgentProfile> parse_profiles(std::string_view completion) {
    static const std::set<std::string> keys{"name",       "first name", "last name", "age",        "innate",
                                            "occupation", "origin",     "gender",    "description"};
    static const std::vector<std::string> required{"name",   "age",    "innate",     "occupation",
                                                   "origin", "gender", "description"};
    std::vector<AgentProfile> out;
    for (const auto& b : parse_blocks(completion, keys))
        out.push_back(profile_from_block(b, required, ErrorCode::ProfileParseError));
    if (out.empty())
        fail(ErrorCode::ProfileParseError, "no profile blocks in completion");
    return out;
}

std::string format_utterances(const std::vector<Utterance>& utterances) {
    std::string out;
    for (const auto& u : utterances) {
        out += u.role_tag.empty() ? u.speaker_id : u.role_tag;
        out += ": ";
        out += u.text;
        out += '\n';
    }
    if (!out.empty())
        out.pop_back();
    return out;
}

std::pair<AgentProfile, AgentProfile> generate_speaker_profiles(const std::vector<Utterance>& context,
                                                                PromptRunner& llm, const std::string& tag) {
    require(!context.empty(), "profile generation needs a nonempty context");
    const Bindings b{{"context", format_utterances(context)}};
    for (int attempt = 0;; ++attempt) {
        auto completion = llm.ask("profile_generation", b, attempt == 0 ? tag : tag + "#retry");
        try {
            auto profiles = parse_profiles(completion);
            if (profiles.size() != 2)
                fail(ErrorCode::ProfileParseError, "expected 2 profiles, got " + std::to_string(profiles.size()));
            return {profiles[0], profiles[1]};
        } catch (const Error& e) {
            if (attempt >= 1)
                throw;
            spdlog::warn("profile generation: {}; retrying once", e.what());
        }
    }
}

bool enforce_single_leader(std::vector<GroupMember>& group) {
    auto leaders = std::count_if(group.begin(), group.end(), [](const GroupMember& m) { return m.is_leader(); });
    if (leaders == 1 || group.empty())
        return false;
    spdlog::warn("group roster has {} leaders; promoting '{}' and demoting the rest", leaders,
                 group.front().profile.name);
    for (auto& m : group)
        m.role = MemberRole::Member;
    group.front().role = MemberRole::Leader;
    return true;
}

std::vector<GroupMember> parse_group(std::string_view completion, std::size_t size) {
    static const std::set<std::string> keys{"name", "role", "position", "goal",   "age",
                                            "gender", "description", "occupation", "origin", "innate"};
    static const std::vector<std::string> required{"name", "position", "goal", "age"};
    auto blocks = parse_blocks(completion, keys);
    if (blocks.size() != size)
        fail(ErrorCode::GroupParseError,
             "expected " + std::to_string(size) + " member blocks, got " + std::to_string(blocks.size()));

    std::vector<GroupMember> group;
    std::set<std::string> taken;
    for (const auto& b : blocks) {
        GroupMember m;
        m.profile = profile_from_block(b, required, ErrorCode::GroupParseError);
        m.position = text::strip_terminal_punctuation(b.at("position"));
        m.goal = b.at("goal");
        if (m.profile.occupation.empty())
            m.profile.occupation = m.position;
        auto role = b.contains("role") ? text::normalize(b.at("role")) : std::string("member");
        m.role = role.find("leader") != std::string::npos ? MemberRole::Leader : MemberRole::Member;
        m.id = member_slug(m.profile.name, taken);
        group.push_back(std::move(m));
    }
    enforce_single_leader(group);
    return group;
}

std::vector<GroupMember> generate_group(const std::string& description, std::size_t size, PromptRunner& llm,
                                        const std::string& tag) {
    require(size >= 2, "group size must be at least 2");
    const Bindings b{{"description", description}, {"size", std::to_string(size)}};
    for (int attempt = 0;; ++attempt) {
        auto completion = llm.ask("group_profile", b, attempt == 0 ? tag : tag + "#retry");
        try {
            auto group = parse_group(completion, size);
            validate_group(group);
            return group;
        } catch (const Error& e) {
            if (attempt >= 1)
                throw Error(ErrorCode::GroupParseError, e.what());
            spdlog::warn("group generation: {}; retrying once", e.what());
        }
    }
}

Topic parse_topic(const std::string& title, std::string_view completion) {
    // Find "1." / "1)" markers in sequence; each step runs to the next marker.
    static const std::regex marker(R"((?:^|\s)(\d+)[.)]\s+)");
    const std::string s(completion);
    struct Mark {
        std::size_t start, body;
    };
    std::vector<Mark> marks;
    int expected = 1;
    for (std::sregex_iterator it(s.begin(), s.end(), marker), end; it != end; ++it) {
        if (std::stoi((*it)[1].str()) != expected)
            continue;
        marks.push_back({static_cast<std::size_t>(it->position(1)),
                         static_cast<std::size_t>(it->position(0) + it->length(0))});
        ++expected;
    }
    if (marks.empty())
        fail(ErrorCode::TopicParseError, "no numbered list in completion");

    Topic t;
    t.title = title;
    for (std::size_t i = 0; i < marks.size(); ++i) {
        auto stop = i + 1 < marks.size() ? marks[i + 1].start : s.size();
        auto step = text::strip_terminal_punctuation(text::collapse_whitespace(s.substr(marks[i].body, stop - marks[i].body)));
        if (step.empty())
            fail(ErrorCode::TopicParseError, "empty step " + std::to_string(i + 1));
        t.steps.push_back(step);
    }
    try {
        t.validate();
    } catch (const Error& e) {
        fail(ErrorCode::TopicParseError, e.what());
    }
    return t;
}

Topic generate_topic_steps(const std::string& title, PromptRunner& llm, const std::string& tag) {
    require(!text::trim(title).empty(), "topic title is empty");
    const Bindings b{{"title", title}};
    for (int attempt = 0;; ++attempt) {
        auto completion = llm.ask("topic_steps", b, attempt == 0 ? tag : tag + "#retry");
        try {
            return parse_topic(title, completion);
        } catch (const Error& e) {
            if (attempt >= 1)
                throw;
            spdlog::warn("topic generation: {}; retrying once", e.what());
        }
    }
}

void to_json(json& j, const GroupMember& m) {
    j = json{{"id", m.id}, {"profile", m.profile}, {"role", to_string(m.role)}, {"position", m.position}, {"goal", m.goal}};
    j["self_emotion"] = m.self_emotion ? json(*m.self_emotion) : json(nullptr);
}

void from_json(const json& j, GroupMember& m) {
    m.id = j.at("id").get<std::string>();
    m.profile = j.at("profile").get<AgentProfile>();
    m.role = j.at("role").get<std::string>() == "leader" ? MemberRole::Leader : MemberRole::Member;
    m.position = j.at("position").get<std::string>();
    m.goal = j.value("goal", "");
    if (j.contains("self_emotion") && !j["self_emotion"].is_null())
        m.self_emotion = j["self_emotion"].get<SelfEmotion>();
    else
        m.self_emotion.reset();
}

void to_json(json& j, const Topic& t) { j = json{{"title", t.title}, {"steps", t.steps}}; }

void from_json(const json& j, Topic& t) {
    t.title = j.at("title").get<std::string>();
    t.steps = j.at("steps").get<std::vector<std::string>>();
}

} // namespace emosim
