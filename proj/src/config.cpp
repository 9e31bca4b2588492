#include "emosim/config.hpp"

#include <algorithm>

#include "emosim/error.hpp"
#include "emosim/jsonl.hpp"
#include "emosim/text.hpp"

namespace emosim {

namespace {

using Path = std::filesystem::path;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    fail(ErrorCode::ConfigError, where + ": " + what);
}

const json* field(const json& obj, const char* key, json::value_t type, const std::string& where, bool required) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (required)
            bad(where, std::string("missing '") + key + "'");
        return nullptr;
    }
    const bool ok = type == json::value_t::number_integer
                        ? it->is_number_integer()
                        : type == json::value_t::number_float ? it->is_number() : it->type() == type;
    if (!ok)
        bad(where, std::string("'") + key + "' has the wrong type");
    return &*it;
}

std::string str(const json& obj, const char* key, const std::string& where, bool required = false,
                std::string fallback = {}) {
    auto* v = field(obj, key, json::value_t::string, where, required);
    return v ? v->get<std::string>() : fallback;
}

Path existing(const Path& base, const std::string& raw, const std::string& where) {
    Path p = raw;
    if (p.is_relative())
        p = base / p;
    if (!std::filesystem::exists(p))
        bad(where, "path does not exist: " + p.string());
    return p;
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object())
        bad(where, "expected an object");
    for (const auto& [k, _] : obj.items()) {
        bool known = false;
        for (const char* allowed : keys)
            known = known || k == allowed;
        if (!known)
            bad(where, "unknown key '" + k + "'");
    }
}

BackendConfig parse_backend(const json& j, const Path& base) {
    const std::string where = "backend";
    only_keys(j, {"kind", "endpoint", "model", "timeout_ms", "max_retries", "backoff_ms", "cassette", "mock_script",
                  "strict_digest"},
              where);
    BackendConfig b;
    const auto kind = str(j, "kind", where, true);
    if (kind == "http")
        b.kind = BackendKind::Http;
    else if (kind == "mock")
        b.kind = BackendKind::Mock;
    else if (kind == "replay")
        b.kind = BackendKind::Replay;
    else
        bad(where, "kind must be http, mock or replay");
    if (auto* v = field(j, "endpoint", json::value_t::string, where, false))
        b.endpoint = v->get<std::string>();
    b.model_name = str(j, "model", where, false, b.model_name);
    if (auto* v = field(j, "timeout_ms", json::value_t::number_integer, where, false))
        b.timeout = std::chrono::milliseconds(v->get<long>());
    if (auto* v = field(j, "max_retries", json::value_t::number_integer, where, false))
        b.max_retries = v->get<int>();
    if (auto* v = field(j, "backoff_ms", json::value_t::number_integer, where, false))
        b.backoff_base = std::chrono::milliseconds(v->get<long>());
    if (auto* v = field(j, "cassette", json::value_t::string, where, false)) {
        Path p = v->get<std::string>();
        b.cassette_path = p.is_relative() ? base / p : p;
    }
    if (auto* v = field(j, "mock_script", json::value_t::string, where, false))
        b.mock_script_path = existing(base, v->get<std::string>(), where);
    if (auto* v = field(j, "strict_digest", json::value_t::boolean, where, false))
        b.strict_digest = v->get<bool>();
    if (b.kind == BackendKind::Replay && b.cassette_path && !std::filesystem::exists(*b.cassette_path))
        bad(where, "cassette does not exist: " + b.cassette_path->string());
    try {
        b.validate();
    } catch (const Error& e) {
        bad(where, e.what());
    }
    return b;
}

Valence valence_from(const std::string& s, const std::string& where) {
    if (s == "positive")
        return Valence::Positive;
    if (s == "negative")
        return Valence::Negative;
    if (s == "neutral")
        return Valence::Neutral;
    bad(where, "unknown valence '" + s + "'");
}

} // namespace

RunConfig RunConfig::parse(const json& doc, const std::filesystem::path& base_dir) {
    only_keys(doc, {"backend", "seed", "se_mode", "label_pool", "template_dir", "output_dir", "jobs", "dialogue",
                    "group", "dataset"},
              "config");
    RunConfig c;
    c.document = doc;
    c.hash = text::hex64(text::fnv1a64(doc.dump()));

    c.backend = parse_backend(*field(doc, "backend", json::value_t::object, "config", true), base_dir);
    c.seed = field(doc, "seed", json::value_t::number_integer, "config", true)->get<std::uint64_t>();
    if (auto* v = field(doc, "se_mode", json::value_t::string, "config", false)) {
        try {
            c.se_mode = se_mode_from_string(v->get<std::string>());
        } catch (const Error& e) {
            bad("config", e.what());
        }
    }
    c.label_pool_path = existing(base_dir, str(doc, "label_pool", "config", true), "config");
    c.template_dir = existing(base_dir, str(doc, "template_dir", "config", true), "config");
    Path out = str(doc, "output_dir", "config", false, "runs");
    c.output_dir = out.is_relative() ? base_dir / out : out;
    if (auto* v = field(doc, "jobs", json::value_t::number_integer, "config", false)) {
        c.jobs = v->get<int>();
        if (c.jobs < 1)
            bad("config", "jobs must be >= 1");
    }

    if (auto* d = field(doc, "dialogue", json::value_t::object, "config", false)) {
        only_keys(*d, {"cases", "modes"}, "dialogue");
        DialogueBlock b;
        b.cases_path = existing(base_dir, str(*d, "cases", "dialogue", true), "dialogue");
        if (auto* m = field(*d, "modes", json::value_t::array, "dialogue", false)) {
            for (const auto& s : *m) {
                if (!s.is_string())
                    bad("dialogue", "modes must be strings");
                try {
                    b.modes.push_back(se_mode_from_string(s.get<std::string>()));
                } catch (const Error& e) {
                    bad("dialogue", e.what());
                }
            }
        } else {
            b.modes = {SeMode::None, c.se_mode};
        }
        c.dialogue = std::move(b);
    }

    if (auto* g = field(doc, "group", json::value_t::object, "config", false)) {
        only_keys(*g, {"topic", "description", "size", "n_runs", "valences", "max_rounds", "global_budget"}, "group");
        GroupBlock b;
        b.topic_title = str(*g, "topic", "group", true);
        b.group_description = str(*g, "description", "group", false, "a team of colleagues");
        if (auto* v = field(*g, "size", json::value_t::number_integer, "group", false))
            b.group_size = v->get<std::size_t>();
        if (auto* v = field(*g, "n_runs", json::value_t::number_integer, "group", false))
            b.n_runs = v->get<int>();
        if (auto* v = field(*g, "max_rounds", json::value_t::number_integer, "group", false))
            b.max_rounds = v->get<int>();
        if (auto* v = field(*g, "global_budget", json::value_t::number_integer, "group", false))
            b.global_budget = v->get<int>();
        if (auto* v = field(*g, "valences", json::value_t::array, "group", false)) {
            b.valences.clear();
            for (const auto& s : *v) {
                if (!s.is_string())
                    bad("group", "valences must be strings");
                b.valences.push_back(valence_from(s.get<std::string>(), "group"));
            }
        }
        if (b.group_size < 2 || b.n_runs < 1 || b.max_rounds < 1 || b.global_budget < 0 || b.valences.empty())
            bad("group", "size >= 2, n_runs >= 1, max_rounds >= 1 and a valence are required");
        c.group = std::move(b);
    }

    if (auto* d = field(doc, "dataset", json::value_t::object, "config", false)) {
        only_keys(*d, {"ed_path", "columns", "ratios", "with_se", "se_lookup", "format", "token_budget"}, "dataset");
        DatasetBlock b;
        b.ed_path = existing(base_dir, str(*d, "ed_path", "dataset", true), "dataset");
        if (auto* v = field(*d, "columns", json::value_t::object, "dataset", false))
            b.columns = v->get<ColumnMapping>();
        if (auto* v = field(*d, "ratios", json::value_t::array, "dataset", false)) {
            if (v->size() != 3 || !std::all_of(v->begin(), v->end(), [](const json& x) { return x.is_number(); }))
                bad("dataset", "ratios must hold three numbers");
            for (std::size_t i = 0; i < 3; ++i)
                b.ratios[i] = (*v)[i].get<double>();
        }
        if (auto* v = field(*d, "with_se", json::value_t::boolean, "dataset", false))
            b.with_se = v->get<bool>();
        if (auto* v = field(*d, "se_lookup", json::value_t::string, "dataset", false))
            b.se_lookup_path = existing(base_dir, v->get<std::string>(), "dataset");
        b.format = str(*d, "format", "dataset", false, b.format);
        if (b.format != "jsonl" && b.format != "tsv")
            bad("dataset", "format must be jsonl or tsv");
        if (auto* v = field(*d, "token_budget", json::value_t::number_integer, "dataset", false))
            b.token_budget = v->get<std::size_t>();
        if (b.with_se && !b.se_lookup_path)
            bad("dataset", "with_se requires se_lookup");
        c.dataset = std::move(b);
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path))
        fail(ErrorCode::UnreadableFile, "config not found: " + path.string());
    json doc;
    try {
        doc = json::parse(jsonl::read_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    return parse(doc, std::filesystem::absolute(path).parent_path());
}

} // namespace emosim
