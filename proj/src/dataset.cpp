#include "emosim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "emosim/error.hpp"
#include "emosim/jsonl.hpp"
#include "emosim/rng.hpp"
#include "emosim/text.hpp"

namespace emosim {

void from_json(const json& j, ColumnMapping& m) {
    m.conversation_id = j.value("conversation_id", m.conversation_id);
    m.utterance_index = j.value("utterance_index", m.utterance_index);
    m.speaker = j.value("speaker", m.speaker);
    m.emotion = j.value("emotion", m.emotion);
    m.text = j.value("text", m.text);
}

std::vector<std::string> parse_csv_record(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

namespace {

std::string unescape_ed(std::string s) {
    static const std::string token = "_comma_";
    for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + 1))
        s.replace(pos, token.size(), ",");
    return text::trim(s);
}

std::optional<long> parse_long(const std::string& s) {
    long v = 0;
    auto t = text::trim(s);
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
        return std::nullopt;
    return v;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (text::trim(header[i]) == name)
            return i;
    fail(ErrorCode::SchemaMismatch, "column '" + name + "' not found in header");
}

} // namespace

IngestResult ingest_ed_text(std::string_view csv, const ColumnMapping& mapping) {
    auto rows = text::lines(csv);
    while (!rows.empty() && text::trim(rows.back()).empty())
        rows.pop_back();
    if (rows.empty())
        fail(ErrorCode::SchemaMismatch, "ED file has no header");

    const auto header = parse_csv_record(rows.front());
    const std::size_t c_conv = column(header, mapping.conversation_id);
    const std::size_t c_idx = column(header, mapping.utterance_index);
    const std::size_t c_spk = column(header, mapping.speaker);
    const std::size_t c_emo = column(header, mapping.emotion);
    const std::size_t c_txt = column(header, mapping.text);
    const std::size_t needed = std::max({c_conv, c_idx, c_spk, c_emo, c_txt}) + 1;

    struct Row {
        long index;
        std::string speaker;
        std::string text;
    };
    struct Conv {
        std::string emotion;
        std::vector<Row> rows;
    };
    std::vector<std::string> order;
    std::map<std::string, Conv> convs;

    IngestResult out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (text::trim(rows[r]).empty())
            continue;
        const auto f = parse_csv_record(rows[r]);
        std::optional<long> idx;
        if (f.size() >= needed)
            idx = parse_long(f[c_idx]);
        if (f.size() < needed || !idx || text::trim(f[c_conv]).empty() || text::trim(f[c_emo]).empty() ||
            text::trim(f[c_spk]).empty() || unescape_ed(f[c_txt]).empty()) {
            ++out.skipped_rows;
            continue;
        }
        const auto id = text::trim(f[c_conv]);
        auto [it, inserted] = convs.try_emplace(id);
        if (inserted) {
            order.push_back(id);
            it->second.emotion = text::lower(text::trim(f[c_emo]));
        }
        it->second.rows.push_back({*idx, text::trim(f[c_spk]), unescape_ed(f[c_txt])});
    }

    for (const auto& id : order) {
        auto& c = convs[id];
        std::stable_sort(c.rows.begin(), c.rows.end(), [](const Row& a, const Row& b) { return a.index < b.index; });
        auto t = Transcript::make(id);
        t.metadata["friend_emotion"] = c.emotion;
        const auto first_speaker = c.rows.front().speaker;
        for (const auto& row : c.rows)
            t.append(row.speaker, row.speaker == first_speaker ? "friend" : "me", row.text);
        out.conversations.push_back(std::move(t));
    }
    if (out.skipped_rows > 0)
        spdlog::info("ED ingest: skipped {} malformed rows", out.skipped_rows);
    return out;
}

IngestResult ingest_ed(const std::filesystem::path& path, const ColumnMapping& mapping) {
    if (!std::filesystem::is_regular_file(path))
        fail(ErrorCode::UnreadableFile, "ED file not found: " + path.string());
    return ingest_ed_text(jsonl::read_file(path), mapping);
}

namespace {

std::size_t word_count(std::string_view s) { return text::split(text::collapse_whitespace(s), ' ').size(); }

} // namespace

std::vector<TrainingInstance> export_seq2seq(const std::vector<Transcript>& conversations, const ExportOptions& options,
                                             const std::map<std::string, std::string>& se_lookup) {
    static const std::string kClosing = "Generate the response.";
    std::vector<TrainingInstance> out;
    for (const auto& conv : conversations) {
        if (conv.utterances.size() < 2)
            continue;
        auto emo = conv.metadata.find("friend_emotion");
        require(emo != conv.metadata.end() && !emo->second.empty(),
                "conversation " + conv.id + " has no friend emotion");

        std::string instruction = "I'm having a conversation with my friend. My friend is feeling " +
                                  text::as_sentence(emo->second);
        if (options.with_se) {
            auto se = se_lookup.find(conv.id);
            if (se == se_lookup.end() || text::trim(se->second).empty())
                fail(ErrorCode::MissingSelfEmotion, "no self-emotion for conversation " + conv.id);
            instruction += " " + text::as_sentence(se->second);
        }

        std::vector<std::string> turns;
        for (const auto& u : conv.utterances)
            turns.push_back(u.role_tag + ": " + text::as_sentence(u.text));

        for (std::size_t i = 1; i < conv.utterances.size(); ++i) {
            const auto& u = conv.utterances[i];
            if (u.role_tag != "me")
                continue;
            std::size_t first = 0;
            auto budget_words = [&](std::size_t from) {
                std::size_t n = word_count(instruction) + word_count(kClosing);
                for (std::size_t k = from; k < i; ++k)
                    n += word_count(turns[k]);
                return static_cast<double>(n) * options.token_factor;
            };
            while (first + 1 < i && budget_words(first) > static_cast<double>(options.token_budget))
                ++first;

            TrainingInstance inst;
            inst.input = instruction;
            for (std::size_t k = first; k < i; ++k)
                inst.input += " " + turns[k];
            inst.input += " " + kClosing;
            inst.label = "me: " + text::as_sentence(u.text) + " " + options.eos_token;
            inst.conversation_id = conv.id;
            inst.turn_index = u.turn_index;
            inst.se_mode = options.with_se;
            out.push_back(std::move(inst));
        }
    }
    return out;
}

DatasetSplit split(const std::vector<TrainingInstance>& instances, std::array<double, 3> ratios, std::uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    require(std::abs(sum - 1.0) <= 1e-9, "split ratios must sum to 1");
    for (double r : ratios)
        require(r >= 0.0, "split ratios must be non-negative");

    std::set<std::string> unique;
    for (const auto& inst : instances)
        unique.insert(inst.conversation_id);
    std::vector<std::string> ids(unique.begin(), unique.end());
    Rng rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.below(i)]);

    const auto n = static_cast<double>(ids.size());
    auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
    n_train = std::min(n_train, ids.size());
    auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * n));
    n_val = std::min(n_val, ids.size() - n_train);

    DatasetSplit out;
    std::map<std::string, int> part;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int p = i < n_train ? 0 : i < n_train + n_val ? 1 : 2;
        part[ids[i]] = p;
        out.conversation_ids[static_cast<std::size_t>(p)].push_back(ids[i]);
    }
    for (auto& v : out.conversation_ids)
        std::sort(v.begin(), v.end());
    for (const auto& inst : instances) {
        switch (part[inst.conversation_id]) {
        case 0: out.train.push_back(inst); break;
        case 1: out.val.push_back(inst); break;
        default: out.test.push_back(inst); break;
        }
    }
    return out;
}

std::string to_tsv(const std::vector<TrainingInstance>& instances) {
    auto clean = [](std::string s) {
        std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
        return s;
    };
    std::string out;
    for (const auto& i : instances)
        out += clean(i.input) + "\t" + clean(i.label) + "\n";
    return out;
}

void to_json(json& j, const TrainingInstance& t) {
    j = json{{"input", t.input},
             {"label", t.label},
             {"meta", {{"conversation_id", t.conversation_id}, {"turn_index", t.turn_index}, {"se_mode", t.se_mode}}}};
}

void from_json(const json& j, TrainingInstance& t) {
    t.input = j.at("input").get<std::string>();
    t.label = j.at("label").get<std::string>();
    const auto& m = j.at("meta");
    t.conversation_id = m.at("conversation_id").get<std::string>();
    t.turn_index = m.value("turn_index", std::size_t{0});
    t.se_mode = m.value("se_mode", false);
}

} // namespace emosim
