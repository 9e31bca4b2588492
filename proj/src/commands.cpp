#include "emosim/commands.hpp"

#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <set>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "emosim/config.hpp"
#include "emosim/error.hpp"
#include "emosim/groupsim.hpp"
#include "emosim/jsonl.hpp"
#include "emosim/metrics.hpp"
#include "emosim/rng.hpp"
#include "emosim/text.hpp"

namespace emosim {

namespace fs = std::filesystem;

namespace {

int guarded(std::ostream& err, const std::function<void()>& body) {
    auto report = [&](std::string_view code, std::string_view message) {
        err << json{{"error", code}, {"message", message}}.dump() << "\n";
        return 1;
    };
    try {
        body();
        return 0;
    } catch (const Error& e) {
        return report(to_string(e.code()), e.what());
    } catch (const json::exception& e) {
        return report(to_string(ErrorCode::SchemaMismatch), e.what());
    } catch (const fs::filesystem_error& e) {
        return report(to_string(ErrorCode::UnreadableFile), e.what());
    } catch (const std::exception& e) {
        return report("InternalError", e.what());
    }
}

struct Session {
    RunConfig cfg;
    std::shared_ptr<Backend> backend;
    TemplateRegistry templates;
    LabelPool labels;
    fs::path out_dir;
    int jobs = 1;

    json stamp() const { return json{{"config_hash", cfg.hash}, {"seed", cfg.seed}}; }

    json stamped(json row) const {
        row["config_hash"] = cfg.hash;
        row["seed"] = cfg.seed;
        return row;
    }

    std::string header() const { return fmt::format("# config_hash={} seed={}\n", cfg.hash, cfg.seed); }
};

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

Session open_session(const CommandOptions& opts) {
    Session s;
    s.cfg = RunConfig::load(opts.config_path);
    s.jobs = opts.jobs > 0 ? opts.jobs : s.cfg.jobs;

    std::shared_ptr<Backend> inner;
    if (opts.cassette && opts.record)
        inner = record(s.cfg.backend, *opts.cassette);
    else if (opts.cassette)
        inner = replay(*opts.cassette, s.cfg.backend.strict_digest);
    else if (opts.record)
        fail(ErrorCode::ConfigError, "--record needs --cassette");
    else
        inner = make_backend(s.cfg.backend);
    s.backend = std::make_shared<ThrottledBackend>(inner, s.jobs);

    s.templates = TemplateRegistry::load(s.cfg.template_dir);
    s.labels = LabelPool::load(s.cfg.label_pool_path);
    s.out_dir = opts.out_dir ? *opts.out_dir : s.cfg.output_dir / (timestamp() + "-" + s.cfg.hash.substr(0, 8));
    fs::create_directories(s.out_dir);

    json snapshot = s.stamp();
    snapshot["config"] = s.cfg.document;
    jsonl::write_file(s.out_dir / "config.snapshot", snapshot.dump(2) + "\n");
    return s;
}

void write_lines(const fs::path& path, const std::vector<json>& rows) { jsonl::write_file(path, jsonl::dump(rows)); }

struct Analysis {
    std::string text;
    std::string csv;
};

Analysis analyze_sets(const std::vector<PairedRunSet>& sets) {
    std::vector<DecisionPair> pairs;
    std::vector<std::vector<StepStat>> se_stats, base_stats;
    std::size_t failed_runs = 0;
    for (const auto& set : sets) {
        auto p = decision_pairs(set);
        pairs.insert(pairs.end(), p.begin(), p.end());
        failed_runs += set.errors.size();
        for (const auto& run : set.runs) {
            se_stats.push_back(step_stats(run, run.se.target_member));
            base_stats.push_back(step_stats(set.baseline, run.se.target_member));
        }
    }
    const auto report = decision_change_rate(pairs);
    const auto se = discussion_stats(se_stats);
    const auto base = discussion_stats(base_stats);

    Analysis a;
    a.text = report.to_text();
    a.text += fmt::format("\nDiscussion stats (mean per step)\n{:<14}{:>10}{:>12}\n", "", "length", "frequency");
    a.text += fmt::format("{:<14}{:>10.2f}{:>12.2f}\n", "baseline", base.avg_length, base.target_frequency);
    a.text += fmt::format("{:<14}{:>10.2f}{:>12.2f}\n", "self-emotion", se.avg_length, se.target_frequency);
    a.text += fmt::format("\npairs: {}  failed runs: {}\n", pairs.size(), failed_runs);

    a.csv = report.to_csv();
    a.csv += "condition,avg_length,target_frequency\n";
    a.csv += fmt::format("baseline,{:.6f},{:.6f}\n", base.avg_length, base.target_frequency);
    a.csv += fmt::format("self_emotion,{:.6f},{:.6f}\n", se.avg_length, se.target_frequency);
    return a;
}

} // namespace

int cmd_simulate_dialogue(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto s = open_session(opts);
        if (!s.cfg.dialogue)
            fail(ErrorCode::ConfigError, "config has no dialogue block");
        const auto cases = jsonl::read_as<FixedContextCase>(s.cfg.dialogue->cases_path);

        ExperimentOptions eo;
        eo.modes = {s.cfg.dialogue->modes.begin(), s.cfg.dialogue->modes.end()};
        eo.jobs = s.jobs;
        eo.seed = s.cfg.seed;
        PromptRunner llm(*s.backend, s.templates, s.cfg.backend.model_name);
        const auto result = run_fixed_context_experiment(cases, eo, llm, s.labels);

        std::vector<json> rows;
        std::map<SeMode, std::size_t> totals;
        for (const auto& r : result.results) {
            rows.push_back(s.stamped(json(r)));
            ++totals[r.mode];
        }
        write_lines(s.out_dir / "results.jsonl", rows);

        std::string text = s.header() + fmt::format("cases: {}\nresults: {}\nfiltered: {}\n", cases.size(),
                                                    result.results.size(), result.filtered);
        std::string csv = s.header() + "mode,results,filtered\n";
        for (const auto& [mode, n] : totals) {
            const auto it = result.filtered_by_mode.find(mode);
            const std::size_t f = it == result.filtered_by_mode.end() ? 0 : it->second;
            text += fmt::format("  {:<14} {:>4} results, {:>4} filtered\n", to_string(mode), n, f);
            csv += fmt::format("{},{},{}\n", to_string(mode), n, f);
        }
        jsonl::write_file(s.out_dir / "report.txt", text);
        jsonl::write_file(s.out_dir / "report.csv", csv);
        out << text << "output: " << s.out_dir.string() << "\n";
    });
}

int cmd_simulate_group(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto s = open_session(opts);
        if (!s.cfg.group)
            fail(ErrorCode::ConfigError, "config has no group block");
        const auto& g = *s.cfg.group;
        PromptRunner llm(*s.backend, s.templates, s.cfg.backend.model_name);

        const auto group = generate_group(g.group_description, g.group_size, llm);
        const auto topic = generate_topic_steps(g.topic_title, llm);
        DiscussionConfig dc;
        dc.max_rounds = g.max_rounds;
        dc.global_budget = g.global_budget;

        std::vector<PairedRunSet> sets;
        for (Valence v : g.valences)
            sets.push_back(run_experiment(group, topic, g.n_runs, v, llm, s.labels, s.cfg.seed, dc, s.jobs));

        std::vector<json> paired, transcripts, decisions;
        for (const auto& set : sets) {
            paired.push_back(s.stamped(json(set)));
            auto emit = [&](const DiscussionRun& run, const std::string& label) {
                json t = run;
                t["valence"] = to_string(set.valence);
                t["run"] = label;
                transcripts.push_back(s.stamped(std::move(t)));
                for (const auto& d : run.decisions) {
                    json row = d;
                    row["valence"] = to_string(set.valence);
                    row["run"] = label;
                    row["topic"] = set.topic.title;
                    decisions.push_back(s.stamped(std::move(row)));
                }
            };
            emit(set.baseline, "baseline");
            for (std::size_t i = 0; i < set.runs.size(); ++i)
                emit(set.runs[i], fmt::format("run-{}", i));
        }
        write_lines(s.out_dir / "paired_runs.jsonl", paired);
        write_lines(s.out_dir / "transcripts.jsonl", transcripts);
        write_lines(s.out_dir / "decisions.jsonl", decisions);

        const auto a = analyze_sets(sets);
        jsonl::write_file(s.out_dir / "report.txt", s.header() + a.text);
        jsonl::write_file(s.out_dir / "report.csv", s.header() + a.csv);
        out << s.header() << a.text << "output: " << s.out_dir.string() << "\n";
    });
}

int cmd_export_dataset(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto cfg = RunConfig::load(opts.config_path);
        if (!cfg.dataset)
            fail(ErrorCode::ConfigError, "config has no dataset block");
        const auto& d = *cfg.dataset;
        const fs::path dir =
            opts.out_dir ? *opts.out_dir : cfg.output_dir / (timestamp() + "-" + cfg.hash.substr(0, 8));
        fs::create_directories(dir);
        const json stamp{{"config_hash", cfg.hash}, {"seed", cfg.seed}};
        json snapshot = stamp;
        snapshot["config"] = cfg.document;
        jsonl::write_file(dir / "config.snapshot", snapshot.dump(2) + "\n");

        const auto ingest = ingest_ed(d.ed_path, d.columns);
        std::map<std::string, std::string> se_lookup;
        if (d.se_lookup_path)
            se_lookup = json::parse(jsonl::read_file(*d.se_lookup_path)).get<std::map<std::string, std::string>>();
        ExportOptions eo;
        eo.with_se = d.with_se;
        eo.token_budget = d.token_budget;
        const auto instances = export_seq2seq(ingest.conversations, eo, se_lookup);
        const auto parts = split(instances, d.ratios, cfg.seed);

        const std::array<std::pair<const char*, const std::vector<TrainingInstance>*>, 3> named{
            {{"train", &parts.train}, {"val", &parts.val}, {"test", &parts.test}}};
        json manifest = stamp;
        manifest["ratios"] = d.ratios;
        manifest["format"] = d.format;
        manifest["with_se"] = d.with_se;
        for (std::size_t i = 0; i < named.size(); ++i) {
            const auto& [name, rows] = named[i];
            if (d.format == "tsv") {
                jsonl::write_file(dir / fmt::format("{}.tsv", name), to_tsv(*rows));
            } else {
                std::vector<json> lines;
                for (const auto& inst : *rows) {
                    json j = inst;
                    j["meta"]["config_hash"] = cfg.hash;
                    j["meta"]["seed"] = cfg.seed;
                    lines.push_back(std::move(j));
                }
                write_lines(dir / fmt::format("{}.jsonl", name), lines);
            }
            manifest["splits"][name] = {{"instances", rows->size()}, {"conversations", parts.conversation_ids[i]}};
        }
        jsonl::write_file(dir / "split.json", manifest.dump(2) + "\n");

        const std::string header = fmt::format("# config_hash={} seed={}\n", cfg.hash, cfg.seed);
        const std::string text =
            header + fmt::format("conversations: {}\nskipped rows: {}\ninstances: {}\ntrain/val/test: {}/{}/{}\n",
                                 ingest.conversations.size(), ingest.skipped_rows, instances.size(),
                                 parts.train.size(), parts.val.size(), parts.test.size());
        jsonl::write_file(dir / "report.txt", text);
        out << text << "output: " << dir.string() << "\n";
    });
}

int cmd_evaluate(const fs::path& results, const fs::path& annotations, const std::optional<fs::path>& out_dir,
                 std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!fs::is_regular_file(results))
            fail(ErrorCode::UnreadableFile, "results not found: " + results.string());
        if (!fs::is_regular_file(annotations))
            fail(ErrorCode::UnreadableFile, "annotations not found: " + annotations.string());
        const auto rows = jsonl::read(results);

        std::map<std::string, StrategyChoice> human;
        for (const auto& a : jsonl::read(annotations)) {
            StrategyChoice c;
            for (const auto& name : a.at("strategies").get<std::vector<std::string>>())
                c.add(strategy_from_name(name, StrategyPool::default_pool()));
            human[a.at("case_id").get<std::string>()] = std::move(c);
        }

        std::string stamp;
        std::map<std::string, std::vector<double>> per_mode;
        std::map<std::string, std::size_t> unannotated, filtered;
        std::vector<EmotionStrategy> flows;
        for (const auto& row : rows) {
            if (stamp.empty() && row.contains("config_hash"))
                stamp = fmt::format("# config_hash={} seed={}\n", row["config_hash"].get<std::string>(),
                                    row.value("seed", std::uint64_t{0}));
            const auto r = row.get<ContinuationResult>();
            const std::string mode(to_string(r.mode));
            if (r.filtered) {
                ++filtered[mode];
                continue;
            }
            auto it = human.find(r.case_id);
            if (it == human.end() || it->second.empty()) {
                ++unannotated[mode];
                continue;
            }
            per_mode[mode].push_back(strategy_accuracy(r.choice, it->second));
            if (r.self_emotion)
                flows.emplace_back(*r.self_emotion, r.choice);
        }

        std::string text = stamp + fmt::format("{:<14}{:>6}{:>10}{:>10}{:>12}\n", "mode", "n", "accuracy",
                                               "filtered", "unannotated");
        std::string csv = stamp + "mode,n,accuracy,filtered,unannotated\n";
        std::set<std::string> modes;
        for (const auto& [k, _] : per_mode)
            modes.insert(k);
        for (const auto* m : {&unannotated, &filtered})
            for (const auto& [k, _] : *m)
                modes.insert(k);
        for (const auto& mode : modes) {
            const auto& v = per_mode[mode];
            const std::string acc = v.empty() ? "-" : fmt::format("{:.2f}", aggregate_accuracy(v));
            text += fmt::format("{:<14}{:>6}{:>10}{:>10}{:>12}\n", mode, v.size(), acc, filtered[mode],
                                unannotated[mode]);
            csv += fmt::format("{},{},{},{},{}\n", mode, v.size(), acc, filtered[mode], unannotated[mode]);
        }
        if (out_dir) {
            fs::create_directories(*out_dir);
            jsonl::write_file(*out_dir / "report.txt", text);
            jsonl::write_file(*out_dir / "report.csv", csv);
            if (!flows.empty())
                jsonl::write_file(*out_dir / "flow.csv", emotion_strategy_flow(flows).edge_list_csv());
        }
        out << text;
    });
}

int cmd_analyze_changes(const fs::path& paired_runs, const std::optional<fs::path>& out_dir, std::ostream& out,
                        std::ostream& err) {
    return guarded(err, [&] {
        if (!fs::is_regular_file(paired_runs))
            fail(ErrorCode::UnreadableFile, "paired runs not found: " + paired_runs.string());
        const auto rows = jsonl::read(paired_runs);
        std::string stamp;
        std::vector<PairedRunSet> sets;
        for (const auto& row : rows) {
            if (stamp.empty() && row.contains("config_hash"))
                stamp = fmt::format("# config_hash={} seed={}\n", row["config_hash"].get<std::string>(),
                                    row.value("seed", std::uint64_t{0}));
            sets.push_back(row.get<PairedRunSet>());
        }
        const auto a = analyze_sets(sets);
        if (out_dir) {
            fs::create_directories(*out_dir);
            jsonl::write_file(*out_dir / "report.txt", stamp + a.text);
            jsonl::write_file(*out_dir / "report.csv", stamp + a.csv);
        }
        out << stamp << a.text;
    });
}

} // namespace emosim
