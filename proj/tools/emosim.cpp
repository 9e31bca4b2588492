#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "emosim/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"emosim: self-emotion dialogue and group-discussion simulator"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    emosim::CommandOptions opts;
    std::string cassette;
    std::string out_dir;
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "run configuration (JSON)")->required();
        sub->add_option("--cassette", cassette, "cassette file for replay, or for recording with --record");
        sub->add_flag("--record", opts.record, "record live responses into --cassette");
        sub->add_option("--jobs", opts.jobs, "max concurrent gateway calls")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "exact output directory");
    };

    auto* dialogue = app.add_subcommand("simulate-dialogue", "continue fixed-context conversations");
    add_run_flags(dialogue);
    auto* group = app.add_subcommand("simulate-group", "run paired group discussions");
    add_run_flags(group);
    auto* dataset = app.add_subcommand("export-dataset", "export seq2seq training data");
    add_run_flags(dataset);

    std::string results, annotations, paired;
    auto* evaluate = app.add_subcommand("evaluate", "strategy accuracy against human annotations");
    evaluate->add_option("--results", results, "results.jsonl")->required();
    evaluate->add_option("--annotations", annotations, "annotations JSONL")->required();
    evaluate->add_option("--out", out_dir, "report directory");
    auto* analyze = app.add_subcommand("analyze-changes", "decision change rates and discussion stats");
    analyze->add_option("--paired", paired, "paired_runs.jsonl")->required();
    analyze->add_option("--out", out_dir, "report directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    spdlog::set_default_logger(spdlog::stderr_color_mt("emosim"));
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (!cassette.empty())
        opts.cassette = cassette;
    std::optional<std::filesystem::path> out;
    if (!out_dir.empty())
        out = out_dir;
    opts.out_dir = out;

    if (*dialogue)
        return emosim::cmd_simulate_dialogue(opts, std::cout, std::cerr);
    if (*group)
        return emosim::cmd_simulate_group(opts, std::cout, std::cerr);
    if (*dataset)
        return emosim::cmd_export_dataset(opts, std::cout, std::cerr);
    if (*evaluate)
        return emosim::cmd_evaluate(results, annotations, out, std::cout, std::cerr);
    return emosim::cmd_analyze_changes(paired, out, std::cout, std::cerr);
}
