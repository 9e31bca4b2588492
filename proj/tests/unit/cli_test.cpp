#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <memory>
#include <sstream>

#include "emosim/jsonl.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
namespace t = emosim::testing;
using emosim::json;

namespace {

struct Run {
    int rc = -1;
    std::string err;
};

Run cli(const std::string& args, const t::TempDir& scratch) {
    const auto err_path = scratch / "stderr.txt";
    const std::string cmd =
        t::cli_path().string() + " --log-level off " + args + " > /dev/null 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = emosim::jsonl::read_file(err_path);
    return r;
}

std::string slurp(const fs::path& p) { return emosim::jsonl::read_file(p); }

std::size_t line_count(const fs::path& p) {
    const auto s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::string fixture(const std::string& name) { return (t::fixture_dir() / name).string(); }

} // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
    t::TempDir d;
    EXPECT_EQ(cli("frobnicate", d).rc, 2);
    EXPECT_EQ(cli("", d).rc, 2);
}

TEST(Cli, MissingConfigReportsStructuredError) {
    t::TempDir d;
    const auto r = cli("simulate-dialogue --config /nonexistent/config.json", d);
    EXPECT_EQ(r.rc, 1);
    const auto last = r.err.substr(r.err.rfind('{'));
    const auto j = json::parse(last);
    EXPECT_EQ(j.at("error"), "UnreadableFile");
}

TEST(Cli, InvalidConfigIsConfigError) {
    t::TempDir d;
    std::ofstream(d / "bad.json") << R"({"seed": 1, "bogus": true})";
    const auto r = cli("simulate-dialogue --config " + (d / "bad.json").string(), d);
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.err.find("\"ConfigError\""), std::string::npos) << r.err;
}

TEST(Cli, DialogueRecordReplayIsByteStable) {
    t::TempDir d;
    const auto cassette = (d / "dialogue.cassette").string();
    ASSERT_EQ(cli("simulate-dialogue --config " + fixture("dialogue.json") + " --out " + (d / "a").string(), d).rc, 0);
    ASSERT_EQ(cli("simulate-dialogue --config " + fixture("dialogue.json") + " --out " + (d / "b").string(), d).rc, 0);
    EXPECT_EQ(slurp(d / "a" / "results.jsonl"), slurp(d / "b" / "results.jsonl"));
    EXPECT_EQ(slurp(d / "a" / "report.csv"), slurp(d / "b" / "report.csv"));
    EXPECT_EQ(line_count(d / "a" / "results.jsonl"), 8u);

    const auto rows = emosim::jsonl::read_file(d / "a" / "results.jsonl");
    std::istringstream in(rows);
    std::string line;
    int filtered = 0;
    while (std::getline(in, line)) {
        const auto j = json::parse(line);
        EXPECT_EQ(j.at("seed"), 7);
        EXPECT_EQ(j.at("config_hash").get<std::string>().size(), 16u);
        filtered += j.at("filtered").get<bool>() ? 1 : 0;
    }
    EXPECT_EQ(filtered, 2);
    EXPECT_NE(rows.find("\"style\":\"random_label\""), std::string::npos);

}

TEST(Cli, DialogueRecordThenReplayOffline) {
    t::TempDir d;
    std::atomic<int> n{0};
    auto server = std::make_unique<t::StubServer>([&](const httplib::Request& req, httplib::Response& res) {
        if (req.body.find("Create profiles") != std::string::npos) {
            res.set_content(t::completion_body(std::string(t::kMarcusBlock) + "\n" + t::kSophieBlock), "application/json");
            return;
        }
        const int k = n++;
        res.set_content(t::completion_body(k % 2 == 0 ? "STRATEGIES: Encouraging\nDIALOGUE:\nme: Well done!\nfriend: Thanks."
                                                       : "STRATEGIES: Questioning\nDIALOGUE:\nme: How so?"),
                        "application/json");
    });
    auto cfg = json::parse(slurp(t::fixture_dir() / "dialogue.json"));
    cfg["backend"] = json{{"kind", "http"}, {"endpoint", server->url()}, {"model", "stub"}, {"max_retries", 0}};
    cfg["label_pool"] = (t::asset_dir() / "labels" / "ed_labels.csv").string();
    cfg["template_dir"] = (t::asset_dir() / "templates").string();
    cfg["dialogue"]["cases"] = fixture("cases.jsonl");
    std::ofstream(d / "http.json") << cfg.dump(1);
    const auto cassette = (d / "run.cassette").string();
    const auto config = (d / "http.json").string();

    ASSERT_EQ(cli("simulate-dialogue --record --cassette " + cassette + " --config " + config + " --out " +
                      (d / "live").string(),
                  d)
                  .rc,
              0);
    EXPECT_EQ(n.load(), 8);
    server.reset();

    ASSERT_EQ(cli("simulate-dialogue --cassette " + cassette + " --config " + config + " --out " + (d / "replay").string(), d)
                  .rc,
              0);
    EXPECT_EQ(slurp(d / "live" / "results.jsonl"), slurp(d / "replay" / "results.jsonl"));
    EXPECT_EQ(cli("simulate-dialogue --record --config " + config + " --out " + (d / "x").string(), d).rc, 1);
}

TEST(Cli, GroupReplayAndAnalysis) {
    t::TempDir d;
    ASSERT_EQ(cli("simulate-group --config " + fixture("group.json") + " --out " + (d / "a").string(), d).rc, 0)
        << cli("simulate-group --config " + fixture("group.json") + " --out " + (d / "x").string(), d).err;
    ASSERT_EQ(cli("simulate-group --config " + fixture("group.json") + " --out " + (d / "b").string(), d).rc, 0);
    for (const auto* f : {"paired_runs.jsonl", "decisions.jsonl", "transcripts.jsonl", "report.csv"})
        EXPECT_EQ(slurp(d / "a" / f), slurp(d / "b" / f)) << f;
    EXPECT_EQ(line_count(d / "a" / "paired_runs.jsonl"), 2u);
    EXPECT_NE(slurp(d / "a" / "report.txt").find("config_hash="), std::string::npos);

    ASSERT_EQ(cli("analyze-changes --paired " + (d / "a" / "paired_runs.jsonl").string() + " --out " +
                      (d / "changes").string(),
                  d)
                  .rc,
              0);
    EXPECT_EQ(slurp(d / "changes" / "report.csv"), slurp(d / "a" / "report.csv"));
}

TEST(Cli, EvaluateDialogueResults) {
    t::TempDir d;
    ASSERT_EQ(cli("simulate-dialogue --config " + fixture("dialogue.json") + " --out " + (d / "run").string(), d).rc, 0);
    ASSERT_EQ(cli("evaluate --results " + (d / "run" / "results.jsonl").string() + " --annotations " +
                      fixture("annotations.jsonl") + " --out " + (d / "eval").string(),
                  d)
                  .rc,
              0);
    EXPECT_TRUE(fs::exists(d / "eval" / "report.csv"));
    EXPECT_TRUE(fs::exists(d / "eval" / "flow.csv"));
    EXPECT_NE(slurp(d / "eval" / "report.txt").find("none"), std::string::npos);
}

TEST(Cli, ExportDatasetSplitsByConversation) {
    t::TempDir d;
    ASSERT_EQ(cli("export-dataset --config " + fixture("dataset.json") + " --out " + (d / "ds").string(), d).rc, 0);
    EXPECT_EQ(line_count(d / "ds" / "train.jsonl"), 16u);
    EXPECT_EQ(line_count(d / "ds" / "val.jsonl"), 2u);
    EXPECT_EQ(line_count(d / "ds" / "test.jsonl"), 2u);
    const auto first = slurp(d / "ds" / "train.jsonl");
    const auto j = json::parse(first.substr(0, first.find('\n')));
    EXPECT_NE(j.at("input").get<std::string>().find("I'm feeling calm because the weekend is near."), std::string::npos);
    EXPECT_EQ(j.at("meta").at("seed"), 3);
    const auto manifest = json::parse(slurp(d / "ds" / "split.json"));
    EXPECT_EQ(manifest.at("seed"), 3);
}
