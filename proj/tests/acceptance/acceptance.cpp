#include <bitset>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "emosim/dataset.hpp"
#include "emosim/dialogue.hpp"
#include "emosim/error.hpp"
#include "emosim/gateway.hpp"
#include "emosim/groupsim.hpp"
#include "emosim/jsonl.hpp"
#include "emosim/metrics.hpp"
#include "emosim/text.hpp"
#include "test_support.hpp"

using namespace emosim;
namespace t = emosim::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void check(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome cosine_accuracy() {
    Outcome o;
    const auto& pool = StrategyPool::default_pool();
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<unsigned> mask(1, (1u << pool.size()) - 1);
    const auto choice = [&](unsigned bits) {
        StrategyChoice c;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (bits & (1u << i))
                c.add(pool[i]);
        return c;
    };
    const auto start = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const unsigned a = mask(gen), b = mask(gen);
        const double na = std::bitset<32>(a).count(), nb = std::bitset<32>(b).count();
        const double oracle = static_cast<double>(std::bitset<32>(a & b).count()) / std::sqrt(na * nb);
        worst = std::max(worst, std::abs(strategy_accuracy(choice(a), choice(b)) - oracle));
        o.check(strategy_accuracy(choice(a), choice(a)) == 1.0, "identity is not 1");
        const unsigned disjoint = ~a & ((1u << pool.size()) - 1);
        if (disjoint != 0)
            o.check(strategy_accuracy(choice(a), choice(disjoint)) == 0.0, "disjoint is not 0");
    }
    const double elapsed = seconds_since(start);
    o.check(worst <= 1e-12, fmt::format("max error {:.3e}", worst));
    o.check(elapsed < 1.0, fmt::format("took {:.3f}s", elapsed));
    if (o.ok)
        o.detail = fmt::format("max error {:.1e}, {:.3f}s", worst, elapsed);
    return o;
}

Outcome accuracy_table_averages() {
    Outcome o;
    const std::vector<std::vector<double>> columns{{0.3376, 0.2773, 0.1500, 0.3367, 0.4541},
                                                   {0.3313, 0.3427, 0.3013, 0.3887, 0.4069},
                                                   {0.3575, 0.2807, 0.2860, 0.4220, 0.4736},
                                                   {0.3232, 0.4027, 0.2373, 0.3987, 0.3894}};
    const std::vector<double> published{31.11, 35.42, 36.40, 35.03};
    std::string got;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const double avg = aggregate_accuracy(columns[c]);
        o.check(std::abs(avg - published[c]) <= 0.005, fmt::format("column {} averages {:.4f}", c, avg));
        got += fmt::format("{}{:.3f}", c ? " " : "", avg);
    }
    if (o.ok)
        o.detail = got;
    return o;
}

Outcome change_rate_table() {
    Outcome o;
    struct Row {
        std::string topic;
        int pos_changed, pos_total, neg_changed, neg_total;
        double pos, neg, all;
    };
    const std::vector<Row> rows{{"House design", 38, 70, 20, 30, 54.29, 66.67, 58.00},
                                {"Trip to Italy", 31, 70, 17, 30, 44.29, 56.67, 48.00},
                                {"Charity Event", 26, 49, 17, 21, 53.06, 80.95, 61.43},
                                {"Hosting Party", 24, 49, 13, 21, 48.98, 61.90, 52.86},
                                {"APP development", 38, 70, 20, 30, 54.29, 66.67, 58.00}};
    std::vector<DecisionPair> pairs;
    const auto add = [&](const std::string& topic, Valence v, int changed, int total) {
        for (int i = 0; i < total; ++i) {
            const auto step = static_cast<std::size_t>(i % 5);
            Decision before{step, "plan " + std::to_string(i), Resolution::Agreement, {}};
            Decision after = before;
            if (i < changed)
                after.summary = "another plan " + std::to_string(i);
            pairs.push_back({topic, v, before, after});
        }
    };
    for (const auto& r : rows) {
        add(r.topic, Valence::Positive, r.pos_changed, r.pos_total);
        add(r.topic, Valence::Negative, r.neg_changed, r.neg_total);
    }
    const auto report = decision_change_rate(pairs);
    o.check(report.topics.size() == rows.size(), "topic count");
    for (std::size_t i = 0; o.ok && i < rows.size(); ++i) {
        const auto& tr = report.topics[i];
        o.check(tr.topic == rows[i].topic, "topic order");
        o.check(tr.positive && round_to(*tr.positive, 2) == rows[i].pos, tr.topic + " pos");
        o.check(tr.negative && round_to(*tr.negative, 2) == rows[i].neg, tr.topic + " neg");
        o.check(tr.all && round_to(*tr.all, 2) == rows[i].all, tr.topic + " all");
    }
    o.check(report.positive && std::abs(*report.positive - 50.98) <= 0.01, "positive average");
    o.check(report.negative && std::abs(*report.negative - 66.57) <= 0.01, "negative average");
    o.check(report.all && std::abs(*report.all - 55.66) <= 0.01, "all average");
    if (o.ok)
        o.detail = fmt::format("{:.3f} {:.3f} {:.3f}", *report.positive, *report.negative, *report.all);
    return o;
}

Outcome context_rule() {
    Outcome o;
    for (std::size_t n = 1; n <= 10; ++n) {
        const auto conv = t::conversation("c", n);
        const auto ctx = extract_context(conv);
        const std::size_t want = n > 3 ? 3 : 1;
        o.check(ctx.size() == want, fmt::format("length {} gave {} utterances", n, ctx.size()));
        for (std::size_t i = 0; o.ok && i < ctx.size(); ++i)
            o.check(ctx[i] == conv.utterances[i], fmt::format("length {} is not a prefix", n));
    }
    try {
        extract_context(Transcript::make("empty"));
        o.check(false, "empty conversation accepted");
    } catch (const Error& e) {
        o.check(e.code() == ErrorCode::EmptyConversation, "wrong error for empty conversation");
    }
    return o;
}

Outcome export_format() {
    Outcome o;
    auto conv = Transcript::make("c");
    conv.metadata["friend_emotion"] = "proud";
    for (int i = 1; i <= 4; ++i)
        conv.append(i % 2 ? "a" : "b", i % 2 ? "friend" : "me", "<utterance_" + std::to_string(i) + ">");
    const std::string head = "I'm having a conversation with my friend. My friend is feeling proud.";
    const std::string se = "I'm feeling disappointed because my project application has been rejected.";
    const std::string tail = " friend: <utterance_1>. me: <utterance_2>. friend: <utterance_3>. Generate the response.";
    const auto plain = export_seq2seq({conv}, {});
    ExportOptions with;
    with.with_se = true;
    const auto withse = export_seq2seq({conv}, with, {{"c", se}});
    o.check(plain.size() == 2 && withse.size() == 2, "instance count");
    if (!o.ok)
        return o;
    o.check(plain[1].input == head + tail, "input without self-emotion");
    o.check(withse[1].input == head + " " + se + tail, "input with self-emotion");
    o.check(plain[1].label == "me: <utterance_4>. <eos_token>" && withse[1].label == plain[1].label, "label");
    return o;
}

void script_agreeable(MockBackend& mock) {
    mock.register_script("/next_speaker$", {"next: architect", "next: structural engineer", "next: project manager"},
                         true);
    mock.register_script("/member_response$", {"I suggest option A.", "Option A works for me."}, true);
    mock.register_script("/agreement$", {"AGREED: go with option A (resolution: agreement)"}, true);
}

Outcome scripted_discussion() {
    Outcome o;
    const auto start = Clock::now();
    const auto group = t::six_member_group();
    const auto topic = t::five_step_topic();
    const auto run_once = [&] {
        MockBackend mock;
        script_agreeable(mock);
        PromptRunner llm(mock, t::templates());
        return run_discussion(group, topic, {}, llm, 42);
    };
    const auto a = run_once();
    const auto b = run_once();
    o.check(a.decisions.size() == 5, fmt::format("{} decisions", a.decisions.size()));
    for (std::size_t i = 0; o.ok && i < a.decisions.size(); ++i) {
        o.check(a.decisions[i].step_index == i, "step order");
        o.check(a.decisions[i].resolution == Resolution::Agreement, "resolution");
        o.check(a.decisions[i].summary == "go with option A", "summary");
    }
    o.check(a.transcript.utterances.size() == 15, fmt::format("{} utterances", a.transcript.utterances.size()));
    for (const auto& u : a.transcript.utterances)
        o.check(u.step_index.has_value() && u.speaker_id != std::string(kManagerId), "utterance tagging");
    o.check(!a.budget_exceeded, "budget exceeded");
    o.check(json(a).dump() == json(b).dump(), "runs differ");
    const double elapsed = seconds_since(start);
    o.check(elapsed < 5.0, fmt::format("took {:.2f}s", elapsed));
    if (o.ok)
        o.detail = fmt::format("{} utterances, {:.3f}s", a.transcript.utterances.size(), elapsed);
    return o;
}

Outcome forced_delegation() {
    Outcome o;
    const auto group = t::six_member_group();
    const Topic topic{"house", {"choose the site"}};
    MockBackend agree;
    script_agreeable(agree);
    PromptRunner agree_llm(agree, t::templates());
    const auto baseline = run_discussion(group, topic, {}, agree_llm, 1);

    MockBackend stall;
    stall.register_script("/next_speaker$", {"???"}, true);
    stall.register_script("/member_response$", {"I disagree."}, true);
    stall.register_script("/agreement$", {"CONTINUE"}, true);
    PromptRunner stall_llm(stall, t::templates());
    DiscussionConfig cfg;
    const auto stalled = run_discussion(group, topic, {}, stall_llm, 1, cfg);
    o.check(stalled.decisions.size() == 1, "decision count");
    if (!o.ok)
        return o;
    o.check(stalled.decisions[0].resolution == Resolution::Delegation, "not delegated");
    o.check(stalled.transcript.utterances.size() == static_cast<std::size_t>(cfg.max_rounds),
            fmt::format("{} utterances", stalled.transcript.utterances.size()));
    o.check(classify_decision_change(baseline.decisions[0], stalled.decisions[0]) ==
                DecisionChangeCategory::UndecidedChange,
            "pair not classified as undecided");
    return o;
}

Outcome malformed_completions() {
    Outcome o;
    std::vector<FixedContextCase> cases;
    for (int i = 0; i < 20; ++i) {
        FixedContextCase c;
        c.id = fmt::format("case-{}", i);
        c.source_conversation = t::conversation(c.id, 2 + i % 5);
        c.context = extract_context(c.source_conversation);
        c.friend_emotion = {"proud", Valence::Positive};
        cases.push_back(std::move(c));
    }
    MockBackend mock;
    mock.register_script(".*", {"I would rather not answer in that format.", "STRATEGIES: Nonsense\nDIALOGUE:\nme: hi",
                                "DIALOGUE:\nme: missing strategies", ""},
                         true);
    PromptRunner llm(mock, t::templates());
    ExperimentResult r;
    try {
        r = run_fixed_context_experiment(cases, {}, llm, t::ed_labels());
    } catch (const std::exception& e) {
        o.check(false, std::string("threw: ") + e.what());
        return o;
    }
    o.check(r.results.size() == 20, "result count");
    o.check(r.filtered == 20, fmt::format("{} filtered", r.filtered));
    o.check(r.filtered_by_mode[SeMode::None] == 20, "per-mode count");
    for (const auto& res : r.results)
        o.check(res.filtered && res.error.has_value(), res.case_id + " not filtered");
    if (o.ok)
        o.detail = fmt::format("filtered {}/{}", r.filtered, r.results.size());
    return o;
}

Outcome record_replay() {
    Outcome o;
    t::TempDir dir;
    const auto cassette = dir / "cassette.jsonl";
    std::vector<FixedContextCase> cases;
    for (int i = 0; i < 10; ++i) {
        FixedContextCase c;
        c.id = fmt::format("rr-{}", i);
        c.source_conversation = t::conversation(c.id, 1 + i % 6, "sad");
        c.context = extract_context(c.source_conversation);
        c.friend_emotion = {"sad", Valence::Negative};
        cases.push_back(std::move(c));
    }
    const auto run = [&](Backend& backend) {
        PromptRunner llm(backend, t::templates(), "stub-model");
        const auto r = run_fixed_context_experiment(cases, {}, llm, t::ed_labels());
        std::string out;
        for (const auto& res : r.results)
            out += json(res).dump() + "\n";
        return out;
    };
    std::string live;
    int hits = 0;
    {
        std::atomic<int> n{0};
        t::StubServer server([&](const httplib::Request&, httplib::Response& res) {
            const int k = n++;
            res.set_content(t::completion_body(fmt::format("STRATEGIES: Sympathizing\nDIALOGUE:\nme: reply {}\nfriend: ok", k)),
                            "application/json");
        });
        BackendConfig cfg;
        cfg.kind = BackendKind::Http;
        cfg.endpoint = server.url();
        cfg.max_retries = 0;
        auto recorder = record(cfg, cassette);
        live = run(*recorder);
        hits = server.hits();
    }
    ReplayBackend replayer(cassette);
    const auto offline = run(replayer);
    o.check(hits == 10, fmt::format("{} live calls", hits));
    o.check(replayer.size() == 10, "cassette size");
    const auto h1 = text::hex64(text::fnv1a64(live)), h2 = text::hex64(text::fnv1a64(offline));
    o.check(h1 == h2, "replayed results differ");
    if (o.ok)
        o.detail = "hash " + h1;
    return o;
}

Outcome discussion_length_and_frequency() {
    Outcome o;
    const auto group = t::six_member_group();
    const std::string target = group[2].id;
    DiscussionRun run;
    run.transcript = Transcript::make("r");
    run.decisions = {Decision{0, "a", Resolution::Agreement, {}}, Decision{1, "b", Resolution::Agreement, {}}};
    const std::vector<std::size_t> target_counts{8, 9};
    for (std::size_t step = 0; step < 2; ++step)
        for (std::size_t i = 0; i < 39; ++i) {
            const auto& speaker = i < target_counts[step] ? target : group[i % 2 == 0 ? 0 : 1].id;
            run.transcript.append(speaker, "member", "words").step_index = step;
        }
    const std::vector<std::vector<StepStat>> runs{step_stats(run, target)};
    const auto stats = discussion_stats(runs);
    o.check(stats.steps == 2, "step count");
    o.check(round_to(stats.avg_length, 2) == 39.00, fmt::format("length {:.2f}", stats.avg_length));
    o.check(round_to(stats.target_frequency, 2) == 8.50, fmt::format("frequency {:.2f}", stats.target_frequency));
    if (o.ok)
        o.detail = fmt::format("{:.2f} {:.2f}", stats.avg_length, stats.target_frequency);
    return o;
}

} // namespace

int main() {
    spdlog::set_level(spdlog::level::off);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"strategy accuracy matches the cosine oracle", cosine_accuracy},
        {"accuracy column averages", accuracy_table_averages},
        {"decision change rate table", change_rate_table},
        {"fixed context extraction rule", context_rule},
        {"seq2seq export format", export_format},
        {"scripted six member discussion", scripted_discussion},
        {"stalled step ends in forced delegation", forced_delegation},
        {"malformed completions are filtered", malformed_completions},
        {"record and replay give identical results", record_replay},
        {"discussion length and target frequency", discussion_length_and_frequency},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += o.ok ? 0 : 1;
        std::printf("[%s] %zu. %s%s%s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.empty() ? "" : " : ", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
