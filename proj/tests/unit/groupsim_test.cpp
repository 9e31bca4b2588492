#include <gtest/gtest.h>

#include <map>

#include "emosim/error.hpp"
#include "emosim/gateway.hpp"
#include "emosim/groupsim.hpp"
#include "test_support.hpp"

using namespace emosim;
namespace t = emosim::testing;

namespace {

DiscussionState fresh_state(const Topic& topic = t::five_step_topic()) {
    DiscussionState s;
    s.group = t::six_member_group();
    s.topic = topic;
    s.history = Transcript::make("d");
    return s;
}

void script_agreeable_discussion(MockBackend& mock) {
    mock.register_script("/next_speaker$", {"next: architect", "next: structural engineer", "next: project manager"},
                         true);
    mock.register_script("/member_response$", {"I suggest option A.", "Option A works for me."}, true);
    mock.register_script("/agreement$", {"AGREED: go with option A (resolution: agreement)"}, true);
}

} // namespace

TEST(Resolution, StringForms) {
    EXPECT_EQ(resolution_from_string("Majority vote"), Resolution::Vote);
    EXPECT_EQ(resolution_from_string("single agent"), Resolution::SingleAgent);
    EXPECT_EQ(resolution_from_string("compromise"), Resolution::CompromisedAgreement);
    EXPECT_EQ(resolution_from_string("agreement"), Resolution::Agreement);
    EXPECT_FALSE(resolution_from_string("coin flip").has_value());
    for (auto r : {Resolution::Agreement, Resolution::Delegation, Resolution::Vote, Resolution::SingleAgent,
                   Resolution::CompromisedAgreement})
        EXPECT_EQ(resolution_from_string(to_string(r)), r);
}

TEST(Verdict, AgreedWithResolution) {
    const auto g = t::six_member_group();
    const auto v = parse_verdict("AGREED: use Kotlin (resolution: agreement)", g);
    EXPECT_EQ(v.kind, Verdict::Kind::Agreed);
    EXPECT_EQ(v.summary, "use Kotlin");
    EXPECT_EQ(v.resolution, Resolution::Agreement);
    EXPECT_EQ(v.decided_by.size(), 6u);
}

TEST(Verdict, ContinueAndGarbage) {
    const auto g = t::six_member_group();
    EXPECT_EQ(parse_verdict("CONTINUE", g).kind, Verdict::Kind::Continue);
    EXPECT_EQ(parse_verdict("We are still talking.", g).kind, Verdict::Kind::Continue);
    EXPECT_EQ(parse_verdict("AGREED:   ", g).kind, Verdict::Kind::Continue);
}

TEST(Verdict, VoteWithVotersAndDelegation) {
    const auto g = t::six_member_group();
    const auto v = parse_verdict("Thinking...\nAGREED: option B (resolution: vote, by: Brian Chen, Carla Diaz)", g);
    EXPECT_EQ(v.resolution, Resolution::Vote);
    EXPECT_EQ(v.decided_by, (std::vector<std::string>{g[1].id, g[2].id}));
    const auto d = parse_verdict("DELEGATED: the architect picks the style", g);
    EXPECT_EQ(d.kind, Verdict::Kind::Agreed);
    EXPECT_EQ(d.resolution, Resolution::Delegation);
    EXPECT_EQ(d.decided_by, (std::vector<std::string>{g[0].id}));
}

TEST(NextSpeaker, ManagerNamesAPosition) {
    auto s = fresh_state();
    MockBackend mock;
    mock.register_script(".*", {"next: structural engineer"});
    PromptRunner llm(mock, t::templates());
    EXPECT_EQ(next_speaker(s, llm), s.group[2].id);
    EXPECT_EQ(mock.requests()[0].temperature, 0.0);
}

TEST(NextSpeaker, UnparseableOutputFallsBackToFirstRosterMember) {
    auto s = fresh_state();
    MockBackend mock;
    mock.register_script(".*", {"hmm, hard to say", "next: manager"});
    PromptRunner llm(mock, t::templates());
    EXPECT_EQ(next_speaker(s, llm), s.group[0].id);
    EXPECT_EQ(next_speaker(s, llm), s.group[0].id);
}

TEST(NextSpeaker, GatewayFailureFallsBack) {
    auto s = fresh_state();
    MockBackend empty;
    PromptRunner llm(empty, t::templates());
    s.selections_in_step[s.group[0].id] = 1;
    EXPECT_EQ(next_speaker(s, llm), s.group[1].id);
}

TEST(NextSpeaker, FallbackCoversEveryMemberTwiceInTwelveTurns) {
    auto s = fresh_state();
    MockBackend mock;
    mock.register_script(".*", {"???"}, true);
    PromptRunner llm(mock, t::templates());
    std::map<std::string, int> picks;
    for (int turn = 0; turn < 12; ++turn) {
        const auto id = next_speaker(s, llm);
        ++s.selections_in_step[id];
        ++picks[id];
    }
    ASSERT_EQ(picks.size(), 6u);
    for (const auto& [id, n] : picks)
        EXPECT_EQ(n, 2) << id;
}

TEST(MemberRespond, PromptCarriesGoalPositionStepAndSelfEmotion) {
    auto s = fresh_state();
    s.group[3].self_emotion = render_event_emotion("Dev", {"anxious", Valence::Negative}, "his flat flooded");
    MockBackend mock;
    mock.register_script(".*", {"Dev Patel: I prefer brick."});
    PromptRunner llm(mock, t::templates());
    const auto said = member_respond(s.group[3], s, llm);
    EXPECT_EQ(said.value(), "I prefer brick.");
    const auto prompt = mock.requests()[0].prompt_text();
    for (const auto& needle : {s.group[3].goal, s.group[3].position, s.current_step(), s.group[3].self_emotion->rendered})
        EXPECT_NE(prompt.find(needle), std::string::npos) << needle;
}

TEST(MemberRespond, GatewayErrorMeansPass) {
    auto s = fresh_state();
    MockBackend empty;
    PromptRunner llm(empty, t::templates());
    EXPECT_FALSE(member_respond(s.group[1], s, llm).has_value());
}

TEST(CheckAgreement, TimeoutForcesDelegationButHonorsAgreement) {
    auto s = fresh_state();
    s.history.append(s.group[1].id, "architect", "hello").step_index = 0;
    s.rounds_in_step = 12;
    MockBackend mock;
    mock.register_script(".*", {"CONTINUE", "AGREED: brick (resolution: agreement)"});
    PromptRunner llm(mock, t::templates());
    const auto forced = check_agreement(s, llm);
    EXPECT_EQ(forced.kind, Verdict::Kind::ForcedDelegation);
    EXPECT_EQ(forced.resolution, Resolution::Delegation);
    EXPECT_EQ(forced.decided_by, (std::vector<std::string>{s.group[0].id}));
    EXPECT_EQ(check_agreement(s, llm).kind, Verdict::Kind::Agreed);

    s.rounds_in_step = 3;
    MockBackend cont;
    cont.register_script(".*", {"CONTINUE"});
    PromptRunner llm2(cont, t::templates());
    EXPECT_EQ(check_agreement(s, llm2).kind, Verdict::Kind::Continue);
}

TEST(RunDiscussion, OneStepImmediateAgreement) {
    MockBackend mock;
    mock.register_script("/next_speaker$", {"next: project manager"}, true);
    mock.register_script("/member_response$", {"Let's pick the hill site."}, true);
    mock.register_script("/agreement$", {"AGREED: the hill site (resolution: agreement)"}, true);
    PromptRunner llm(mock, t::templates());
    const auto run = run_discussion(t::six_member_group(), Topic{"house", {"choose the site"}}, {}, llm, 1);
    ASSERT_EQ(run.decisions.size(), 1u);
    EXPECT_EQ(run.decisions[0].resolution, Resolution::Agreement);
    EXPECT_EQ(run.decisions[0].summary, "the hill site");
    EXPECT_GE(run.transcript.utterances.size(), 1u);
    EXPECT_FALSE(run.budget_exceeded);
}

TEST(RunDiscussion, ScriptedFiveStepsAreDeterministic) {
    auto once = [] {
        MockBackend mock;
        script_agreeable_discussion(mock);
        PromptRunner llm(mock, t::templates());
        return run_discussion(t::six_member_group(), t::five_step_topic(), {}, llm, 77);
    };
    const auto a = once();
    const auto b = once();
    ASSERT_EQ(a.decisions.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_EQ(a.decisions[i].step_index, i);
    for (const auto& u : a.transcript.utterances) {
        EXPECT_NE(u.speaker_id, kManagerId);
        ASSERT_TRUE(u.step_index.has_value());
    }
    EXPECT_EQ(json(a).dump(), json(b).dump());
    EXPECT_EQ(a.transcript.metadata.at("leader"), t::six_member_group()[0].id);
    EXPECT_EQ(a.transcript.metadata.at("se_mode"), "none");
    EXPECT_NO_THROW(a.transcript.validate());
}

TEST(RunDiscussion, NeverAgreeingStepsTimeOutAtMaxRounds) {
    MockBackend mock;
    mock.register_script("/next_speaker$", {"???"}, true);
    mock.register_script("/member_response$", {"I disagree."}, true);
    mock.register_script("/agreement$", {"CONTINUE"}, true);
    PromptRunner llm(mock, t::templates());
    DiscussionConfig cfg;
    cfg.max_rounds = 12;
    const auto run = run_discussion(t::six_member_group(), Topic{"house", {"choose the site"}}, {}, llm, 3, cfg);
    ASSERT_EQ(run.decisions.size(), 1u);
    EXPECT_EQ(run.decisions[0].resolution, Resolution::Delegation);
    EXPECT_EQ(run.transcript.utterances.size(), 12u);
    std::map<std::string, int> by_speaker;
    for (const auto& u : run.transcript.utterances)
        ++by_speaker[u.speaker_id];
    EXPECT_EQ(by_speaker.size(), 6u);
    for (const auto& [id, n] : by_speaker)
        EXPECT_EQ(n, 2) << id;
}

TEST(RunDiscussion, GlobalBudgetMarksRemainingStepsDelegated) {
    MockBackend mock;
    mock.register_script("/next_speaker$", {"???"}, true);
    mock.register_script("/member_response$", {"Hmm."}, true);
    mock.register_script("/agreement$", {"CONTINUE"}, true);
    PromptRunner llm(mock, t::templates());
    DiscussionConfig cfg;
    cfg.max_rounds = 4;
    cfg.global_budget = 6;
    const auto run = run_discussion(t::six_member_group(), t::five_step_topic(), {}, llm, 3, cfg);
    EXPECT_TRUE(run.budget_exceeded);
    ASSERT_EQ(run.decisions.size(), 5u);
    EXPECT_EQ(run.transcript.utterances.size(), 6u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(run.decisions[i].step_index, i);
        EXPECT_EQ(run.decisions[i].resolution, Resolution::Delegation);
    }
}

TEST(RunDiscussion, SelfEmotionReachesOnlyTheTarget) {
    const auto g = t::six_member_group();
    SEAssignment se{g[4].id, render_label_emotion("Erin", {"furious", Valence::Negative})};
    MockBackend mock;
    script_agreeable_discussion(mock);
    PromptRunner llm(mock, t::templates());
    const auto run = run_discussion(g, t::five_step_topic(), se, llm, 5);
    EXPECT_EQ(run.transcript.metadata.at("se_target"), g[4].id);
    EXPECT_EQ(run.transcript.metadata.at("se_valence"), "negative");
    EXPECT_EQ(run.transcript.metadata.at("se_label"), "furious");
    for (const auto& r : mock.requests()) {
        if (r.request_tag.ends_with("/member_response")) {
            const bool has = r.prompt_text().find(se.self_emotion->rendered) != std::string::npos;
            const bool is_target = r.prompt_text().find(g[4].profile.name) != std::string::npos &&
                                   r.prompt_text().find(g[4].goal) != std::string::npos;
            if (has)
                EXPECT_TRUE(is_target);
        }
    }
    EXPECT_THROW(run_discussion(g, t::five_step_topic(), SEAssignment{"nobody", std::nullopt}, llm, 5), Error);
}

TEST(RunExperiment, BaselinePlusRunsWithFailuresRecorded) {
    MockBackend mock;
    mock.register_script("run-1/event", {"no label here"}, true);
    mock.register_script("/event", {"label: excited; event: a new puppy arrived"}, true);
    script_agreeable_discussion(mock);
    PromptRunner llm(mock, t::templates());
    const auto set = run_experiment(t::six_member_group(), t::five_step_topic(), 3, Valence::Positive, llm,
                                    t::ed_labels(), 99, {}, 2);
    EXPECT_EQ(set.baseline.decisions.size(), 5u);
    EXPECT_EQ(set.baseline.transcript.metadata.at("se_target"), "");
    ASSERT_EQ(set.runs.size(), 2u);
    ASSERT_EQ(set.errors.size(), 1u);
    EXPECT_NE(set.errors[0].find("run 1"), std::string::npos);
    for (const auto& r : set.runs) {
        ASSERT_TRUE(r.se.self_emotion.has_value());
        EXPECT_EQ(r.se.self_emotion->label.valence, Valence::Positive);
        EXPECT_EQ(r.decisions.size(), 5u);
    }
    const json j = set;
    EXPECT_EQ(json(j.get<PairedRunSet>()).dump(), j.dump());
}
