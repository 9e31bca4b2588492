#include <gtest/gtest.h>

#include <regex>

#include "emosim/error.hpp"
#include "emosim/gateway.hpp"
#include "emosim/templates.hpp"
#include "test_support.hpp"

using namespace emosim;
using emosim::testing::templates;

TEST(PromptTemplate, PlaceholdersAndRender) {
    PromptTemplate t{"greet", "Hello {{name}}, meet {{ other }}. Bye {{name}}.", {"name"}};
    EXPECT_EQ(t.placeholders(), (std::set<std::string>{"name", "other"}));
    EXPECT_EQ(t.render({{"name", "Ann"}, {"other", "Bo"}}), "Hello Ann, meet Bo. Bye Ann.");
}

TEST(PromptTemplate, UnboundPlaceholderFails) {
    PromptTemplate t{"greet", "Hello {{name}} and {{other}}", {}};
    try {
        t.render({{"name", "Ann"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TemplateError);
    }
}

TEST(PromptTemplate, RequiredPlaceholderMustAppearInBody) {
    PromptTemplate t{"x", "no slots", {"name"}};
    EXPECT_THROW(t.validate(), Error);
}

TEST(TemplateRegistry, ShippedAssetsCoverEveryStage) {
    const auto& reg = templates();
    EXPECT_EQ(reg.version(), "1");
    EXPECT_EQ(reg.size(), TemplateRegistry::standard_names().size());
    EXPECT_EQ(TemplateRegistry::standard_names().size(), 10u);
    for (const auto& name : TemplateRegistry::standard_names())
        EXPECT_TRUE(reg.contains(name)) << name;
}

TEST(TemplateRegistry, CompleteBindingLeavesNoPlaceholders) {
    static const std::regex slot(R"(\{\{\s*[A-Za-z_][A-Za-z0-9_]*\s*\}\})");
    for (const auto& name : TemplateRegistry::standard_names()) {
        const auto& t = templates().get(name);
        Bindings b;
        for (const auto& p : t.placeholders())
            b[p] = "value-of-" + p;
        const auto out = t.render(b);
        EXPECT_FALSE(std::regex_search(out, slot)) << name;
        for (const auto& p : t.placeholders())
            EXPECT_NE(out.find("value-of-" + p), std::string::npos) << name << ":" << p;
    }
}

TEST(TemplateRegistry, ConversationPromptsUseStepByStepReasoning) {
    EXPECT_NE(templates().get("conversation_no_se").body.find("step by step"), std::string::npos);
    EXPECT_NE(templates().get("conversation_with_se").body.find("step by step"), std::string::npos);
}

TEST(TemplateRegistry, UnknownNameFails) { EXPECT_THROW(templates().get("nope"), Error); }

TEST(PromptRunner, IncompleteBindingNeverReachesTheGateway) {
    MockBackend mock;
    mock.register_script(".*", {"x"}, true);
    PromptRunner llm(mock, templates(), "m");
    EXPECT_THROW(llm.ask("topic_steps", {}, "t"), Error);
    EXPECT_EQ(mock.call_count(), 0u);
    EXPECT_EQ(llm.ask("topic_steps", {{"title", "a trip"}}, "t"), "x");
    ASSERT_EQ(mock.call_count(), 1u);
    EXPECT_EQ(mock.requests()[0].model, "m");
    EXPECT_NE(mock.requests()[0].prompt_text().find("a trip"), std::string::npos);
}
