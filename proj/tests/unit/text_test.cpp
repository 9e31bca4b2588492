#include <gtest/gtest.h>

#include "emosim/error.hpp"
#include "emosim/rng.hpp"
#include "emosim/text.hpp"

using namespace emosim;

TEST(Text, NormalizeLowersTrimsAndStripsTerminalPunctuation) {
    EXPECT_EQ(text::normalize("  Encouraging. "), "encouraging");
    EXPECT_EQ(text::normalize("Sharing own thoughts/opinion!?"), "sharing own thoughts/opinion");
}

TEST(Text, AsSentenceAddsExactlyOnePeriod) {
    EXPECT_EQ(text::as_sentence("hello"), "hello.");
    EXPECT_EQ(text::as_sentence("hello."), "hello.");
    EXPECT_EQ(text::as_sentence("really?"), "really?");
}

TEST(Text, TokensSplitOnNonAlphanumerics) {
    EXPECT_EQ(text::tokens("Sharing own thoughts/opinion."),
              (std::vector<std::string>{"sharing", "own", "thoughts", "opinion"}));
}

TEST(Text, CollapseWhitespace) { EXPECT_EQ(text::collapse_whitespace("  a \n\t b  "), "a b"); }

TEST(Text, Fnv1aKnownVector) {
    EXPECT_EQ(text::fnv1a64(""), 14695981039346656037ull);
    EXPECT_EQ(text::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(text::hex64(0xaf63dc4c8601ec8cull), "af63dc4c8601ec8c");
}

TEST(Rng, BelowStaysInRangeAndIsDeterministic) {
    Rng a(7), b(7);
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.below(13);
        EXPECT_LT(x, 13u);
        EXPECT_EQ(x, b.below(13));
    }
}

TEST(Rng, MixSeedSeparatesStreams) {
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(5, 3), mix_seed(5, 3));
}

TEST(ErrorCodes, RequireThrowsInvalidArgument) {
    try {
        require(false, "boom");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
        EXPECT_EQ(to_string(e.code()), "InvalidArgument");
    }
}
