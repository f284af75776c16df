#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "longsum/copy_analysis.hpp"

using namespace longsum::copy;

namespace {

Tokens random_tokens(std::mt19937_64& rng, int len, int alphabet) {
    Tokens t(len);
    for (auto& x : t) x = std::string(1, char('a' + rng() % alphabet));
    return t;
}

}  // namespace

TEST_CASE("copied fraction fixtures") {
    SECTION("verbatim substring copies fully at every order") {
        Tokens article = {"p", "q", "r", "s", "t", "u"};
        Tokens abstract = {"r", "s", "t"};
        for (int n = 1; n <= 3; ++n) REQUIRE(copied_fraction(abstract, article, n) == 1.0);
    }

    SECTION("disjoint vocabularies copy nothing") {
        REQUIRE(copied_fraction({"a", "b"}, {"x", "y", "z"}, 1) == 0.0);
        REQUIRE(copied_fraction({"a", "b"}, {"x", "y", "z"}, 2) == 0.0);
    }

    SECTION("hand-enumerated bigram case") {
        // Abstract bigrams: (a b), (b c); only (a b) occurs in the article.
        REQUIRE_THAT(copied_fraction({"a", "b", "c"}, {"x", "a", "b", "y"}, 2),
                     Catch::Matchers::WithinAbs(0.5, 1e-12));
    }

    SECTION("abstract shorter than n reports zero") {
        REQUIRE(copied_fraction({"a"}, {"a", "b"}, 2) == 0.0);
    }
}

TEST_CASE("copy source attribution") {
    SECTION("everything from the extraction") {
        Tokens abstract = {"a", "b", "c"};
        auto c = copy_source_attribution(abstract, {"a", "b", "c"}, {"z", "z"}, 2);
        REQUIRE(c.total == 2);
        REQUIRE(c.from_extract == 2);
        REQUIRE(c.from_other == 0);
    }

    SECTION("ties go to the extraction") {
        auto c = copy_source_attribution({"a", "b"}, {"a", "b"}, {"a", "b"}, 2);
        REQUIRE(c.from_extract == 1);
        REQUIRE(c.from_other == 0);
    }

    SECTION("mixed fixture: one bigram per source over a 4-token abstract") {
        // Bigrams (a b), (b c), (c d): first from the extract, last from
        // the rest, middle nowhere.
        auto c = copy_source_attribution({"a", "b", "c", "d"}, {"a", "b"}, {"c", "d"}, 2);
        REQUIRE(c.total == 3);
        REQUIRE(c.from_extract == 1);
        REQUIRE(c.from_other == 1);
    }
}

TEST_CASE("corpus profiles") {
    SECTION("single example equals its own profile") {
        CopyExample ex;
        ex.summary = {"a", "b", "c", "d"};
        ex.extract = {"a", "b"};
        ex.other_input = {"c", "d"};
        auto prof = profile_corpus({ex}, "m", 3);
        REQUIRE(prof.rows.size() == 3);
        REQUIRE_THAT(prof.rows[1].copied_fraction, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
        REQUIRE_THAT(prof.rows[1].frac_extract, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
        REQUIRE_THAT(prof.rows[1].frac_other, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
    }

    SECTION("attribution parts always sum to the copied fraction") {
        std::mt19937_64 rng(5);
        std::vector<CopyExample> examples;
        for (int i = 0; i < 30; ++i) {
            CopyExample ex;
            ex.summary = random_tokens(rng, 5 + rng() % 20, 4);
            ex.extract = random_tokens(rng, 10, 4);
            ex.other_input = random_tokens(rng, 15, 4);
            examples.push_back(ex);
        }
        auto prof = profile_corpus(examples, "rand", 8);
        for (const auto& r : prof.rows) {
            REQUIRE_THAT(r.frac_extract + r.frac_other,
                         Catch::Matchers::WithinAbs(r.copied_fraction, 1e-12));
            REQUIRE(r.copied_fraction >= 0.0);
            REQUIRE(r.copied_fraction <= 1.0);
        }
    }

    SECTION("copied position counts are non-increasing in n") {
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 200; ++trial) {
            auto summary = random_tokens(rng, 3 + rng() % 15, 3);
            auto extract = random_tokens(rng, 8, 3);
            auto other = random_tokens(rng, 8, 3);
            long long prev = -1;
            for (int n = 1; n <= 6; ++n) {
                auto c = copy_source_attribution(summary, extract, other, n);
                if (prev >= 0) REQUIRE(c.copied() <= prev);
                prev = c.copied();
            }
        }
    }

    SECTION("empty corpus is an error") {
        REQUIRE_THROWS(profile_corpus({}, "m"));
    }

    SECTION("CSV emission") {
        CopyExample ex;
        ex.summary = {"a", "b"};
        ex.extract = {"a", "b"};
        ex.other_input = {};
        auto csv = profile_csv({profile_corpus({ex}, "tag", 2)});
        REQUIRE(csv.find("model_tag,n,copied_fraction,frac_extract,frac_other") == 0);
        REQUIRE(csv.find("tag,1,1.000000,1.000000,0.000000") != std::string::npos);
        REQUIRE(csv.find("tag,2,1.000000,1.000000,0.000000") != std::string::npos);
    }
}

TEST_CASE("within-sentence variant is invariant to sentence order") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Tokens> sentences;
        for (int s = 0; s < 5; ++s) sentences.push_back(random_tokens(rng, 4 + rng() % 4, 3));
        auto summary = random_tokens(rng, 6, 3);
        std::vector<Tokens> shuffled = sentences;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (int n = 1; n <= 3; ++n)
            REQUIRE(copied_fraction_within_sentences(summary, sentences, n) ==
                    copied_fraction_within_sentences(summary, shuffled, n));
    }
}
