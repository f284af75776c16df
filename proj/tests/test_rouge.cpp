#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <string>
#include <vector>

#include "longsum/rouge.hpp"

using namespace longsum::rouge;
using Tokens = std::vector<std::string>;

namespace {

// Independent oracle: naive positional n-gram scan with clipping.
RougeScore oracle_rouge_n(const Tokens& cand, const Tokens& ref, int n) {
    auto grams = [n](const Tokens& t) {
        std::map<Tokens, int> g;
        for (int i = 0; i + n <= static_cast<int>(t.size()); ++i)
            g[Tokens(t.begin() + i, t.begin() + i + n)]++;
        return g;
    };
    auto cg = grams(cand), rg = grams(ref);
    int ct = 0, rt = 0, ov = 0;
    for (auto& [g, c] : cg) ct += c;
    for (auto& [g, c] : rg) rt += c;
    for (auto& [g, c] : cg)
        if (rg.count(g)) ov += std::min(c, rg[g]);
    if (ct == 0 || rt == 0) return {};
    return from_pr(double(ov) / ct, double(ov) / rt);
}

// Independent oracle: plain recursive LCS with memo, written separately
// from the rolling-array implementation under test.
int oracle_lcs(const Tokens& a, const Tokens& b, size_t i, size_t j,
               std::map<std::pair<size_t, size_t>, int>& memo) {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    int r;
    if (a[i] == b[j])
        r = 1 + oracle_lcs(a, b, i + 1, j + 1, memo);
    else
        r = std::max(oracle_lcs(a, b, i + 1, j, memo), oracle_lcs(a, b, i, j + 1, memo));
    memo[key] = r;
    return r;
}

Tokens random_tokens(std::mt19937_64& rng, int max_len, int alphabet) {
    std::uniform_int_distribution<int> len(0, max_len);
    std::uniform_int_distribution<int> sym(0, alphabet - 1);
    Tokens t(len(rng));
    for (auto& x : t) x = std::string(1, char('a' + sym(rng)));
    return t;
}

}  // namespace

TEST_CASE("ngram_counts basics") {
    Tokens t = {"a", "b", "a"};
    auto c1 = ngram_counts(t, 1);
    REQUIRE(c1[{"a"}] == 2);
    REQUIRE(c1[{"b"}] == 1);

    REQUIRE(ngram_counts(t, 5).empty());

    Tokens t2 = {"a", "b", "a", "b"};
    auto c2 = ngram_counts(t2, 2);
    REQUIRE(c2[Tokens{"a", "b"}] == 2);
    REQUIRE(c2[Tokens{"b", "a"}] == 1);
    REQUIRE(c2.size() == 2);
}

TEST_CASE("rouge_n fixtures") {
    Tokens same = {"x", "y", "z"};
    auto s = rouge_n(same, same, 1);
    REQUIRE(s.precision == 1.0);
    REQUIRE(s.recall == 1.0);
    REQUIRE(s.f1 == 1.0);

    auto d = rouge_n(Tokens{"a", "b"}, Tokens{"c", "d"}, 1);
    REQUIRE(d.f1 == 0.0);

    auto h = rouge_n(Tokens{"the", "cat", "sat"}, Tokens{"the", "cat"}, 1);
    REQUIRE_THAT(h.precision, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
    REQUIRE(h.recall == 1.0);
    REQUIRE_THAT(h.f1, Catch::Matchers::WithinAbs(0.8, 1e-12));

    // Both texts shorter than n: all zeros.
    auto z = rouge_n(Tokens{"a"}, Tokens{"b"}, 2);
    REQUIRE(z.f1 == 0.0);
}

TEST_CASE("rouge_l fixtures") {
    Tokens c = {"a", "b", "c", "d", "e"};
    Tokens r = {"a", "c", "e"};
    auto s = rouge_l(c, r);
    REQUIRE_THAT(s.precision, Catch::Matchers::WithinAbs(0.6, 1e-12));
    REQUIRE(s.recall == 1.0);
    REQUIRE_THAT(s.f1, Catch::Matchers::WithinAbs(0.75, 1e-12));

    REQUIRE(rouge_l(c, c).f1 == 1.0);

    // Reversed distinct tokens share an LCS of exactly one.
    Tokens rev(c.rbegin(), c.rend());
    REQUIRE(lcs_length(c, rev) == 1);

    REQUIRE(rouge_l(Tokens{}, r).f1 == 0.0);
    REQUIRE(rouge_l(c, Tokens{}).f1 == 0.0);
}

TEST_CASE("rouge properties against brute-force oracles") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        auto a = random_tokens(rng, 12, 4);
        auto b = random_tokens(rng, 12, 4);
        for (int n = 1; n <= 3; ++n) {
            auto got = rouge_n(a, b, n);
            auto want = oracle_rouge_n(a, b, n);
            REQUIRE_THAT(got.precision, Catch::Matchers::WithinAbs(want.precision, 1e-12));
            REQUIRE_THAT(got.recall, Catch::Matchers::WithinAbs(want.recall, 1e-12));
            REQUIRE_THAT(got.f1, Catch::Matchers::WithinAbs(want.f1, 1e-12));

            // Symmetry: swapping texts swaps P and R, preserves F1.
            auto sw = rouge_n(b, a, n);
            REQUIRE_THAT(sw.precision, Catch::Matchers::WithinAbs(got.recall, 1e-12));
            REQUIRE_THAT(sw.recall, Catch::Matchers::WithinAbs(got.precision, 1e-12));
            REQUIRE_THAT(sw.f1, Catch::Matchers::WithinAbs(got.f1, 1e-12));

            if (static_cast<int>(a.size()) >= n) REQUIRE(rouge_n(a, a, n).f1 == 1.0);
        }

        std::map<std::pair<size_t, size_t>, int> memo;
        const int want_lcs = oracle_lcs(a, b, 0, 0, memo);
        REQUIRE(lcs_length(a, b) == want_lcs);
        REQUIRE(want_lcs <= static_cast<int>(std::min(a.size(), b.size())));
        if (!a.empty() && !b.empty()) {
            auto l = rouge_l(a, b);
            REQUIRE((l.f1 == 1.0) == (a == b));
        }

        // Clipping: duplicating a candidate token that already matches the
        // reference count (or exceeds it) never raises recall.
        if (!a.empty() && !b.empty()) {
            for (const auto& tok : a) {
                const auto in_a = std::count(a.begin(), a.end(), tok);
                const auto in_b = std::count(b.begin(), b.end(), tok);
                if (in_a >= in_b) {
                    auto dup = a;
                    dup.push_back(tok);
                    REQUIRE_THAT(rouge_n(dup, b, 1).recall,
                                 Catch::Matchers::WithinAbs(rouge_n(a, b, 1).recall, 1e-12));
                    break;
                }
            }
        }
    }
}

TEST_CASE("corpus_rouge aggregation") {
    using Pair = std::pair<Tokens, Tokens>;
    Tokens x = {"the", "cat", "sat"};
    Tokens y = {"the", "cat"};

    SECTION("single pair: mean equals the pair, zero CI") {
        auto rep = corpus_rouge<std::string>({Pair{x, y}});
        REQUIRE(rep.num_pairs == 1);
        REQUIRE_THAT(rep.variants.at("rouge-1").mean.f1, Catch::Matchers::WithinAbs(0.8, 1e-12));
        REQUIRE(rep.variants.at("rouge-1").ci_halfwidth == 0.0);
    }

    SECTION("identical pairs: zero CI halfwidth") {
        std::vector<Pair> pairs(5, Pair{x, y});
        auto rep = corpus_rouge<std::string>(pairs);
        REQUIRE_THAT(rep.variants.at("rouge-1").ci_halfwidth, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }

    SECTION("three pairs: mean is the hand average") {
        std::vector<Pair> pairs = {
            Pair{x, x},                    // f1 = 1
            Pair{x, y},                    // f1 = 0.8
            Pair{Tokens{"a"}, Tokens{"b"}} // f1 = 0
        };
        auto rep = corpus_rouge<std::string>(pairs);
        REQUIRE_THAT(rep.variants.at("rouge-1").mean.f1,
                     Catch::Matchers::WithinAbs((1.0 + 0.8 + 0.0) / 3.0, 1e-12));
    }

    SECTION("empty input is an error") {
        REQUIRE_THROWS(corpus_rouge<std::string>({}));
    }

    SECTION("deterministic CI given fixed seed") {
        std::vector<Pair> pairs = {Pair{x, x}, Pair{x, y}, Pair{y, x}};
        auto a = corpus_rouge<std::string>(pairs);
        auto b = corpus_rouge<std::string>(pairs);
        REQUIRE(a.variants.at("rouge-l").ci_halfwidth == b.variants.at("rouge-l").ci_halfwidth);
    }
}
