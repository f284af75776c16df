#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "longsum/bpe.hpp"

using namespace longsum;
using namespace longsum::bpe;

namespace {

corpus::Document doc_from_text(const std::vector<std::string>& body,
                               const std::vector<std::string>& abstract = {"a summary"}) {
    corpus::Document d;
    d.id = "d";
    corpus::Section sec;
    sec.name = "introduction";
    for (auto& s : body) sec.sentences.push_back({corpus::normalize_text(s), {}});
    d.sections.push_back(sec);
    for (auto& s : abstract) d.abstract_sentences.push_back({corpus::normalize_text(s), {}});
    return d;
}

}  // namespace

TEST_CASE("first merge on aaab aaab is (a,a)") {
    // Brute-force pair counting on "a a a b </w>" x2: (a,a) occurs 4 times,
    // strictly more than any other pair.
    auto vocab = train_bpe({doc_from_text({"aaab aaab"}, {"aaab"})}, 1);
    REQUIRE(vocab.merges.size() == 1);
    REQUIRE(vocab.merges[0].first == "a");
    REQUIRE(vocab.merges[0].second == "a");
}

TEST_CASE("zero merges yields character-level vocabulary plus specials") {
    auto vocab = train_bpe({doc_from_text({"ab ba"})}, 0);
    REQUIRE(vocab.merges.empty());
    // specials + {a, b, m, r, s, u, y, </w>} from "ab ba" / "a summary"
    for (size_t i = 0; i < special_markers().size(); ++i)
        REQUIRE(vocab.id_to_token[i] == special_markers()[i]);
    REQUIRE(vocab.token_to_id.count("a") == 1);
    REQUIRE(vocab.token_to_id.count("</w>") == 1);
    REQUIRE(vocab.token_to_id.count("ab") == 0);
}

TEST_CASE("training is deterministic") {
    std::vector<corpus::Document> docs = {doc_from_text({"the model the model", "a model of the text"})};
    auto a = train_bpe(docs, 20);
    auto b = train_bpe(docs, 20);
    REQUIRE(a.merges == b.merges);
    REQUIRE(a.id_to_token == b.id_to_token);
}

TEST_CASE("encode/decode round trip") {
    std::vector<corpus::Document> docs = {doc_from_text({"the model reads the text"})};
    auto vocab = train_bpe(docs, 30);

    REQUIRE(encode("", vocab).empty());
    REQUIRE(decode({}, vocab).empty());

    for (const std::string text : {"the model", "the text reads", "model model model"}) {
        auto ids = encode(text, vocab);
        REQUIRE(decode(ids, vocab) == text);
    }

    // Unseen character maps to UNK.
    auto ids = encode("the zebra", vocab);
    REQUIRE(std::count(ids.begin(), ids.end(), int(UNK)) > 0);

    // Specials render as readable markers.
    auto with_special = encode("the model", vocab);
    with_special.insert(with_special.begin(), int(SUMMARY_START));
    REQUIRE(decode(with_special, vocab).find("<sum>") != std::string::npos);

    REQUIRE_THROWS(decode({vocab.size() + 5}, vocab));
}

TEST_CASE("monotone compression in merge count") {
    std::vector<corpus::Document> docs = {
        doc_from_text({"summarization of long documents", "long documents need long summaries",
                       "documents and summaries of documents"})};
    const std::string probe = "long documents and summaries";
    size_t prev = SIZE_MAX;
    for (int m : {0, 2, 4, 8, 16, 32}) {
        auto vocab = train_bpe(docs, m);
        auto n = encode(probe, vocab).size();
        REQUIRE(n <= prev);
        prev = n;
    }
}

TEST_CASE("specials never participate in merges") {
    auto vocab = train_bpe({doc_from_text({"aa aa aa bb bb"})}, 10);
    for (auto& [l, r] : vocab.merges) {
        for (auto& m : special_markers()) {
            REQUIRE(l != m);
            REQUIRE(r != m);
        }
    }
}

TEST_CASE("vocabulary file round trip") {
    auto vocab = train_bpe({doc_from_text({"the model reads the text", "the text is long"})}, 25);
    const std::string path = "test_vocab_tmp.txt";
    save_vocabulary(vocab, path);
    auto loaded = load_vocabulary(path);
    REQUIRE(loaded.merges == vocab.merges);
    REQUIRE(loaded.id_to_token == vocab.id_to_token);
    REQUIRE(vocabulary_hash(loaded) == vocabulary_hash(vocab));
    REQUIRE(encode("the text", loaded) == encode("the text", vocab));
    std::remove(path.c_str());
}

TEST_CASE("empty corpus is an error") {
    corpus::Document d;
    d.id = "empty";
    REQUIRE_THROWS_AS(train_bpe({d}, 5), DataError);
}
