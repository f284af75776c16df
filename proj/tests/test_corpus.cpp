#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "longsum/bpe.hpp"
#include "longsum/corpus.hpp"

using namespace longsum;
using namespace longsum::corpus;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& p, const std::string& content) : path(p) {
        std::ofstream os(p);
        os << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

const char* kThreeRecords =
    R"({"id":"d1","domain":"scientific","sections":[{"name":"Introduction","sentences":["The first sentence.","A second one."]}],"abstract":["Summary one."]})"
    "\n"
    R"({"id":"d2","domain":"news","sections":[{"name":"body","sentences":["News text here."]}],"abstract":["News summary."]})"
    "\n"
    R"({"id":"d3","domain":"scientific","sections":[{"name":"introduction","sentences":["Alpha beta.","Gamma delta.","Epsilon."]},{"name":"methods","sentences":["Method one.","Method two."]}],"abstract":["Stuff happened.","More stuff."]})"
    "\n";

}  // namespace

TEST_CASE("normalize_text collapses whitespace and lowercases") {
    REQUIRE(normalize_text("  The \t Quick\nFox  ") == "the quick fox");
    NormalizeConfig keep;
    keep.lowercase = false;
    REQUIRE(normalize_text("The  Fox", keep) == "The Fox");
}

TEST_CASE("load_corpus yields documents in file order") {
    TempFile f("corpus_tmp_1.jsonl", kThreeRecords);
    auto res = load_corpus(f.path);
    REQUIRE(res.documents.size() == 3);
    REQUIRE(res.skipped == 0);
    REQUIRE(res.documents[0].id == "d1");
    REQUIRE(res.documents[1].id == "d2");
    REQUIRE(res.documents[2].id == "d3");
    REQUIRE(res.documents[1].domain_tag == Domain::news);
    REQUIRE(res.documents[0].sections[0].sentences[0].raw == "the first sentence.");
    // 2 sections with 3+2 sentences.
    REQUIRE(res.documents[2].num_sentences() == 5);

    // Determinism: a second pass yields identical documents.
    auto res2 = load_corpus(f.path);
    REQUIRE(res2.documents.size() == res.documents.size());
    for (size_t i = 0; i < res.documents.size(); ++i) {
        REQUIRE(res2.documents[i].id == res.documents[i].id);
        REQUIRE(res2.documents[i].num_sentences() == res.documents[i].num_sentences());
    }
}

TEST_CASE("record missing abstract is skipped with counter") {
    TempFile f("corpus_tmp_2.jsonl",
               R"({"id":"ok","sections":[{"name":"introduction","sentences":["Text."]}],"abstract":["Sum."]})"
               "\n"
               R"({"id":"noabs","sections":[{"name":"introduction","sentences":["Text."]}]})"
               "\n");
    auto res = load_corpus(f.path);
    REQUIRE(res.documents.size() == 1);
    REQUIRE(res.skipped == 1);
}

TEST_CASE("malformed record errors with line number") {
    TempFile f("corpus_tmp_3.jsonl",
               R"({"id":"ok","sections":[{"name":"introduction","sentences":["Text."]}],"abstract":["Sum."]})"
               "\n"
               "{not json\n");
    try {
        load_corpus(f.path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("sum of per-section counts equals document N") {
    TempFile f("corpus_tmp_4.jsonl", kThreeRecords);
    auto res = load_corpus(f.path);
    for (const auto& doc : res.documents) {
        int total = 0;
        for (const auto& sec : doc.sections) total += static_cast<int>(sec.sentences.size());
        REQUIRE(total == doc.num_sentences());
        REQUIRE(static_cast<int>(doc.body_sentences().size()) == doc.num_sentences());
    }
}

TEST_CASE("truncate_for_extractor limits and idempotence") {
    Document doc;
    doc.id = "t";
    Section sec;
    sec.name = "introduction";
    for (int i = 0; i < 400; ++i) {
        Sentence s;
        s.raw = "sentence " + std::to_string(i);
        for (int t = 0; t < 50; ++t) s.tokens.push_back(t);
        sec.sentences.push_back(s);
    }
    doc.sections.push_back(sec);
    doc.abstract_sentences.push_back({"sum", {}});

    auto cut = truncate_for_extractor(doc, 300, 35);
    REQUIRE(cut.num_sentences() == 300);
    REQUIRE(cut.sections[0].sentences[0].tokens.size() == 35);
    REQUIRE(doc.num_sentences() == 400);  // original untouched
    REQUIRE(doc.sections[0].sentences[0].tokens.size() == 50);

    // Idempotent.
    auto twice = truncate_for_extractor(cut, 300, 35);
    REQUIRE(twice.num_sentences() == 300);
    REQUIRE(twice.sections[0].sentences.back().tokens == cut.sections[0].sentences.back().tokens);

    // Under limits: unchanged.
    Document small;
    small.id = "s";
    Section ss;
    ss.name = "introduction";
    for (int i = 0; i < 10; ++i) ss.sentences.push_back({"short one", {1, 2, 3}});
    small.sections.push_back(ss);
    auto same = truncate_for_extractor(small, 300, 35);
    REQUIRE(same.num_sentences() == 10);
    REQUIRE(same.sections[0].sentences[0].tokens == std::vector<int>{1, 2, 3});
}

TEST_CASE("corpus_stats arithmetic") {
    auto make = [](int doc_words, int sum_words, int sum_sents) {
        Document d;
        d.id = "x";
        Section sec;
        sec.name = "introduction";
        std::string body;
        for (int i = 0; i < doc_words; ++i) body += "w ";
        sec.sentences.push_back({normalize_text(body), {}});
        d.sections.push_back(sec);
        int per = sum_words / sum_sents;
        for (int s = 0; s < sum_sents; ++s) {
            std::string a;
            for (int i = 0; i < per; ++i) a += "v ";
            d.abstract_sentences.push_back({normalize_text(a), {}});
        }
        return d;
    };

    SECTION("mean summary sentences") {
        auto st = corpus_stats({make(10, 3, 3), make(10, 5, 5)});
        REQUIRE(st.mean_summary_sentences == 4.0);
    }

    SECTION("compression ratio") {
        auto st = corpus_stats({make(100, 25, 5)});
        REQUIRE(st.compression_ratio == 4.0);
        REQUIRE_THAT(st.compression_ratio,
                     Catch::Matchers::WithinAbs(st.mean_doc_words / st.mean_summary_words, 1e-9));
    }

    SECTION("fixture mini-corpus vs brute-force recount") {
        std::vector<Document> docs = {make(12, 4, 2), make(30, 6, 3), make(7, 2, 1)};
        auto st = corpus_stats(docs);
        // Independent recount.
        double dw = 0, sw = 0, ss = 0;
        for (auto& d : docs) {
            for (auto& sec : d.sections)
                for (auto& s : sec.sentences) dw += split_words(s.raw).size();
            for (auto& s : d.abstract_sentences) sw += split_words(s.raw).size();
            ss += d.abstract_sentences.size();
        }
        REQUIRE_THAT(st.mean_doc_words, Catch::Matchers::WithinAbs(dw / 3.0, 1e-12));
        REQUIRE_THAT(st.mean_summary_words, Catch::Matchers::WithinAbs(sw / 3.0, 1e-12));
        REQUIRE_THAT(st.mean_summary_sentences, Catch::Matchers::WithinAbs(ss / 3.0, 1e-12));
    }

    SECTION("empty corpus errors") { REQUIRE_THROWS_AS(corpus_stats({}), DataError); }
}

TEST_CASE("public release conversion") {
    TempFile in("corpus_tmp_5.jsonl",
                R"({"article_id":"p1","article_text":["First sentence .","Second sentence ."],"abstract_text":["<S> the abstract . </S>"]})"
                "\n");
    convert_public_release(in.path, "corpus_tmp_5_out.jsonl", Domain::scientific);
    auto res = load_corpus("corpus_tmp_5_out.jsonl");
    REQUIRE(res.documents.size() == 1);
    REQUIRE(res.documents[0].id == "p1");
    REQUIRE(res.documents[0].sections[0].name == "introduction");
    REQUIRE(res.documents[0].abstract_sentences[0].raw == "the abstract .");
    std::remove("corpus_tmp_5_out.jsonl");
}

TEST_CASE("sentence tokens round trip to normalized raw") {
    TempFile f("corpus_tmp_6.jsonl", kThreeRecords);
    auto res = load_corpus(f.path);
    auto vocab = bpe::train_bpe(res.documents, 50);
    for (auto& doc : res.documents) {
        bpe::tokenize_document(doc, vocab);
        for (auto& sec : doc.sections)
            for (auto& s : sec.sentences) REQUIRE(bpe::decode(s.tokens, vocab) == s.raw);
    }
}
