#pragma once

// Document ingestion, normalization, truncation and corpus statistics.
// Records arrive pre-segmented into sentences; one JSON object per line.

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "longsum/common.hpp"

namespace longsum::corpus {

enum class Domain { scientific, news, patent };

inline std::string domain_name(Domain d) {
    switch (d) {
        case Domain::scientific: return "scientific";
        case Domain::news: return "news";
        case Domain::patent: return "patent";
    }
    return "scientific";
}

inline Domain domain_from_name(const std::string& s) {
    if (s == "scientific") return Domain::scientific;
    if (s == "news") return Domain::news;
    if (s == "patent") return Domain::patent;
    throw DataError("unknown domain tag: " + s);
}

struct Sentence {
    std::string raw;             // normalized text
    std::vector<int> tokens;     // filled after tokenization
};

struct Section {
    std::string name;
    std::vector<Sentence> sentences;
};

struct Document {
    std::string id;
    std::vector<Section> sections;
    std::vector<Sentence> abstract_sentences;
    Domain domain_tag = Domain::scientific;

    int num_sentences() const {
        int n = 0;
        for (const auto& s : sections) n += static_cast<int>(s.sentences.size());
        return n;
    }

    // Flattened body sentences in section order.
    std::vector<const Sentence*> body_sentences() const {
        std::vector<const Sentence*> out;
        for (const auto& sec : sections)
            for (const auto& s : sec.sentences) out.push_back(&s);
        return out;
    }

    const Section* find_section(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
};

struct CorpusStats {
    size_t num_documents = 0;
    double mean_doc_words = 0.0;
    double mean_summary_words = 0.0;
    double mean_summary_sentences = 0.0;
    double compression_ratio = 0.0;
};

struct NormalizeConfig {
    bool lowercase = true;
};

// Whitespace collapse plus configurable ASCII lowercasing. Input is
// expected to be NFC UTF-8 already; bytes outside ASCII pass through.
inline std::string normalize_text(const std::string& raw, const NormalizeConfig& cfg = {}) {
    std::string out;
    out.reserve(raw.size());
    bool in_space = true;  // also trims leading whitespace
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(cfg.lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

inline std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream is(text);
    std::string w;
    while (is >> w) words.push_back(w);
    return words;
}

struct LoadResult {
    std::vector<Document> documents;
    size_t skipped = 0;  // records dropped for empty abstract or empty body
};

inline Document parse_record(const nlohmann::json& j, const NormalizeConfig& cfg, size_t line_no) {
    Document doc;
    try {
        doc.id = j.at("id").get<std::string>();
        doc.domain_tag = domain_from_name(j.value("domain", "scientific"));
        for (const auto& sec : j.at("sections")) {
            Section s;
            s.name = normalize_text(sec.at("name").get<std::string>(), cfg);
            for (const auto& sent : sec.at("sentences")) {
                Sentence x;
                x.raw = normalize_text(sent.get<std::string>(), cfg);
                if (!x.raw.empty()) s.sentences.push_back(std::move(x));
            }
            if (!s.sentences.empty()) doc.sections.push_back(std::move(s));
        }
        for (const auto& sent : j.at("abstract")) {
            Sentence x;
            x.raw = normalize_text(sent.get<std::string>(), cfg);
            if (!x.raw.empty()) doc.abstract_sentences.push_back(std::move(x));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    return doc;
}

inline LoadResult load_corpus(const std::string& path, const NormalizeConfig& cfg = {}) {
    std::ifstream is(path);
    if (!is) throw DataError("load_corpus: cannot open " + path);
    LoadResult res;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        if (!j.contains("abstract") || j["abstract"].empty()) {
            res.skipped += 1;
            continue;
        }
        Document doc = parse_record(j, cfg, line_no);
        if (doc.abstract_sentences.empty() || doc.sections.empty()) {
            res.skipped += 1;
            continue;
        }
        res.documents.push_back(std::move(doc));
    }
    return res;
}

inline void save_corpus(const std::vector<Document>& docs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("save_corpus: cannot open " + path);
    for (const auto& doc : docs) {
        nlohmann::json j;
        j["id"] = doc.id;
        j["domain"] = domain_name(doc.domain_tag);
        j["sections"] = nlohmann::json::array();
        for (const auto& sec : doc.sections) {
            nlohmann::json js;
            js["name"] = sec.name;
            js["sentences"] = nlohmann::json::array();
            for (const auto& s : sec.sentences) js["sentences"].push_back(s.raw);
            j["sections"].push_back(std::move(js));
        }
        j["abstract"] = nlohmann::json::array();
        for (const auto& s : doc.abstract_sentences) j["abstract"].push_back(s.raw);
        os << j.dump() << "\n";
    }
}

// Maps the public arXiv/PubMed release layout ("article_text" /
// "abstract_text", optionally "sections" + "section_names") into the
// native record schema. Sentence markers <S> </S> are stripped.
inline void convert_public_release(const std::string& in_path, const std::string& out_path,
                                   Domain domain) {
    std::ifstream is(in_path);
    if (!is) throw DataError("convert: cannot open " + in_path);
    std::ofstream os(out_path);
    if (!os) throw DataError("convert: cannot open " + out_path);

    auto strip_markers = [](std::string s) {
        for (const char* m : {"<S>", "</S>", "<s>", "</s>"}) {
            size_t p;
            while ((p = s.find(m)) != std::string::npos) s.erase(p, std::strlen(m));
        }
        return s;
    };

    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        nlohmann::json out;
        out["id"] = j.value("article_id", "doc-" + std::to_string(line_no));
        out["domain"] = domain_name(domain);
        out["sections"] = nlohmann::json::array();
        if (j.contains("sections") && j.contains("section_names") &&
            j["sections"].size() == j["section_names"].size()) {
            for (size_t i = 0; i < j["sections"].size(); ++i) {
                nlohmann::json sec;
                sec["name"] = j["section_names"][i].get<std::string>();
                sec["sentences"] = j["sections"][i];
                out["sections"].push_back(std::move(sec));
            }
        } else {
            nlohmann::json sec;
            sec["name"] = domain == Domain::scientific ? "introduction" : "body";
            sec["sentences"] = j.value("article_text", nlohmann::json::array());
            out["sections"].push_back(std::move(sec));
        }
        out["abstract"] = nlohmann::json::array();
        for (const auto& s : j.value("abstract_text", nlohmann::json::array()))
            out["abstract"].push_back(strip_markers(s.get<std::string>()));
        os << out.dump() << "\n";
    }
}

// Keeps at most max_sentences sentences (prefix order across sections)
// and truncates each sentence's token list. The input is not modified.
inline Document truncate_for_extractor(const Document& doc, int max_sentences,
                                       int max_tokens_per_sentence) {
    Document out;
    out.id = doc.id;
    out.domain_tag = doc.domain_tag;
    out.abstract_sentences = doc.abstract_sentences;
    int kept = 0;
    for (const auto& sec : doc.sections) {
        if (kept >= max_sentences) break;
        Section s;
        s.name = sec.name;
        for (const auto& sent : sec.sentences) {
            if (kept >= max_sentences) break;
            Sentence x = sent;
            if (static_cast<int>(x.tokens.size()) > max_tokens_per_sentence)
                x.tokens.resize(max_tokens_per_sentence);
            s.sentences.push_back(std::move(x));
            ++kept;
        }
        if (!s.sentences.empty()) out.sections.push_back(std::move(s));
    }
    return out;
}

inline CorpusStats corpus_stats(const std::vector<Document>& docs) {
    if (docs.empty()) throw DataError("corpus_stats: empty corpus");
    CorpusStats st;
    st.num_documents = docs.size();
    double doc_words = 0, sum_words = 0, sum_sents = 0;
    for (const auto& doc : docs) {
        for (const auto& sec : doc.sections)
            for (const auto& s : sec.sentences) doc_words += split_words(s.raw).size();
        for (const auto& s : doc.abstract_sentences) sum_words += split_words(s.raw).size();
        sum_sents += doc.abstract_sentences.size();
    }
    st.mean_doc_words = doc_words / docs.size();
    st.mean_summary_words = sum_words / docs.size();
    st.mean_summary_sentences = sum_sents / docs.size();
    st.compression_ratio = st.mean_summary_words > 0 ? st.mean_doc_words / st.mean_summary_words : 0.0;
    return st;
}

}  // namespace longsum::corpus
