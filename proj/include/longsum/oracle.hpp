#pragma once

// Ground-truth extractive labels: for each abstract sentence, the two
// document sentences with the highest ROUGE score against it.

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "longsum/common.hpp"
#include "longsum/corpus.hpp"
#include "longsum/rouge.hpp"

namespace longsum::oracle {

struct ExtractLabels {
    std::string doc_id;
    std::vector<int> indices;  // strictly increasing
};

enum class MatchScore { rouge1_f1, rouge2_f1, rougel_f1 };

inline double pair_score(const std::vector<std::string>& doc_sent,
                         const std::vector<std::string>& abs_sent, MatchScore score) {
    switch (score) {
        case MatchScore::rouge1_f1: return rouge::rouge_n(doc_sent, abs_sent, 1).f1;
        case MatchScore::rouge2_f1: return rouge::rouge_n(doc_sent, abs_sent, 2).f1;
        case MatchScore::rougel_f1: return rouge::rouge_l(doc_sent, abs_sent).f1;
    }
    return 0.0;
}

// Top-2 per abstract sentence, ties by lower sentence index, union
// deduplicated and sorted ascending. Zero-score sentences contribute
// nothing.
inline ExtractLabels build_oracle_labels(const corpus::Document& doc,
                                         MatchScore score = MatchScore::rouge1_f1) {
    if (doc.abstract_sentences.empty())
        throw DataError("build_oracle_labels: document " + doc.id + " has empty abstract");
    auto body = doc.body_sentences();
    const int N = static_cast<int>(body.size());

    ExtractLabels labels;
    labels.doc_id = doc.id;
    if (N == 0) return labels;
    if (N < 2) {
        for (int i = 0; i < N; ++i) labels.indices.push_back(i);
        return labels;
    }

    std::vector<std::vector<std::string>> body_words(N);
    for (int i = 0; i < N; ++i) body_words[i] = corpus::split_words(body[i]->raw);

    std::set<int> selected;
    for (const auto& abs_sent : doc.abstract_sentences) {
        auto abs_words = corpus::split_words(abs_sent.raw);
        int best = -1, second = -1;
        double best_s = 0.0, second_s = 0.0;
        for (int i = 0; i < N; ++i) {
            const double s = pair_score(body_words[i], abs_words, score);
            if (s <= 0.0) continue;  // zero-overlap sentences contribute no index
            if (s > best_s) {
                second = best;
                second_s = best_s;
                best = i;
                best_s = s;
            } else if (s > second_s) {
                second = i;
                second_s = s;
            }
        }
        if (best >= 0) selected.insert(best);
        if (second >= 0) selected.insert(second);
    }
    labels.indices.assign(selected.begin(), selected.end());
    return labels;
}

inline void save_labels(const std::vector<ExtractLabels>& labels, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("save_labels: cannot open " + path);
    for (const auto& l : labels) {
        nlohmann::json j;
        j["id"] = l.doc_id;
        j["indices"] = l.indices;
        os << j.dump() << "\n";
    }
}

inline std::vector<ExtractLabels> load_labels(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArtifactMissingError("load_labels: cannot open " + path);
    std::vector<ExtractLabels> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            ExtractLabels l;
            l.doc_id = j.at("id").get<std::string>();
            l.indices = j.at("indices").get<std::vector<int>>();
            if (!std::is_sorted(l.indices.begin(), l.indices.end()) ||
                std::adjacent_find(l.indices.begin(), l.indices.end()) != l.indices.end())
                throw DataError("labels line " + std::to_string(line_no) +
                                ": indices not strictly increasing");
            out.push_back(std::move(l));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("labels line " + std::to_string(line_no) + ": malformed record: " +
                            e.what());
        }
    }
    return out;
}

}  // namespace longsum::oracle
