#pragma once

// Word-internal byte pair encoding over whitespace-pre-split words with
// an end-of-word marker. Frequency ties break lexicographically so
// training is deterministic across platforms.

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "longsum/common.hpp"
#include "longsum/corpus.hpp"
#include "longsum/nn.hpp"

namespace longsum::bpe {

constexpr const char* kEndOfWord = "</w>";

// Fixed special-token inventory; ids 0..6 in this order.
enum Special : int {
    PAD = 0,
    UNK = 1,
    DOC_START = 2,
    EXTRACT_SEP = 3,
    SUMMARY_START = 4,
    SUMMARY_END = 5,
    REST_SEP = 6,
};

inline const std::vector<std::string>& special_markers() {
    static const std::vector<std::string> m = {"<pad>", "<unk>", "<doc>",  "<ext>",
                                              "<sum>", "</sum>", "<rest>"};
    return m;
}

struct Vocabulary {
    std::vector<std::pair<std::string, std::string>> merges;
    std::map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;
    std::map<std::pair<std::string, std::string>, int> merge_rank;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int id_of(const std::string& tok) const {
        auto it = token_to_id.find(tok);
        return it == token_to_id.end() ? UNK : it->second;
    }
    bool is_special(int id) const { return id >= 0 && id < static_cast<int>(special_markers().size()); }

    void add_token(const std::string& tok) {
        if (token_to_id.count(tok)) return;
        token_to_id[tok] = static_cast<int>(id_to_token.size());
        id_to_token.push_back(tok);
    }

    void rebuild_ranks() {
        merge_rank.clear();
        for (size_t i = 0; i < merges.size(); ++i)
            merge_rank[merges[i]] = static_cast<int>(i);
    }
};

// UTF-8 codepoint split; malformed bytes become single-byte symbols.
inline std::vector<std::string> codepoints(const std::string& word) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < word.size()) {
        const unsigned char c = static_cast<unsigned char>(word[i]);
        size_t len = 1;
        if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        if (i + len > word.size()) len = 1;
        out.push_back(word.substr(i, len));
        i += len;
    }
    return out;
}

inline std::vector<std::string> word_symbols(const std::string& word) {
    auto syms = codepoints(word);
    syms.push_back(kEndOfWord);
    return syms;
}

namespace detail {

inline std::map<std::string, long long> word_frequencies(const std::vector<corpus::Document>& docs) {
    std::map<std::string, long long> freq;
    auto add_sentence = [&](const corpus::Sentence& s) {
        for (auto& w : corpus::split_words(s.raw)) freq[w] += 1;
    };
    for (const auto& doc : docs) {
        for (const auto& sec : doc.sections)
            for (const auto& s : sec.sentences) add_sentence(s);
        for (const auto& s : doc.abstract_sentences) add_sentence(s);
    }
    return freq;
}

}  // namespace detail

inline Vocabulary train_bpe(const std::vector<corpus::Document>& docs, int num_merges) {
    if (num_merges < 0) throw std::invalid_argument("train_bpe: negative merge count");
    auto freq = detail::word_frequencies(docs);
    if (freq.empty()) throw DataError("train_bpe: corpus has no characters");

    std::vector<std::pair<std::vector<std::string>, long long>> words;
    words.reserve(freq.size());
    for (auto& [w, f] : freq) words.emplace_back(word_symbols(w), f);

    Vocabulary vocab;
    for (const auto& m : special_markers()) vocab.add_token(m);

    // Base symbol inventory, sorted for dense deterministic ids.
    std::map<std::string, bool> base;
    for (auto& [syms, f] : words)
        for (auto& s : syms) base[s] = true;
    for (auto& [s, _] : base) vocab.add_token(s);

    for (int m = 0; m < num_merges; ++m) {
        std::map<std::pair<std::string, std::string>, long long> pair_count;
        for (auto& [syms, f] : words)
            for (size_t i = 0; i + 1 < syms.size(); ++i)
                pair_count[{syms[i], syms[i + 1]}] += f;
        if (pair_count.empty()) break;
        // Max count, ties by lexicographically smallest pair. std::map
        // iterates in ascending key order, so strict > keeps the smallest.
        auto best = pair_count.begin();
        for (auto it = pair_count.begin(); it != pair_count.end(); ++it)
            if (it->second > best->second) best = it;
        if (best->second < 2) break;  // nothing left worth merging
        const auto [left, right] = best->first;
        const std::string joined = left + right;
        vocab.merges.emplace_back(left, right);
        vocab.add_token(joined);
        for (auto& [syms, f] : words) {
            std::vector<std::string> merged;
            merged.reserve(syms.size());
            for (size_t i = 0; i < syms.size(); ++i) {
                if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
                    merged.push_back(joined);
                    ++i;
                } else {
                    merged.push_back(syms[i]);
                }
            }
            syms = std::move(merged);
        }
    }
    vocab.rebuild_ranks();
    return vocab;
}

namespace detail {

// Greedy merge application in learned rank order.
inline std::vector<std::string> apply_merges(std::vector<std::string> syms, const Vocabulary& vocab) {
    while (syms.size() > 1) {
        int best_rank = -1;
        size_t best_pos = 0;
        for (size_t i = 0; i + 1 < syms.size(); ++i) {
            auto it = vocab.merge_rank.find({syms[i], syms[i + 1]});
            if (it != vocab.merge_rank.end() && (best_rank < 0 || it->second < best_rank)) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank < 0) break;
        const auto& [left, right] = vocab.merges[best_rank];
        std::vector<std::string> merged;
        merged.reserve(syms.size());
        for (size_t i = 0; i < syms.size(); ++i) {
            if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
                merged.push_back(left + right);
                ++i;
            } else {
                merged.push_back(syms[i]);
            }
        }
        syms = std::move(merged);
    }
    return syms;
}

}  // namespace detail

inline std::vector<int> encode(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> ids;
    for (auto& word : corpus::split_words(text)) {
        auto syms = detail::apply_merges(word_symbols(word), vocab);
        for (auto& s : syms) ids.push_back(vocab.id_of(s));
    }
    return ids;
}

inline std::string decode(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::string joined;
    for (int id : ids) {
        if (id < 0 || id >= vocab.size())
            throw DataError("decode: token id " + std::to_string(id) + " out of range");
        if (vocab.is_special(id)) {
            if (!joined.empty() && joined.back() != ' ') joined.push_back(' ');
            joined += vocab.id_to_token[id];
            joined.push_back(' ');
        } else {
            joined += vocab.id_to_token[id];
        }
    }
    // End-of-word markers become spaces.
    std::string out;
    out.reserve(joined.size());
    size_t i = 0;
    const std::string eow = kEndOfWord;
    while (i < joined.size()) {
        if (joined.compare(i, eow.size(), eow) == 0) {
            out.push_back(' ');
            i += eow.size();
        } else {
            out.push_back(joined[i]);
            ++i;
        }
    }
    // Collapse the double spaces produced around specials.
    std::string res;
    for (char c : out) {
        if (c == ' ' && !res.empty() && res.back() == ' ') continue;
        res.push_back(c);
    }
    while (!res.empty() && res.back() == ' ') res.pop_back();
    while (!res.empty() && res.front() == ' ') res.erase(res.begin());
    return res;
}

// Versioned plain-text vocabulary file, stable across platforms.
inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("save_vocabulary: cannot open " + path);
    os << "longsum-bpe v1 " << vocab.merges.size() << "\n";
    os << "merges " << vocab.merges.size() << "\n";
    for (auto& [l, r] : vocab.merges) os << l << "\t" << r << "\n";
    os << "tokens " << vocab.size() << "\n";
    for (auto& t : vocab.id_to_token) os << t << "\n";
}

inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArtifactMissingError("load_vocabulary: cannot open " + path);
    std::string header, tag;
    size_t n = 0;
    std::getline(is, header);
    if (header.rfind("longsum-bpe v1", 0) != 0)
        throw DataError("load_vocabulary: unrecognized header in " + path);
    Vocabulary vocab;
    is >> tag >> n;
    is.ignore();
    if (tag != "merges") throw DataError("load_vocabulary: expected merges section");
    for (size_t i = 0; i < n; ++i) {
        std::string line;
        std::getline(is, line);
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("load_vocabulary: malformed merge line");
        vocab.merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    is >> tag >> n;
    is.ignore();
    if (tag != "tokens") throw DataError("load_vocabulary: expected tokens section");
    for (size_t i = 0; i < n; ++i) {
        std::string line;
        std::getline(is, line);
        vocab.add_token(line);
    }
    for (size_t i = 0; i < special_markers().size(); ++i)
        if (vocab.id_to_token.size() <= i || vocab.id_to_token[i] != special_markers()[i])
            throw DataError("load_vocabulary: special-token block mismatch");
    vocab.rebuild_ranks();
    return vocab;
}

inline uint64_t vocabulary_hash(const Vocabulary& vocab) {
    std::string blob;
    for (auto& [l, r] : vocab.merges) blob += l + "\t" + r + "\n";
    for (auto& t : vocab.id_to_token) blob += t + "\n";
    return nn::fnv1a64(blob);
}

// Fills Sentence::tokens across a document in place.
inline void tokenize_document(corpus::Document& doc, const Vocabulary& vocab) {
    for (auto& sec : doc.sections)
        for (auto& s : sec.sentences) s.tokens = encode(s.raw, vocab);
    for (auto& s : doc.abstract_sentences) s.tokens = encode(s.raw, vocab);
}

}  // namespace longsum::bpe
