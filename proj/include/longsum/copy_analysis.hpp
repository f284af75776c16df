#pragma once

// Abstractiveness analysis: how much of a generated summary is copied
// verbatim from the input, by n-gram order, and whether copied spans
// come from the extracted sentences or from the rest of the input.

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "longsum/common.hpp"

namespace longsum::copy {

using Tokens = std::vector<std::string>;

namespace detail {

inline std::set<Tokens> ngram_set(const Tokens& t, int n) {
    std::set<Tokens> g;
    for (int i = 0; i + n <= static_cast<int>(t.size()); ++i)
        g.insert(Tokens(t.begin() + i, t.begin() + i + n));
    return g;
}

inline std::set<Tokens> ngram_set_within(const std::vector<Tokens>& sentences, int n) {
    std::set<Tokens> g;
    for (const auto& s : sentences)
        for (int i = 0; i + n <= static_cast<int>(s.size()); ++i)
            g.insert(Tokens(s.begin() + i, s.begin() + i + n));
    return g;
}

}  // namespace detail

// Fraction of the summary's n-gram positions whose n-gram occurs
// anywhere in the source stream. Summaries shorter than n have no
// n-grams and report 0.
inline double copied_fraction(const Tokens& summary, const Tokens& source, int n) {
    if (n < 1) throw std::invalid_argument("copied_fraction: n must be >= 1");
    const int total = static_cast<int>(summary.size()) - n + 1;
    if (total <= 0) return 0.0;
    auto src = detail::ngram_set(source, n);
    int hit = 0;
    for (int i = 0; i < total; ++i)
        if (src.count(Tokens(summary.begin() + i, summary.begin() + i + n))) ++hit;
    return static_cast<double>(hit) / total;
}

// Variant restricting source n-grams to within-sentence spans; used to
// check invariance of the measure under sentence reordering.
inline double copied_fraction_within_sentences(const Tokens& summary,
                                               const std::vector<Tokens>& source_sentences, int n) {
    if (n < 1) throw std::invalid_argument("copied_fraction: n must be >= 1");
    const int total = static_cast<int>(summary.size()) - n + 1;
    if (total <= 0) return 0.0;
    auto src = detail::ngram_set_within(source_sentences, n);
    int hit = 0;
    for (int i = 0; i < total; ++i)
        if (src.count(Tokens(summary.begin() + i, summary.begin() + i + n))) ++hit;
    return static_cast<double>(hit) / total;
}

struct CopyCounts {
    long long total = 0;         // summary n-gram positions
    long long from_extract = 0;  // found in the extracted sentences
    long long from_other = 0;    // found only in the rest of the input
    long long copied() const { return from_extract + from_other; }
};

// Attribution with extract priority: a copied n-gram present in both
// sources counts toward the extraction.
inline CopyCounts copy_source_attribution(const Tokens& summary, const Tokens& extract,
                                          const Tokens& other_input, int n) {
    if (n < 1) throw std::invalid_argument("copy_source_attribution: n must be >= 1");
    CopyCounts c;
    const int total = static_cast<int>(summary.size()) - n + 1;
    if (total <= 0) return c;
    c.total = total;
    auto ext = detail::ngram_set(extract, n);
    auto oth = detail::ngram_set(other_input, n);
    for (int i = 0; i < total; ++i) {
        Tokens g(summary.begin() + i, summary.begin() + i + n);
        if (ext.count(g)) c.from_extract += 1;
        else if (oth.count(g)) c.from_other += 1;
    }
    return c;
}

struct CopyRow {
    int n = 0;
    // All three are fractions of summary n-gram positions, so
    // frac_extract + frac_other == copied_fraction.
    double copied_fraction = 0.0;
    double frac_extract = 0.0;
    double frac_other = 0.0;
};

struct CopyProfile {
    std::string model_tag;
    std::vector<CopyRow> rows;  // one per order 1..max_n
};

struct CopyExample {
    Tokens summary;
    Tokens extract;      // tokens of the extracted sentences
    Tokens other_input;  // remaining input tokens
};

// Corpus-level profile pooled over examples: each summary contributes
// in proportion to its n-gram count rather than one vote per document.
inline CopyProfile profile_corpus(const std::vector<CopyExample>& examples,
                                  const std::string& model_tag, int max_n = 25) {
    if (examples.empty()) throw DataError("profile_corpus: no examples");
    if (max_n < 1) throw std::invalid_argument("profile_corpus: max_n must be >= 1");
    CopyProfile prof;
    prof.model_tag = model_tag;
    for (int n = 1; n <= max_n; ++n) {
        CopyCounts agg;
        for (const auto& ex : examples) {
            auto c = copy_source_attribution(ex.summary, ex.extract, ex.other_input, n);
            agg.total += c.total;
            agg.from_extract += c.from_extract;
            agg.from_other += c.from_other;
        }
        CopyRow row;
        row.n = n;
        if (agg.total > 0) {
            row.copied_fraction = static_cast<double>(agg.copied()) / agg.total;
            row.frac_extract = static_cast<double>(agg.from_extract) / agg.total;
            row.frac_other = static_cast<double>(agg.from_other) / agg.total;
        }
        prof.rows.push_back(row);
    }
    return prof;
}

inline std::string profile_csv(const std::vector<CopyProfile>& profiles) {
    std::ostringstream os;
    os << "model_tag,n,copied_fraction,frac_extract,frac_other\n";
    os.setf(std::ios::fixed);
    os.precision(6);
    for (const auto& p : profiles)
        for (const auto& r : p.rows)
            os << p.model_tag << ',' << r.n << ',' << r.copied_fraction << ',' << r.frac_extract
               << ',' << r.frac_other << '\n';
    return os.str();
}

}  // namespace longsum::copy
