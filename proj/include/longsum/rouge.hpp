#pragma once

// ROUGE-1/2/3/L full-length F1 scoring with bootstrap confidence
// intervals. Token type is generic (word strings or token ids).

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace longsum::rouge {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline RougeScore from_pr(double p, double r) {
    RougeScore s;
    s.precision = p;
    s.recall = r;
    s.f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
    return s;
}

template <typename Token>
std::map<std::vector<Token>, int> ngram_counts(const std::vector<Token>& tokens, int n) {
    if (n < 1) throw std::invalid_argument("ngram_counts: n must be >= 1");
    std::map<std::vector<Token>, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i)
        counts[std::vector<Token>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
    return counts;
}

// Clipped n-gram overlap; precision over candidate grams, recall over
// reference grams.
template <typename Token>
RougeScore rouge_n(const std::vector<Token>& candidate, const std::vector<Token>& reference, int n) {
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    long long cand_total = 0, ref_total = 0, overlap = 0;
    for (auto& [g, c] : cand) cand_total += c;
    for (auto& [g, c] : ref) ref_total += c;
    for (auto& [g, c] : cand) {
        auto it = ref.find(g);
        if (it != ref.end()) overlap += std::min(c, it->second);
    }
    if (cand_total == 0 || ref_total == 0) return {};
    return from_pr(static_cast<double>(overlap) / cand_total,
                   static_cast<double>(overlap) / ref_total);
}

template <typename Token>
int lcs_length(const std::vector<Token>& a, const std::vector<Token>& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return 0;
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// Summary-level LCS over the full concatenated token sequences.
template <typename Token>
RougeScore rouge_l(const std::vector<Token>& candidate, const std::vector<Token>& reference) {
    if (candidate.empty() || reference.empty()) return {};
    const int lcs = lcs_length(candidate, reference);
    return from_pr(static_cast<double>(lcs) / candidate.size(),
                   static_cast<double>(lcs) / reference.size());
}

struct VariantReport {
    RougeScore mean;
    double ci_halfwidth = 0.0;  // 95% bootstrap percentile CI on mean F1
};

struct CorpusRougeReport {
    std::map<std::string, VariantReport> variants;  // "rouge-1".."rouge-3", "rouge-l"
    size_t num_pairs = 0;
};

struct CorpusRougeConfig {
    std::vector<int> ngram_orders = {1, 2, 3};
    bool include_l = true;
    int bootstrap_resamples = 1000;
    uint64_t seed = 12345;
};

template <typename Token>
CorpusRougeReport corpus_rouge(
    const std::vector<std::pair<std::vector<Token>, std::vector<Token>>>& pairs,
    const CorpusRougeConfig& cfg = {}) {
    if (pairs.empty()) throw std::invalid_argument("corpus_rouge: empty pair list");
    CorpusRougeReport report;
    report.num_pairs = pairs.size();

    std::map<std::string, std::vector<RougeScore>> per_pair;
    for (auto& [cand, ref] : pairs) {
        for (int n : cfg.ngram_orders)
            per_pair["rouge-" + std::to_string(n)].push_back(rouge_n(cand, ref, n));
        if (cfg.include_l) per_pair["rouge-l"].push_back(rouge_l(cand, ref));
    }

    std::mt19937_64 rng(cfg.seed);
    for (auto& [name, scores] : per_pair) {
        VariantReport vr;
        double p = 0, r = 0, f = 0;
        for (auto& s : scores) {
            p += s.precision;
            r += s.recall;
            f += s.f1;
        }
        const double inv = 1.0 / scores.size();
        vr.mean.precision = p * inv;
        vr.mean.recall = r * inv;
        vr.mean.f1 = f * inv;

        if (cfg.bootstrap_resamples > 0 && scores.size() > 1) {
            std::vector<double> means;
            means.reserve(cfg.bootstrap_resamples);
            std::uniform_int_distribution<size_t> pick(0, scores.size() - 1);
            for (int b = 0; b < cfg.bootstrap_resamples; ++b) {
                double acc = 0.0;
                for (size_t i = 0; i < scores.size(); ++i) acc += scores[pick(rng)].f1;
                means.push_back(acc * inv);
            }
            std::sort(means.begin(), means.end());
            const auto lo = means[static_cast<size_t>(0.025 * (means.size() - 1))];
            const auto hi = means[static_cast<size_t>(0.975 * (means.size() - 1))];
            vr.ci_halfwidth = (hi - lo) / 2.0;
        }
        report.variants[name] = vr;
    }
    return report;
}

inline std::string report_csv(const CorpusRougeReport& report) {
    std::string out = "variant,precision,recall,f1,ci_halfwidth,num_pairs\n";
    char buf[160];
    for (auto& [name, vr] : report.variants) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%zu\n", name.c_str(),
                      vr.mean.precision, vr.mean.recall, vr.mean.f1, vr.ci_halfwidth,
                      report.num_pairs);
        out += buf;
    }
    return out;
}

}  // namespace longsum::rouge
