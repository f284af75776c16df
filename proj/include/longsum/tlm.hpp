#pragma once

// Document formatting for the transformer LM, window segmentation,
// language-model training and top-k sampling.
//
// Training layout per document: introduction, extracted sentences,
// abstract, then the remaining body, with special separators around
// each segment. At inference the sequence stops after the
// summary-start separator and the model continues it.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "longsum/autodiff.hpp"
#include "longsum/bpe.hpp"
#include "longsum/common.hpp"
#include "longsum/corpus.hpp"
#include "longsum/nn.hpp"
#include "longsum/oracle.hpp"
#include "longsum/transformer.hpp"

namespace longsum::tlm {

enum class FormatMode { intro_plus_extracts, intro_only, whole_doc };

inline std::string format_mode_name(FormatMode m) {
    switch (m) {
        case FormatMode::intro_plus_extracts: return "intro_plus_extracts";
        case FormatMode::intro_only: return "intro_only";
        case FormatMode::whole_doc: return "whole_doc";
    }
    return "intro_plus_extracts";
}

inline FormatMode format_mode_from_name(const std::string& s) {
    if (s == "intro_plus_extracts") return FormatMode::intro_plus_extracts;
    if (s == "intro_only") return FormatMode::intro_only;
    if (s == "whole_doc") return FormatMode::whole_doc;
    throw UsageError("unknown format mode: " + s);
}

struct Span {
    int begin = 0;
    int end = 0;  // half-open
    int length() const { return end - begin; }
};

struct FormattedSequence {
    std::vector<int> ids;
    Span intro;     // includes the leading document separator
    Span extract;   // includes the extract separator; empty when absent
    Span abstract;  // includes both summary separators
    Span rest;      // includes the rest separator; empty when absent
};

namespace detail {

// Body sentences of the leading section (named "introduction" when such
// a section exists, otherwise the first section) versus everything else.
inline void split_intro_rest(const corpus::Document& doc, std::vector<const corpus::Sentence*>& intro,
                             std::vector<const corpus::Sentence*>& rest) {
    const corpus::Section* lead = doc.find_section("introduction");
    if (!lead && !doc.sections.empty()) lead = &doc.sections.front();
    for (const auto& sec : doc.sections) {
        auto& bucket = (&sec == lead) ? intro : rest;
        for (const auto& s : sec.sentences) bucket.push_back(&s);
    }
}

inline void append_tokens(std::vector<int>& ids, const corpus::Sentence& s,
                          const std::string& doc_id) {
    if (s.tokens.empty())
        throw DataError("format_document: untokenized sentence in document " + doc_id);
    ids.insert(ids.end(), s.tokens.begin(), s.tokens.end());
}

}  // namespace detail

inline FormattedSequence format_document(const corpus::Document& doc,
                                         const std::vector<int>& extract_indices,
                                         FormatMode mode = FormatMode::intro_plus_extracts) {
    FormattedSequence out;
    auto body = doc.body_sentences();
    const int N = static_cast<int>(body.size());
    if (N == 0) throw DataError("format_document: document " + doc.id + " has no sentences");
    if (doc.abstract_sentences.empty())
        throw DataError("format_document: document " + doc.id + " has no abstract");

    std::vector<const corpus::Sentence*> intro, rest;
    if (mode == FormatMode::whole_doc) {
        intro = body;  // the entire body plays the introduction role
    } else {
        detail::split_intro_rest(doc, intro, rest);
    }

    out.intro.begin = 0;
    out.ids.push_back(bpe::DOC_START);
    for (const auto* s : intro) detail::append_tokens(out.ids, *s, doc.id);
    out.intro.end = static_cast<int>(out.ids.size());

    out.extract.begin = out.extract.end = out.intro.end;
    if (mode == FormatMode::intro_plus_extracts) {
        out.ids.push_back(bpe::EXTRACT_SEP);
        for (int i : extract_indices) {
            if (i < 0 || i >= N)
                throw DataError("format_document: extract index " + std::to_string(i) +
                                " out of range for document " + doc.id);
            detail::append_tokens(out.ids, *body[i], doc.id);
        }
        out.extract.end = static_cast<int>(out.ids.size());
    }

    out.abstract.begin = out.extract.end;
    out.ids.push_back(bpe::SUMMARY_START);
    for (const auto& s : doc.abstract_sentences) detail::append_tokens(out.ids, s, doc.id);
    out.ids.push_back(bpe::SUMMARY_END);
    out.abstract.end = static_cast<int>(out.ids.size());

    out.rest.begin = out.rest.end = out.abstract.end;
    if (!rest.empty()) {
        out.ids.push_back(bpe::REST_SEP);
        for (const auto* s : rest) detail::append_tokens(out.ids, *s, doc.id);
        out.rest.end = static_cast<int>(out.ids.size());
    }
    return out;
}

struct Window {
    std::vector<int> ids;  // length exactly `window`, padded at the tail
    int active = 0;        // count of real tokens
};

// Non-overlapping fixed-size windows; the last one is padded. Loss is
// only taken on next-token targets inside the real span.
inline std::vector<Window> segment_windows(const std::vector<int>& ids, int window) {
    if (window < 2) throw std::invalid_argument("segment_windows: window must be >= 2");
    std::vector<Window> out;
    for (size_t start = 0; start < ids.size(); start += window) {
        Window w;
        const size_t n = std::min<size_t>(window, ids.size() - start);
        w.ids.assign(ids.begin() + start, ids.begin() + start + n);
        w.active = static_cast<int>(n);
        w.ids.resize(window, bpe::PAD);
        out.push_back(std::move(w));
    }
    return out;
}

// Mean next-token cross-entropy over one window. Positions t predict
// token t+1; padded targets are masked out. Windows with fewer than two
// real tokens carry no trainable positions.
inline ad::TensorPtr window_loss(const TransformerLM& model, const Window& w, bool training,
                                 std::mt19937_64& rng) {
    if (w.active < 2) throw std::invalid_argument("window_loss: window has no targets");
    std::vector<int> inputs(w.ids.begin(), w.ids.begin() + w.active);
    auto logits = model.forward(inputs, training, rng);
    std::vector<int> targets(w.active, 0);
    std::vector<unsigned char> mask(w.active, 0);
    for (int t = 0; t + 1 < w.active; ++t) {
        targets[t] = w.ids[t + 1];
        mask[t] = 1;
    }
    return ad::cross_entropy(logits, targets, mask);
}

struct TlmTrainStats {
    long long updates = 0;
    double best_valid_loss = std::numeric_limits<double>::infinity();
    std::vector<double> train_loss_curve;
};

// Flatten a formatted corpus into training windows.
inline std::vector<Window> corpus_windows(const std::vector<corpus::Document>& docs,
                                          const std::map<std::string, std::vector<int>>& extracts,
                                          FormatMode mode, int window) {
    std::vector<Window> out;
    for (const auto& d : docs) {
        std::vector<int> idx;
        if (mode == FormatMode::intro_plus_extracts) {
            auto it = extracts.find(d.id);
            if (it == extracts.end())
                throw DataError("corpus_windows: no extract indices for document " + d.id);
            idx = it->second;
        }
        for (auto& w : segment_windows(format_document(d, idx, mode).ids, window))
            if (w.active >= 2) out.push_back(std::move(w));
    }
    if (out.empty()) throw DataError("corpus_windows: no usable windows");
    return out;
}

inline double mean_window_loss(const TransformerLM& model, const std::vector<Window>& windows) {
    std::mt19937_64 rng(0);
    double total = 0.0;
    for (const auto& w : windows) total += window_loss(model, w, false, rng)->val[0];
    return windows.empty() ? 0.0 : total / windows.size();
}

inline TlmTrainStats train_tlm(TransformerLM& model, nn::ParameterStore& store,
                               const std::vector<Window>& train_windows,
                               const std::vector<Window>& valid_windows,
                               const nn::TrainConfig& cfg) {
    if (train_windows.empty()) throw DataError("train_tlm: empty training set");
    std::mt19937_64 shuffle_rng(cfg.seed);
    std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    TlmTrainStats stats;
    std::map<std::string, std::vector<double>> best_params;
    int bad_evals = 0;
    std::vector<size_t> order(train_windows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size();

    while (stats.updates < cfg.max_updates) {
        store.zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                cursor = 0;
            }
            auto loss = window_loss(model, train_windows[order[cursor++]], true, dropout_rng);
            batch_loss += loss->val[0];
            ad::backward(loss);
        }
        for (auto& [_, t] : store.params)
            for (auto& g : t->grad) g /= cfg.batch_size;
        nn::clip_global_norm(store, cfg.clip_norm);
        nn::adam_step(store, cfg, cfg.lr_at(store.step));
        stats.updates += 1;
        stats.train_loss_curve.push_back(batch_loss / cfg.batch_size);

        if (stats.updates % cfg.eval_every == 0 && !valid_windows.empty()) {
            const double vl = mean_window_loss(model, valid_windows);
            if (vl < stats.best_valid_loss - 1e-9) {
                stats.best_valid_loss = vl;
                bad_evals = 0;
                best_params.clear();
                for (auto& [name, t] : store.params) best_params[name] = t->val;
            } else if (++bad_evals >= cfg.patience) {
                break;
            }
        }
    }
    if (!best_params.empty())
        for (auto& [name, vals] : best_params) store.params.at(name)->val = vals;
    return stats;
}

// Conditioning context for generation: everything up to and including
// the summary-start separator. When over budget the introduction is
// trimmed from its tail; extracted sentences stay intact, and a context
// that cannot fit even with an empty introduction is an error.
inline std::vector<int> build_inference_context(const corpus::Document& doc,
                                                const std::vector<int>& extract_indices,
                                                FormatMode mode, int max_context) {
    if (max_context < 2) throw std::invalid_argument("build_inference_context: budget too small");
    auto body = doc.body_sentences();
    if (body.empty()) throw DataError("build_inference_context: document " + doc.id + " has no sentences");

    std::vector<const corpus::Sentence*> intro, rest;
    if (mode == FormatMode::whole_doc) intro = body;
    else detail::split_intro_rest(doc, intro, rest);

    std::vector<int> intro_ids{bpe::DOC_START};
    for (const auto* s : intro) detail::append_tokens(intro_ids, *s, doc.id);

    std::vector<int> tail_ids;
    if (mode == FormatMode::intro_plus_extracts) {
        tail_ids.push_back(bpe::EXTRACT_SEP);
        for (int i : extract_indices) {
            if (i < 0 || i >= static_cast<int>(body.size()))
                throw DataError("build_inference_context: extract index out of range for document " +
                                doc.id);
            detail::append_tokens(tail_ids, *body[i], doc.id);
        }
    }
    tail_ids.push_back(bpe::SUMMARY_START);

    const int fixed = static_cast<int>(tail_ids.size()) + 1;  // keep the document separator
    if (fixed > max_context)
        throw DataError("build_inference_context: extracts exceed the context budget for document " +
                        doc.id);
    const int intro_keep = std::min<int>(static_cast<int>(intro_ids.size()), max_context - static_cast<int>(tail_ids.size()));
    std::vector<int> ctx(intro_ids.begin(), intro_ids.begin() + intro_keep);
    ctx.insert(ctx.end(), tail_ids.begin(), tail_ids.end());
    return ctx;
}

struct GenerationConfig {
    int top_k = 30;
    double temperature = 0.7;
    int max_new_tokens = 120;
    uint64_t seed = 0;
};

// Autoregressive decoding with temperature then top-k renormalization.
// top_k = 1 is greedy argmax. Conditioning slides: when the context
// outgrows the attention window only its most recent tokens are fed
// back. Returns generated ids up to (excluding) the summary-end token.
inline std::vector<int> generate_summary(const TransformerLM& model, const std::vector<int>& context,
                                         const GenerationConfig& gen) {
    if (gen.top_k < 1) throw std::invalid_argument("generate_summary: top_k must be >= 1");
    if (gen.temperature <= 0.0) throw std::invalid_argument("generate_summary: temperature must be > 0");
    if (context.empty()) throw std::invalid_argument("generate_summary: empty context");
    const int window = model.config().window;
    std::mt19937_64 rng(gen.seed);
    std::mt19937_64 eval_rng(0);

    std::vector<int> ids = context;
    std::vector<int> out;
    for (int step = 0; step < gen.max_new_tokens; ++step) {
        const int start = std::max(0, static_cast<int>(ids.size()) - window);
        std::vector<int> view(ids.begin() + start, ids.end());
        auto logits = model.forward(view, false, eval_rng);
        const int V = logits->cols;
        const double* row = logits->val.data() + static_cast<size_t>(logits->rows - 1) * V;

        int next;
        if (gen.top_k == 1) {
            next = static_cast<int>(std::max_element(row, row + V) - row);
        } else {
            std::vector<int> cand(V);
            for (int i = 0; i < V; ++i) cand[i] = i;
            const int k = std::min(gen.top_k, V);
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end(),
                              [&](int a, int b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
            cand.resize(k);
            double mx = row[cand[0]];
            std::vector<double> w(k);
            for (int i = 0; i < k; ++i) w[i] = std::exp((row[cand[i]] - mx) / gen.temperature);
            std::discrete_distribution<int> pick(w.begin(), w.end());
            next = cand[pick(rng)];
        }
        if (next == bpe::SUMMARY_END) break;
        out.push_back(next);
        ids.push_back(next);
    }
    return out;
}

}  // namespace longsum::tlm
