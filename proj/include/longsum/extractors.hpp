#pragma once

// The two trainable extractive models: hierarchical seq2seq sentence
// pointer and sentence classifier, plus beam search, top-k selection
// and the Lead-k baseline.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "longsum/autodiff.hpp"
#include "longsum/common.hpp"
#include "longsum/corpus.hpp"
#include "longsum/lstm.hpp"
#include "longsum/nn.hpp"
#include "longsum/oracle.hpp"

namespace longsum::ext {

using ad::TensorPtr;

struct ExtractorConfig {
    int vocab_size = 0;
    int emb_dim = 32;
    int hidden = 64;  // per direction; sentence/document vectors are 2*hidden
    int layers = 2;
    double dropout = 0.5;

    int repr_dim() const { return 2 * hidden; }

    std::string describe() const {
        return "ext:v" + std::to_string(vocab_size) + ":e" + std::to_string(emb_dim) + ":h" +
               std::to_string(hidden) + ":l" + std::to_string(layers);
    }
};

inline ExtractorConfig desk_extractor(int vocab_size) {
    ExtractorConfig c;
    c.vocab_size = vocab_size;
    return c;
}

// Word embeddings of size 300 and 2x512-unit LSTMs at full scale.
inline ExtractorConfig paper_extractor(int vocab_size) {
    ExtractorConfig c;
    c.vocab_size = vocab_size;
    c.emb_dim = 300;
    c.hidden = 512;
    return c;
}

struct EncodedDocument {
    std::vector<TensorPtr> sentence_embeddings;  // s_i, each [1, 2H]
    std::vector<TensorPtr> doc_repr_rows;        // d_i, each [1, 2H]
    TensorPtr doc_repr;                          // D, [N, 2H]
    int num_sentences() const { return static_cast<int>(sentence_embeddings.size()); }
};

// Token-level biLSTM producing sentence embeddings from final states,
// then a sentence-level biLSTM producing per-sentence document
// representations.
class HierEncoder {
  public:
    HierEncoder(nn::ParameterStore& store, const ExtractorConfig& cfg, const std::string& prefix)
        : cfg_(cfg),
          embedding_(store.create(prefix + ".emb", cfg.vocab_size, cfg.emb_dim)),
          token_lstm_(store, prefix + ".tok", cfg.emb_dim, cfg.hidden, cfg.layers, cfg.dropout),
          sent_lstm_(store, prefix + ".sent", cfg.repr_dim(), cfg.hidden, cfg.layers, cfg.dropout) {}

    EncodedDocument encode(const corpus::Document& doc, std::mt19937_64& rng, bool training) const {
        auto body = doc.body_sentences();
        if (body.empty()) throw DataError("encode_document: document " + doc.id + " has no sentences");
        EncodedDocument enc;
        for (const auto* sent : body) {
            if (sent->tokens.empty())
                throw DataError("encode_document: untokenized sentence in document " + doc.id);
            std::vector<TensorPtr> xs;
            xs.reserve(sent->tokens.size());
            auto emb = ad::embedding_rows(embedding_, sent->tokens);
            for (int t = 0; t < emb->rows; ++t) xs.push_back(ad::slice_rows(emb, t, 1));
            enc.sentence_embeddings.push_back(token_lstm_.encode(xs, rng, training).final_state);
        }
        auto sent_enc = sent_lstm_.encode(enc.sentence_embeddings, rng, training);
        enc.doc_repr_rows = sent_enc.outputs;
        enc.doc_repr = ad::concat_rows(sent_enc.outputs);
        return enc;
    }

    TensorPtr embedding() const { return embedding_; }

  private:
    ExtractorConfig cfg_;
    TensorPtr embedding_;
    nn::BiLstm token_lstm_;
    nn::BiLstm sent_lstm_;
};

struct PointerStepResult {
    TensorPtr scores;          // [1, N] attention logits (Eq. dot products)
    TensorPtr distribution;    // [1, N] softmax over sentences
    TensorPtr attended_state;  // h-tilde, [1, 2H]
};

struct PointerDecoderState {
    std::vector<nn::LstmState> lstm;
    TensorPtr prev_attended;  // h-tilde fed back via input feeding
};

// Hierarchical seq2seq sentence pointer. Decoder hidden width equals the
// document representation width so attention scores are plain dot
// products d_i . h_t.
class PointerExtractor {
  public:
    PointerExtractor(nn::ParameterStore& store, const ExtractorConfig& cfg,
                     const std::string& prefix = "ptr")
        : cfg_(cfg),
          encoder_(store, cfg, prefix + ".enc"),
          decoder_(store, prefix + ".dec", 2 * cfg.repr_dim(), cfg.repr_dim(), cfg.layers,
                   cfg.dropout),
          attn_proj_(store.create(prefix + ".attn_w", 2 * cfg.repr_dim(), cfg.repr_dim())) {}

    const ExtractorConfig& config() const { return cfg_; }
    const HierEncoder& encoder() const { return encoder_; }

    EncodedDocument encode_document(const corpus::Document& doc, std::mt19937_64& rng,
                                    bool training) const {
        return encoder_.encode(doc, rng, training);
    }

    PointerDecoderState initial_state() const {
        PointerDecoderState st;
        st.lstm = decoder_.zero_states();
        st.prev_attended = ad::make_tensor(1, cfg_.repr_dim(), false);
        return st;
    }

    TensorPtr zero_input() const { return ad::make_tensor(1, cfg_.repr_dim(), false); }

    // One decoder time step: input feeding concatenates the previous
    // attended state to the previous extracted sentence embedding.
    PointerStepResult step(const EncodedDocument& enc, const TensorPtr& prev_sentence,
                           PointerDecoderState& state, std::mt19937_64& rng, bool training) const {
        auto x = ad::concat_cols(prev_sentence, state.prev_attended);
        auto h = decoder_.step(x, state.lstm, rng, training);
        auto scores = ad::transpose(ad::matmul(enc.doc_repr, ad::transpose(h)));  // [1, N]
        auto a = ad::softmax_rows(scores);
        auto context = ad::matmul(a, enc.doc_repr);  // [1, 2H]
        auto attended = ad::matmul(ad::concat_cols(context, h), attn_proj_);
        state.prev_attended = attended;
        return {scores, a, attended};
    }

    // Teacher-forced loss over M+1 steps: inputs 0, s_i1..s_iM and
    // targets i1..iM, iM (the doubled index is the stop signal).
    TensorPtr teacher_forced_loss(const corpus::Document& doc, const std::vector<int>& indices,
                                  std::mt19937_64& rng, bool training,
                                  int* correct = nullptr, int* total = nullptr) const {
        if (indices.empty()) throw DataError("train_pointer: empty label for document " + doc.id);
        auto enc = encode_document(doc, rng, training);
        const int N = enc.num_sentences();
        for (int i : indices)
            if (i < 0 || i >= N)
                throw DataError("train_pointer: label index out of range for document " + doc.id);
        std::vector<int> targets = indices;
        targets.push_back(indices.back());

        auto state = initial_state();
        TensorPtr prev = zero_input();
        TensorPtr loss;
        for (size_t t = 0; t < targets.size(); ++t) {
            auto step_res = step(enc, prev, state, rng, training);
            auto step_loss = ad::cross_entropy(step_res.scores, {targets[t]});
            loss = loss ? ad::add(loss, step_loss) : step_loss;
            if (correct && total) {
                const auto& row = step_res.distribution->val;
                const int pick = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
                *correct += (pick == targets[t]) ? 1 : 0;
                *total += 1;
            }
            if (t + 1 < targets.size()) prev = enc.sentence_embeddings[targets[t]];
        }
        return ad::scale(loss, 1.0 / targets.size());
    }

    // Beam search with the repeat-to-stop convention. Hypotheses carry
    // raw summed log-probabilities; no length normalization. max_steps
    // < 0 means the document length cap.
    oracle::ExtractLabels beam_search_extract(const corpus::Document& doc, int beam_width,
                                              int max_steps = -1) const {
        if (beam_width < 1) throw std::invalid_argument("beam_search_extract: width must be >= 1");
        std::mt19937_64 rng(0);  // unused, eval mode
        auto enc = encode_document(doc, rng, false);
        const int N = enc.num_sentences();
        const int cap = max_steps < 0 ? N : max_steps;

        struct Hyp {
            std::vector<int> emitted;
            double logp = 0.0;
            PointerDecoderState state;
            TensorPtr prev_input;
        };
        std::vector<Hyp> live;
        live.push_back({{}, 0.0, initial_state(), zero_input()});
        std::vector<std::pair<std::vector<int>, double>> finished;

        for (int t = 0; t <= cap && !live.empty(); ++t) {
            if (t == cap) {
                // Close hypotheses at the length cap, scored as-is.
                for (auto& h : live) finished.emplace_back(h.emitted, h.logp);
                break;
            }
            // All expansions compete for the beam slots; a stop expansion
            // that makes the cut retires its hypothesis.
            std::vector<std::pair<Hyp, bool>> children;  // (hyp, is_stop)
            for (auto& h : live) {
                auto st = h.state;
                auto res = step(enc, h.prev_input, st, rng, false);
                for (int i = 0; i < N; ++i) {
                    const double lp = h.logp + std::log(std::max(res.distribution->val[i], 1e-300));
                    Hyp nh;
                    nh.emitted = h.emitted;
                    nh.logp = lp;
                    if (!h.emitted.empty() && i == h.emitted.back()) {
                        children.emplace_back(std::move(nh), true);
                    } else {
                        nh.emitted.push_back(i);
                        nh.state = st;
                        nh.prev_input = enc.sentence_embeddings[i];
                        children.emplace_back(std::move(nh), false);
                    }
                }
            }
            std::stable_sort(children.begin(), children.end(),
                             [](const auto& a, const auto& b) { return a.first.logp > b.first.logp; });
            if (static_cast<int>(children.size()) > beam_width) children.resize(beam_width);
            std::vector<Hyp> next;
            for (auto& [h, is_stop] : children) {
                if (is_stop) finished.emplace_back(h.emitted, h.logp);
                else next.push_back(std::move(h));
            }
            live = std::move(next);
        }

        oracle::ExtractLabels out;
        out.doc_id = doc.id;
        if (finished.empty()) return out;
        const auto best = std::max_element(finished.begin(), finished.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
        std::vector<int> idx = best->first;
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        out.indices = std::move(idx);
        return out;
    }

  private:
    ExtractorConfig cfg_;
    HierEncoder encoder_;
    nn::StackedLstm decoder_;
    TensorPtr attn_proj_;
};

// Sentence classifier sharing the hierarchical encoder architecture:
// d = tanh(b_d + W_d mean(d_i)), o_i = sigmoid(W_o [d_i; d] + b_o).
class SentenceClassifier {
  public:
    SentenceClassifier(nn::ParameterStore& store, const ExtractorConfig& cfg,
                       const std::string& prefix = "clf")
        : cfg_(cfg),
          encoder_(store, cfg, prefix + ".enc"),
          w_d_(store.create(prefix + ".w_d", cfg.repr_dim(), cfg.repr_dim())),
          b_d_(store.create(prefix + ".b_d", 1, cfg.repr_dim())),
          w_o_(store.create(prefix + ".w_o", 2 * cfg.repr_dim(), 1)),
          b_o_(store.create(prefix + ".b_o", 1, 1)) {}

    const ExtractorConfig& config() const { return cfg_; }
    const HierEncoder& encoder() const { return encoder_; }

    // Classification head alone, from the per-sentence document
    // representations: pooled d = tanh(b_d + W_d mean(d_i)), then
    // per-sentence logits W_o [d_i; d] + b_o.
    TensorPtr head_scores(const TensorPtr& doc_repr) const {
        auto pooled = ad::tanh_act(ad::add(b_d_, ad::matmul(ad::mean_rows(doc_repr), w_d_)));
        auto tiled = ad::repeat_rows(pooled, doc_repr->rows);
        auto joint = ad::concat_cols(doc_repr, tiled);
        return ad::add_rowvec(ad::matmul(joint, w_o_), b_o_);
    }

    TensorPtr scores(const corpus::Document& doc, std::mt19937_64& rng, bool training) const {
        return head_scores(encoder_.encode(doc, rng, training).doc_repr);
    }

    // Per-sentence membership probabilities o_1..o_N.
    std::vector<double> forward(const corpus::Document& doc) const {
        std::mt19937_64 rng(0);
        auto logits = scores(doc, rng, false);
        std::vector<double> probs(logits->rows);
        for (int i = 0; i < logits->rows; ++i) probs[i] = 1.0 / (1.0 + std::exp(-logits->val[i]));
        return probs;
    }

    TensorPtr loss(const corpus::Document& doc, const std::vector<int>& indices,
                   std::mt19937_64& rng, bool training) const {
        auto logits = scores(doc, rng, training);
        std::vector<double> targets(logits->rows, 0.0);
        for (int i : indices) {
            if (i < 0 || i >= logits->rows)
                throw DataError("train_classifier: label index out of range for document " + doc.id);
            targets[i] = 1.0;
        }
        return ad::bce_with_logits(logits, targets);
    }

  private:
    ExtractorConfig cfg_;
    HierEncoder encoder_;
    TensorPtr w_d_, b_d_, w_o_, b_o_;
};

// Indices of the k largest probabilities, sorted ascending, ties by
// lower index; k > N returns all indices.
inline oracle::ExtractLabels select_top_k(const std::vector<double>& probs, int k,
                                          const std::string& doc_id = "") {
    if (k < 1) throw std::invalid_argument("select_top_k: k must be >= 1");
    const int N = static_cast<int>(probs.size());
    std::vector<int> order(N);
    for (int i = 0; i < N; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    order.resize(std::min(k, N));
    std::sort(order.begin(), order.end());
    return {doc_id, order};
}

inline oracle::ExtractLabels lead_k_extract(const corpus::Document& doc, int k) {
    if (k < 1) throw std::invalid_argument("lead_k_extract: k must be >= 1");
    const int n = std::min(k, doc.num_sentences());
    oracle::ExtractLabels out;
    out.doc_id = doc.id;
    for (int i = 0; i < n; ++i) out.indices.push_back(i);
    return out;
}

// ---------------------------------------------------------------------
// Training loops with early stopping on validation loss.
// ---------------------------------------------------------------------

struct TrainStats {
    long long updates = 0;
    double best_valid_loss = std::numeric_limits<double>::infinity();
    std::vector<double> train_loss_curve;  // one entry per update
};

using LabelMap = std::map<std::string, std::vector<int>>;

inline LabelMap label_map(const std::vector<oracle::ExtractLabels>& labels) {
    LabelMap m;
    for (const auto& l : labels) m[l.doc_id] = l.indices;
    return m;
}

namespace detail {

inline const std::vector<int>& labels_for(const LabelMap& labels, const corpus::Document& doc) {
    auto it = labels.find(doc.id);
    if (it == labels.end())
        throw DataError("training: no labels for document " + doc.id);
    return it->second;
}

// Shared mini-batch loop. loss_fn must build the scalar loss for one
// document in training mode; valid_fn returns the mean validation loss.
template <typename LossFn, typename ValidFn>
TrainStats run_training(nn::ParameterStore& store, const nn::TrainConfig& cfg,
                        const std::vector<const corpus::Document*>& train_docs, LossFn&& loss_fn,
                        ValidFn&& valid_fn) {
    if (train_docs.empty()) throw DataError("training: empty corpus");
    std::mt19937_64 shuffle_rng(cfg.seed);
    std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    TrainStats stats;
    std::map<std::string, std::vector<double>> best_params;
    int bad_evals = 0;
    std::vector<size_t> order(train_docs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    size_t cursor = order.size();  // force shuffle on first batch
    while (stats.updates < cfg.max_updates) {
        store.zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                cursor = 0;
            }
            auto loss = loss_fn(*train_docs[order[cursor++]], dropout_rng);
            batch_loss += loss->val[0];
            ad::backward(loss);
        }
        // Average accumulated gradients over the batch.
        for (auto& [_, t] : store.params)
            for (auto& g : t->grad) g /= cfg.batch_size;
        nn::clip_global_norm(store, cfg.clip_norm);
        nn::adam_step(store, cfg, cfg.lr_at(store.step));
        stats.updates += 1;
        stats.train_loss_curve.push_back(batch_loss / cfg.batch_size);

        if (stats.updates % cfg.eval_every == 0) {
            const double vl = valid_fn();
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

}  // namespace detail

inline TrainStats train_pointer(PointerExtractor& model, nn::ParameterStore& store,
                                const std::vector<corpus::Document>& train_docs,
                                const LabelMap& train_labels,
                                const std::vector<corpus::Document>& valid_docs,
                                const LabelMap& valid_labels, const nn::TrainConfig& cfg) {
    std::vector<const corpus::Document*> usable;
    for (const auto& d : train_docs)
        if (!detail::labels_for(train_labels, d).empty()) usable.push_back(&d);
    auto loss_fn = [&](const corpus::Document& doc, std::mt19937_64& rng) {
        return model.teacher_forced_loss(doc, detail::labels_for(train_labels, doc), rng, true);
    };
    auto valid_fn = [&]() {
        std::mt19937_64 rng(0);
        double total = 0.0;
        int n = 0;
        for (const auto& d : valid_docs) {
            const auto& idx = detail::labels_for(valid_labels, d);
            if (idx.empty()) continue;
            total += model.teacher_forced_loss(d, idx, rng, false)->val[0];
            n += 1;
        }
        return n ? total / n : 0.0;
    };
    return detail::run_training(store, cfg, usable, loss_fn, valid_fn);
}

inline TrainStats train_classifier(SentenceClassifier& model, nn::ParameterStore& store,
                                   const std::vector<corpus::Document>& train_docs,
                                   const LabelMap& train_labels,
                                   const std::vector<corpus::Document>& valid_docs,
                                   const LabelMap& valid_labels, const nn::TrainConfig& cfg) {
    std::vector<const corpus::Document*> usable;
    for (const auto& d : train_docs) {
        detail::labels_for(train_labels, d);  // doc/label mismatch check
        usable.push_back(&d);
    }
    auto loss_fn = [&](const corpus::Document& doc, std::mt19937_64& rng) {
        return model.loss(doc, detail::labels_for(train_labels, doc), rng, true);
    };
    auto valid_fn = [&]() {
        std::mt19937_64 rng(0);
        double total = 0.0;
        int n = 0;
        for (const auto& d : valid_docs) {
            total += model.loss(d, detail::labels_for(valid_labels, d), rng, false)->val[0];
            n += 1;
        }
        return n ? total / n : 0.0;
    };
    return detail::run_training(store, cfg, usable, loss_fn, valid_fn);
}

// Teacher-forced next-pick accuracy of the pointer on a labeled set.
inline double pointer_next_pick_accuracy(const PointerExtractor& model,
                                         const std::vector<corpus::Document>& docs,
                                         const LabelMap& labels) {
    std::mt19937_64 rng(0);
    int correct = 0, total = 0;
    for (const auto& d : docs) {
        const auto& idx = detail::labels_for(labels, d);
        if (idx.empty()) continue;
        model.teacher_forced_loss(d, idx, rng, false, &correct, &total);
    }
    return total ? static_cast<double>(correct) / total : 0.0;
}

// Thresholded classification F1 against the label sets.
inline double classifier_f1(const SentenceClassifier& model,
                            const std::vector<corpus::Document>& docs, const LabelMap& labels,
                            double threshold = 0.5) {
    long long tp = 0, fp = 0, fn = 0;
    for (const auto& d : docs) {
        const auto& idx = detail::labels_for(labels, d);
        std::vector<bool> truth(d.num_sentences(), false);
        for (int i : idx) truth[i] = true;
        auto probs = model.forward(d);
        for (size_t i = 0; i < probs.size(); ++i) {
            const bool pred = probs[i] >= threshold;
            if (pred && truth[i]) ++tp;
            else if (pred) ++fp;
            else if (truth[i]) ++fn;
        }
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom > 0 ? 2.0 * tp / denom : 0.0;
}

}  // namespace longsum::ext
