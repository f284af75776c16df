#pragma once

// Decoder-only transformer language model: learned positional
// embeddings, pre-norm blocks, causal self-attention, GELU MLP and a
// weight-tied output projection.

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "longsum/autodiff.hpp"
#include "longsum/nn.hpp"

namespace longsum::tlm {

using ad::TensorPtr;

struct TlmConfig {
    int n_layers = 4;
    int d_model = 128;
    int n_heads = 4;
    int window = 256;
    int vocab_size = 0;
    double dropout = 0.1;

    std::string describe() const {
        return "tlm:l" + std::to_string(n_layers) + ":d" + std::to_string(d_model) + ":h" +
               std::to_string(n_heads) + ":w" + std::to_string(window) + ":v" +
               std::to_string(vocab_size);
    }
};

// Desk-scale default above; the full-scale preset mirrors the published
// architecture and is not exercised by tests.
inline TlmConfig desk_preset(int vocab_size) {
    TlmConfig c;
    c.vocab_size = vocab_size;
    return c;
}

inline TlmConfig paper_preset(int vocab_size) {
    TlmConfig c;
    c.n_layers = 20;
    c.d_model = 768;
    c.n_heads = 12;
    c.window = 1024;
    c.vocab_size = vocab_size;
    return c;
}

class TransformerLM {
  public:
    TransformerLM(nn::ParameterStore& store, const TlmConfig& cfg, const std::string& prefix = "tlm")
        : cfg_(cfg), store_(&store), prefix_(prefix) {
        if (cfg.vocab_size <= 0) throw std::invalid_argument("TransformerLM: vocab_size not set");
        if (cfg.d_model % cfg.n_heads != 0)
            throw std::invalid_argument("TransformerLM: d_model must be divisible by n_heads");
        const int d = cfg.d_model;
        wte_ = store.create(p("wte"), cfg.vocab_size, d);
        wpe_ = store.create(p("wpe"), cfg.window, d);
        for (int l = 0; l < cfg.n_layers; ++l) {
            const std::string lp = "l" + std::to_string(l) + ".";
            store.create(p(lp + "ln1.g"), 1, d);
            store.create(p(lp + "ln1.b"), 1, d);
            store.create(p(lp + "attn.wqkv"), d, 3 * d);
            store.create(p(lp + "attn.bqkv"), 1, 3 * d);
            store.create(p(lp + "attn.wo"), d, d);
            store.create(p(lp + "attn.bo"), 1, d);
            store.create(p(lp + "ln2.g"), 1, d);
            store.create(p(lp + "ln2.b"), 1, d);
            store.create(p(lp + "mlp.w1"), d, 4 * d);
            store.create(p(lp + "mlp.b1"), 1, 4 * d);
            store.create(p(lp + "mlp.w2"), 4 * d, d);
            store.create(p(lp + "mlp.b2"), 1, d);
        }
        store.create(p("lnf.g"), 1, d);
        store.create(p("lnf.b"), 1, d);
    }

    // normal(0, 0.02) weights, no depth-dependent rescaling; layer-norm
    // gains start at 1.
    void init(std::mt19937_64& rng) {
        std::normal_distribution<double> dist(0.0, 0.02);
        auto ends_with = [](const std::string& s, const std::string& suf) {
            return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
        };
        for (auto& [name, t] : store_->params) {
            if (name.rfind(prefix_ + ".", 0) != 0) continue;
            if (ends_with(name, "ln1.g") || ends_with(name, "ln2.g") || ends_with(name, "lnf.g")) {
                std::fill(t->val.begin(), t->val.end(), 1.0);
            } else if (ends_with(name, ".b") || ends_with(name, ".bqkv") || ends_with(name, ".bo") ||
                       ends_with(name, ".b1") || ends_with(name, ".b2")) {
                std::fill(t->val.begin(), t->val.end(), 0.0);
            } else {
                for (auto& v : t->val) v = dist(rng);
            }
        }
    }

    // Next-token logits per position; causal masking guarantees that
    // position t depends only on tokens <= t.
    TensorPtr forward(const std::vector<int>& tokens, bool training, std::mt19937_64& rng) const {
        const int T = static_cast<int>(tokens.size());
        if (T == 0) throw std::invalid_argument("TransformerLM: empty input");
        if (T > cfg_.window)
            throw std::invalid_argument("TransformerLM: input length " + std::to_string(T) +
                                        " exceeds window " + std::to_string(cfg_.window));
        const int d = cfg_.d_model;
        const int H = cfg_.n_heads;
        const int hd = d / H;

        std::vector<int> positions(T);
        for (int t = 0; t < T; ++t) positions[t] = t;
        auto x = ad::add(ad::embedding_rows(wte_, tokens), ad::embedding_rows(wpe_, positions));
        x = ad::dropout(x, cfg_.dropout, rng, training);

        // Additive causal mask, shared by all heads at this length.
        std::vector<double> mask(static_cast<size_t>(T) * T, 0.0);
        for (int i = 0; i < T; ++i)
            for (int j = i + 1; j < T; ++j) mask[static_cast<size_t>(i) * T + j] = -1e30;

        const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
        for (int l = 0; l < cfg_.n_layers; ++l) {
            const std::string lp = "l" + std::to_string(l) + ".";
            auto a = ad::layer_norm(x, g(lp + "ln1.g"), g(lp + "ln1.b"));
            auto qkv = ad::add_rowvec(ad::matmul(a, g(lp + "attn.wqkv")), g(lp + "attn.bqkv"));
            std::vector<TensorPtr> heads;
            heads.reserve(H);
            for (int h = 0; h < H; ++h) {
                auto q = ad::slice_cols(qkv, h * hd, hd);
                auto k = ad::slice_cols(qkv, d + h * hd, hd);
                auto v = ad::slice_cols(qkv, 2 * d + h * hd, hd);
                auto scores = ad::scale(ad::matmul(q, ad::transpose(k)), att_scale);
                auto att = ad::softmax_rows(scores, &mask);
                att = ad::dropout(att, cfg_.dropout, rng, training);
                heads.push_back(ad::matmul(att, v));
            }
            TensorPtr merged = heads[0];
            for (int h = 1; h < H; ++h) merged = ad::concat_cols(merged, heads[h]);
            auto att_out = ad::add_rowvec(ad::matmul(merged, g(lp + "attn.wo")), g(lp + "attn.bo"));
            att_out = ad::dropout(att_out, cfg_.dropout, rng, training);
            x = ad::add(x, att_out);

            auto m = ad::layer_norm(x, g(lp + "ln2.g"), g(lp + "ln2.b"));
            auto hmid = ad::gelu(ad::add_rowvec(ad::matmul(m, g(lp + "mlp.w1")), g(lp + "mlp.b1")));
            auto mlp_out = ad::add_rowvec(ad::matmul(hmid, g(lp + "mlp.w2")), g(lp + "mlp.b2"));
            mlp_out = ad::dropout(mlp_out, cfg_.dropout, rng, training);
            x = ad::add(x, mlp_out);
        }
        x = ad::layer_norm(x, g("lnf.g"), g("lnf.b"));
        // Tied output projection.
        return ad::matmul(x, ad::transpose(wte_));
    }

    TensorPtr token_embeddings() const { return wte_; }
    const TlmConfig& config() const { return cfg_; }

  private:
    std::string p(const std::string& s) const { return prefix_ + "." + s; }
    TensorPtr g(const std::string& s) const { return store_->get(p(s)); }

    TlmConfig cfg_;
    nn::ParameterStore* store_;
    std::string prefix_;
    TensorPtr wte_, wpe_;
};

}  // namespace longsum::tlm
