#pragma once

// LSTM cell, stacked LSTM and bidirectional encoder on top of the
// autodiff engine. Sequences are lists of [1,d] row vectors.

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "longsum/autodiff.hpp"
#include "longsum/nn.hpp"

namespace longsum::nn {

struct LstmState {
    TensorPtr h, c;  // [1,H] each
};

// Gate order in the fused projection: input, forget, cell, output.
struct LstmCell {
    int input_dim = 0;
    int hidden_dim = 0;
    TensorPtr w_ih;  // [input, 4H]
    TensorPtr w_hh;  // [H, 4H]
    TensorPtr b;     // [1, 4H]

    LstmCell() = default;
    LstmCell(ParameterStore& store, const std::string& prefix, int input, int hidden)
        : input_dim(input), hidden_dim(hidden) {
        w_ih = store.create(prefix + ".w_ih", input, 4 * hidden);
        w_hh = store.create(prefix + ".w_hh", hidden, 4 * hidden);
        b = store.create(prefix + ".b", 1, 4 * hidden);
    }

    LstmState zero_state() const {
        return {ad::make_tensor(1, hidden_dim, false), ad::make_tensor(1, hidden_dim, false)};
    }

    LstmState step(const TensorPtr& x, const LstmState& prev) const {
        auto z = ad::add_rowvec(ad::add(ad::matmul(x, w_ih), ad::matmul(prev.h, w_hh)), b);
        const int H = hidden_dim;
        auto i = ad::sigmoid(ad::slice_cols(z, 0, H));
        auto f = ad::sigmoid(ad::slice_cols(z, H, H));
        auto g = ad::tanh_act(ad::slice_cols(z, 2 * H, H));
        auto o = ad::sigmoid(ad::slice_cols(z, 3 * H, H));
        auto c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
        auto h = ad::mul(o, ad::tanh_act(c));
        return {h, c};
    }
};

// Stacked unidirectional LSTM with dropout at the output of each
// intermediate layer.
struct StackedLstm {
    std::vector<LstmCell> cells;
    double dropout_p = 0.0;

    StackedLstm() = default;
    StackedLstm(ParameterStore& store, const std::string& prefix, int input, int hidden, int layers,
                double dropout = 0.0)
        : dropout_p(dropout) {
        if (layers < 1) throw std::invalid_argument("StackedLstm: need at least one layer");
        for (int l = 0; l < layers; ++l)
            cells.emplace_back(store, prefix + ".l" + std::to_string(l), l == 0 ? input : hidden, hidden);
    }

    std::vector<LstmState> zero_states() const {
        std::vector<LstmState> s;
        s.reserve(cells.size());
        for (const auto& c : cells) s.push_back(c.zero_state());
        return s;
    }

    // Single time step through the whole stack; states updated in place.
    TensorPtr step(const TensorPtr& x, std::vector<LstmState>& states, std::mt19937_64& rng,
                   bool training) const {
        TensorPtr cur = x;
        for (size_t l = 0; l < cells.size(); ++l) {
            states[l] = cells[l].step(cur, states[l]);
            cur = states[l].h;
            if (l + 1 < cells.size()) cur = ad::dropout(cur, dropout_p, rng, training);
        }
        return cur;
    }

    // Full sequence; returns last-layer outputs per position.
    std::vector<TensorPtr> run(const std::vector<TensorPtr>& seq, std::mt19937_64& rng,
                               bool training) const {
        if (seq.empty()) throw std::invalid_argument("StackedLstm: empty sequence");
        auto states = zero_states();
        std::vector<TensorPtr> out;
        out.reserve(seq.size());
        for (const auto& x : seq) out.push_back(step(x, states, rng, training));
        return out;
    }
};

struct BiLstmResult {
    std::vector<TensorPtr> outputs;  // per position, [1, 2H]
    TensorPtr final_state;           // [1, 2H]: last-layer last fwd state | last bwd state
};

struct BiLstm {
    StackedLstm fwd, bwd;

    BiLstm() = default;
    BiLstm(ParameterStore& store, const std::string& prefix, int input, int hidden, int layers,
           double dropout = 0.0)
        : fwd(store, prefix + ".fwd", input, hidden, layers, dropout),
          bwd(store, prefix + ".bwd", input, hidden, layers, dropout) {}

    BiLstmResult encode(const std::vector<TensorPtr>& seq, std::mt19937_64& rng,
                        bool training) const {
        if (seq.empty()) throw std::invalid_argument("BiLstm: empty sequence");
        auto f = fwd.run(seq, rng, training);
        std::vector<TensorPtr> rev(seq.rbegin(), seq.rend());
        auto b = bwd.run(rev, rng, training);
        BiLstmResult res;
        res.outputs.reserve(seq.size());
        for (size_t t = 0; t < seq.size(); ++t)
            res.outputs.push_back(ad::concat_cols(f[t], b[seq.size() - 1 - t]));
        res.final_state = ad::concat_cols(f.back(), b.back());
        return res;
    }
};

}  // namespace longsum::nn
