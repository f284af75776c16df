#pragma once

// Shared training machinery: named parameter store, Adam with decoupled
// weight decay, warmup+cosine learning-rate schedule, gradient clipping
// and the versioned binary checkpoint container.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "longsum/autodiff.hpp"

namespace longsum::nn {

using ad::Tensor;
using ad::TensorPtr;

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct ScheduleSpec {
    long long warmup_steps = 40000;
    double peak_lr = 2.5e-4;
    long long decay_steps = 200000;
};

// Linear ramp to peak_lr over warmup_steps, then cosine annealing to 0
// over decay_steps; 0 beyond the schedule end.
inline double lr_schedule(long long step, const ScheduleSpec& spec) {
    if (step < 0) throw std::invalid_argument("lr_schedule: negative step");
    if (step <= spec.warmup_steps) {
        if (spec.warmup_steps == 0) return spec.peak_lr;
        return spec.peak_lr * static_cast<double>(step) / spec.warmup_steps;
    }
    const long long d = step - spec.warmup_steps;
    if (d >= spec.decay_steps) return 0.0;
    const double progress = static_cast<double>(d) / spec.decay_steps;
    return spec.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

struct TrainConfig {
    ScheduleSpec schedule;
    bool use_schedule = false;  // when false, constant lr below
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-5;
    int batch_size = 32;
    double dropout = 0.5;
    uint64_t seed = 1;
    long long eval_every = 200;
    int patience = 50;
    long long max_updates = 100000;
    double clip_norm = 1.0;

    double lr_at(long long step) const { return use_schedule ? lr_schedule(step, schedule) : lr; }
};

struct ParameterStore {
    struct AdamState {
        std::vector<double> m, v;
    };

    std::map<std::string, TensorPtr> params;  // ordered for determinism
    std::map<std::string, AdamState> opt;
    long long step = 0;

    TensorPtr get(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw std::out_of_range("ParameterStore: unknown parameter " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params.count(name) != 0; }

    TensorPtr create(const std::string& name, int rows, int cols) {
        if (params.count(name)) {
            auto& t = params[name];
            if (t->rows != rows || t->cols != cols)
                throw std::invalid_argument("ParameterStore: shape conflict for " + name);
            return t;
        }
        auto t = ad::make_tensor(rows, cols);
        params[name] = t;
        return t;
    }

    void zero_grad() {
        for (auto& [_, t] : params) std::fill(t->grad.begin(), t->grad.end(), 0.0);
    }

    size_t num_values() const {
        size_t n = 0;
        for (auto& [_, t] : params) n += t->val.size();
        return n;
    }
};

// normal(0, std) init, no depth-dependent rescaling.
inline void init_normal(ParameterStore& store, std::mt19937_64& rng, double stddev = 0.02) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& [_, t] : store.params)
        for (auto& v : t->val) v = dist(rng);
}

inline double global_grad_norm(const ParameterStore& store) {
    double s = 0.0;
    for (auto& [_, t] : store.params)
        for (double g : t->grad) s += g * g;
    return std::sqrt(s);
}

inline void clip_global_norm(ParameterStore& store, double max_norm) {
    const double norm = global_grad_norm(store);
    if (norm <= max_norm || norm == 0.0) return;
    const double s = max_norm / norm;
    for (auto& [_, t] : store.params)
        for (auto& g : t->grad) g *= s;
}

// Standard Adam with decoupled weight decay; one call advances the global
// step shared by all parameters.
inline void adam_step(ParameterStore& store, const TrainConfig& cfg, double lr) {
    store.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.step));
    for (auto& [name, t] : store.params) {
        if (t->grad.size() != t->val.size())
            throw std::runtime_error("adam_step: missing gradient for parameter " + name);
        auto& st = store.opt[name];
        if (st.m.empty()) {
            st.m.assign(t->val.size(), 0.0);
            st.v.assign(t->val.size(), 0.0);
        }
        for (size_t i = 0; i < t->val.size(); ++i) {
            const double g = t->grad[i];
            st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
            st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            t->val[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * t->val[i]);
        }
    }
}

// ---------------------------------------------------------------------
// Checkpoint container.
//
// Byte layout (all integers little-endian):
//   magic   "LSCK"            4 bytes
//   version u32               currently 1
//   config_hash u64
//   vocab_hash  u64
//   step        u64
//   n_params    u32
//   repeated n_params times:
//     name_len u32, name bytes, rows u32, cols u32, rows*cols f64 values
// ---------------------------------------------------------------------

constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    uint32_t version = kCheckpointVersion;
    uint64_t config_hash = 0;
    uint64_t vocab_hash = 0;
    uint64_t step = 0;
};

namespace detail {
template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw std::runtime_error("checkpoint: truncated or corrupt file");
    return v;
}
}  // namespace detail

inline void save_checkpoint(const ParameterStore& store, const CheckpointMeta& meta,
                            const std::string& path) {
    for (auto& [name, t] : store.params)
        for (double v : t->val)
            if (!std::isfinite(v)) throw std::runtime_error("save_checkpoint: non-finite value in " + name);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write("LSCK", 4);
    detail::write_pod<uint32_t>(os, meta.version);
    detail::write_pod<uint64_t>(os, meta.config_hash);
    detail::write_pod<uint64_t>(os, meta.vocab_hash);
    detail::write_pod<uint64_t>(os, meta.step);
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(store.params.size()));
    for (auto& [name, t] : store.params) {
        detail::write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod<uint32_t>(os, static_cast<uint32_t>(t->rows));
        detail::write_pod<uint32_t>(os, static_cast<uint32_t>(t->cols));
        os.write(reinterpret_cast<const char*>(t->val.data()),
                 static_cast<std::streamsize>(t->val.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
    CheckpointMeta meta;
    ParameterStore store;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "LSCK", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    Checkpoint ck;
    ck.meta.version = detail::read_pod<uint32_t>(is);
    if (ck.meta.version != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(ck.meta.version));
    ck.meta.config_hash = detail::read_pod<uint64_t>(is);
    ck.meta.vocab_hash = detail::read_pod<uint64_t>(is);
    ck.meta.step = detail::read_pod<uint64_t>(is);
    const uint32_t n = detail::read_pod<uint32_t>(is);
    for (uint32_t p = 0; p < n; ++p) {
        const uint32_t len = detail::read_pod<uint32_t>(is);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw std::runtime_error("checkpoint: truncated or corrupt file");
        const uint32_t rows = detail::read_pod<uint32_t>(is);
        const uint32_t cols = detail::read_pod<uint32_t>(is);
        auto t = ad::make_tensor(static_cast<int>(rows), static_cast<int>(cols));
        if (!is.read(reinterpret_cast<char*>(t->val.data()),
                     static_cast<std::streamsize>(t->val.size() * sizeof(double))))
            throw std::runtime_error("checkpoint: truncated or corrupt file");
        ck.store.params[name] = t;
    }
    ck.store.step = static_cast<long long>(ck.meta.step);
    return ck;
}

}  // namespace longsum::nn
