#pragma once

// Minimal reverse-mode automatic differentiation on dense row-major
// matrices. Double precision throughout; graphs are built per forward
// pass and freed when the last TensorPtr goes out of scope.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace longsum::ad {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> val;
    std::vector<double> grad;
    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> back;  // accumulates into parents' grad
    bool needs_grad = true;

    int size() const { return rows * cols; }
    double& at(int r, int c) { return val[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return val[static_cast<size_t>(r) * cols + c]; }
};

inline TensorPtr make_tensor(int rows, int cols, bool needs_grad = true) {
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument("make_tensor: non-positive shape " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    auto t = std::make_shared<Tensor>();
    t->rows = rows;
    t->cols = cols;
    t->val.assign(static_cast<size_t>(rows) * cols, 0.0);
    t->grad.assign(static_cast<size_t>(rows) * cols, 0.0);
    t->needs_grad = needs_grad;
    return t;
}

inline TensorPtr from_values(int rows, int cols, std::vector<double> v, bool needs_grad = true) {
    auto t = make_tensor(rows, cols, needs_grad);
    if (static_cast<int>(v.size()) != rows * cols)
        throw std::invalid_argument("from_values: value count does not match shape");
    t->val = std::move(v);
    return t;
}

inline std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

inline void require_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) +
                                    " vs " + shape_str(b));
}

// C[mxn] += A[mxk] * B[kxn]
inline void mm_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        double* c = C + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[p];
            if (av == 0.0) continue;
            const double* b = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[mxk] += A[mxn] * B^T, with B stored [kxn]
inline void mm_acc_bT(const double* A, const double* B, double* C, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<size_t>(i) * n;
        double* c = C + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* b = B + static_cast<size_t>(p) * n;
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a[j] * b[j];
            c[p] += s;
        }
    }
}

// C[kxn] += A^T * B, with A stored [mxk], B stored [mxn]
inline void mm_acc_aT(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        const double* b = B + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[p];
            if (av == 0.0) continue;
            double* c = C + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

inline TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols != b->rows)
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(*a) + " vs " +
                                    shape_str(*b));
    auto out = make_tensor(a->rows, b->cols);
    mm_acc(a->val.data(), b->val.data(), out->val.data(), a->rows, a->cols, b->cols);
    out->parents = {a, b};
    out->back = [a, b](Tensor& o) {
        if (a->needs_grad)
            mm_acc_bT(o.grad.data(), b->val.data(), a->grad.data(), a->rows, b->cols, a->cols);
        if (b->needs_grad)
            mm_acc_aT(a->val.data(), o.grad.data(), b->grad.data(), a->rows, a->cols, b->cols);
    };
    return out;
}

inline TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require_shape("add", *a, *b);
    auto out = make_tensor(a->rows, a->cols);
    for (int i = 0; i < out->size(); ++i) out->val[i] = a->val[i] + b->val[i];
    out->parents = {a, b};
    out->back = [a, b](Tensor& o) {
        if (a->needs_grad)
            for (int i = 0; i < o.size(); ++i) a->grad[i] += o.grad[i];
        if (b->needs_grad)
            for (int i = 0; i < o.size(); ++i) b->grad[i] += o.grad[i];
    };
    return out;
}

inline TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    require_shape("sub", *a, *b);
    auto out = make_tensor(a->rows, a->cols);
    for (int i = 0; i < out->size(); ++i) out->val[i] = a->val[i] - b->val[i];
    out->parents = {a, b};
    out->back = [a, b](Tensor& o) {
        if (a->needs_grad)
            for (int i = 0; i < o.size(); ++i) a->grad[i] += o.grad[i];
        if (b->needs_grad)
            for (int i = 0; i < o.size(); ++i) b->grad[i] -= o.grad[i];
    };
    return out;
}

// Broadcast a [1,c] row vector over every row of a.
inline TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b) {
    if (b->rows != 1 || b->cols != a->cols)
        throw std::invalid_argument("add_rowvec: shape mismatch " + shape_str(*a) + " vs " +
                                    shape_str(*b));
    auto out = make_tensor(a->rows, a->cols);
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) out->at(r, c) = a->at(r, c) + b->val[c];
    out->parents = {a, b};
    out->back = [a, b](Tensor& o) {
        if (a->needs_grad)
            for (int i = 0; i < o.size(); ++i) a->grad[i] += o.grad[i];
        if (b->needs_grad)
            for (int r = 0; r < o.rows; ++r)
                for (int c = 0; c < o.cols; ++c) b->grad[c] += o.grad[static_cast<size_t>(r) * o.cols + c];
    };
    return out;
}

inline TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require_shape("mul", *a, *b);
    auto out = make_tensor(a->rows, a->cols);
    for (int i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * b->val[i];
    out->parents = {a, b};
    out->back = [a, b](Tensor& o) {
        if (a->needs_grad)
            for (int i = 0; i < o.size(); ++i) a->grad[i] += o.grad[i] * b->val[i];
        if (b->needs_grad)
            for (int i = 0; i < o.size(); ++i) b->grad[i] += o.grad[i] * a->val[i];
    };
    return out;
}

inline TensorPtr scale(const TensorPtr& a, double s) {
    auto out = make_tensor(a->rows, a->cols);
    for (int i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * s;
    out->parents = {a};
    out->back = [a, s](Tensor& o) {
        if (a->needs_grad)
            for (int i = 0; i < o.size(); ++i) a->grad[i] += o.grad[i] * s;
    };
    return out;
}

inline TensorPtr transpose(const TensorPtr& a) {
    auto out = make_tensor(a->cols, a->rows);
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) out->at(c, r) = a->at(r, c);
    out->parents = {a};
    out->back = [a](Tensor& o) {
        if (!a->needs_grad) return;
        for (int r = 0; r < o.rows; ++r)
            for (int c = 0; c < o.cols; ++c)
                a->grad[static_cast<size_t>(c) * a->cols + r] += o.grad[static_cast<size_t>(r) * o.cols + c];
    };
    return out;
}

inline TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
    if (a->rows != b->rows)
        throw std::invalid_argument("concat_cols: shape mismatch " + shape_str(*a) + " vs " +
                                    shape_str(*b));
    auto out = make_tensor(a->rows, a->cols + b->cols);
    for (int r = 0; r < a->rows; ++r) {
        for (int c = 0; c < a->cols; ++c) out->at(r, c) = a->at(r, c);
        for (int c = 0; c < b->cols; ++c) out->at(r, a->cols + c) = b->at(r, c);
    }
    out->parents = {a, b};
    out->back = [a, b](Tensor& o) {
        for (int r = 0; r < o.rows; ++r) {
            if (a->needs_grad)
                for (int c = 0; c < a->cols; ++c)
                    a->grad[static_cast<size_t>(r) * a->cols + c] += o.grad[static_cast<size_t>(r) * o.cols + c];
            if (b->needs_grad)
                for (int c = 0; c < b->cols; ++c)
                    b->grad[static_cast<size_t>(r) * b->cols + c] +=
                        o.grad[static_cast<size_t>(r) * o.cols + a->cols + c];
        }
    };
    return out;
}

inline TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const int cols = parts[0]->cols;
    int rows = 0;
    for (const auto& p : parts) {
        if (p->cols != cols)
            throw std::invalid_argument("concat_rows: column mismatch");
        rows += p->rows;
    }
    auto out = make_tensor(rows, cols);
    int r0 = 0;
    for (const auto& p : parts) {
        std::copy(p->val.begin(), p->val.end(), out->val.begin() + static_cast<size_t>(r0) * cols);
        r0 += p->rows;
    }
    out->parents = parts;
    out->back = [parts](Tensor& o) {
        int r = 0;
        for (const auto& p : parts) {
            if (p->needs_grad)
                for (int i = 0; i < p->size(); ++i)
                    p->grad[i] += o.grad[static_cast<size_t>(r) * o.cols + i];
            r += p->rows;
        }
    };
    return out;
}

inline TensorPtr slice_cols(const TensorPtr& a, int start, int len) {
    if (start < 0 || len <= 0 || start + len > a->cols)
        throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of " + shape_str(*a));
    auto out = make_tensor(a->rows, len);
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < len; ++c) out->at(r, c) = a->at(r, start + c);
    out->parents = {a};
    out->back = [a, start, len](Tensor& o) {
        if (!a->needs_grad) return;
        for (int r = 0; r < o.rows; ++r)
            for (int c = 0; c < len; ++c)
                a->grad[static_cast<size_t>(r) * a->cols + start + c] += o.grad[static_cast<size_t>(r) * len + c];
    };
    return out;
}

inline TensorPtr slice_rows(const TensorPtr& a, int start, int len) {
    if (start < 0 || len <= 0 || start + len > a->rows)
        throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of " + shape_str(*a));
    auto out = make_tensor(len, a->cols);
    for (int r = 0; r < len; ++r)
        for (int c = 0; c < a->cols; ++c) out->at(r, c) = a->at(start + r, c);
    out->parents = {a};
    out->back = [a, start, len](Tensor& o) {
        if (!a->needs_grad) return;
        for (int r = 0; r < len; ++r)
            for (int c = 0; c < o.cols; ++c)
                a->grad[static_cast<size_t>(start + r) * a->cols + c] += o.grad[static_cast<size_t>(r) * o.cols + c];
    };
    return out;
}

inline TensorPtr repeat_rows(const TensorPtr& a, int n) {
    if (a->rows != 1) throw std::invalid_argument("repeat_rows: expected row vector, got " + shape_str(*a));
    auto out = make_tensor(n, a->cols);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < a->cols; ++c) out->at(r, c) = a->val[c];
    out->parents = {a};
    out->back = [a](Tensor& o) {
        if (!a->needs_grad) return;
        for (int r = 0; r < o.rows; ++r)
            for (int c = 0; c < o.cols; ++c) a->grad[c] += o.grad[static_cast<size_t>(r) * o.cols + c];
    };
    return out;
}

inline TensorPtr mean_rows(const TensorPtr& a) {
    auto out = make_tensor(1, a->cols);
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) out->val[c] += a->at(r, c);
    const double inv = 1.0 / a->rows;
    for (int c = 0; c < a->cols; ++c) out->val[c] *= inv;
    out->parents = {a};
    out->back = [a, inv](Tensor& o) {
        if (!a->needs_grad) return;
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c) a->grad[static_cast<size_t>(r) * a->cols + c] += o.grad[c] * inv;
    };
    return out;
}

inline TensorPtr sigmoid(const TensorPtr& a) {
    auto out = make_tensor(a->rows, a->cols);
    for (int i = 0; i < out->size(); ++i) out->val[i] = 1.0 / (1.0 + std::exp(-a->val[i]));
    out->parents = {a};
    out->back = [a](Tensor& o) {
        if (!a->needs_grad) return;
        for (int i = 0; i < o.size(); ++i) {
            const double y = o.val[i];
            a->grad[i] += o.grad[i] * y * (1.0 - y);
        }
    };
    return out;
}

inline TensorPtr tanh_act(const TensorPtr& a) {
    auto out = make_tensor(a->rows, a->cols);
    for (int i = 0; i < out->size(); ++i) out->val[i] = std::tanh(a->val[i]);
    out->parents = {a};
    out->back = [a](Tensor& o) {
        if (!a->needs_grad) return;
        for (int i = 0; i < o.size(); ++i) {
            const double y = o.val[i];
            a->grad[i] += o.grad[i] * (1.0 - y * y);
        }
    };
    return out;
}

// Exact erf form of the Gaussian error linear unit.
inline TensorPtr gelu(const TensorPtr& a) {
    auto out = make_tensor(a->rows, a->cols);
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    for (int i = 0; i < out->size(); ++i) {
        const double x = a->val[i];
        out->val[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    out->parents = {a};
    out->back = [a](Tensor& o) {
        if (!a->needs_grad) return;
        constexpr double inv_sqrt2 = 0.7071067811865475244;
        constexpr double inv_sqrt2pi = 0.3989422804014326779;
        for (int i = 0; i < o.size(); ++i) {
            const double x = a->val[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            a->grad[i] += o.grad[i] * (cdf + x * pdf);
        }
    };
    return out;
}

// Row-wise softmax; additive_mask (same layout, no grad) is applied to the
// logits before normalization when non-null.
inline TensorPtr softmax_rows(const TensorPtr& a, const std::vector<double>* additive_mask = nullptr) {
    if (additive_mask && static_cast<int>(additive_mask->size()) != a->size())
        throw std::invalid_argument("softmax_rows: mask size mismatch");
    auto out = make_tensor(a->rows, a->cols);
    for (int r = 0; r < a->rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < a->cols; ++c) {
            double v = a->at(r, c);
            if (additive_mask) v += (*additive_mask)[static_cast<size_t>(r) * a->cols + c];
            out->at(r, c) = v;
            mx = std::max(mx, v);
        }
        double z = 0.0;
        for (int c = 0; c < a->cols; ++c) {
            const double e = std::exp(out->at(r, c) - mx);
            out->at(r, c) = e;
            z += e;
        }
        for (int c = 0; c < a->cols; ++c) out->at(r, c) /= z;
    }
    out->parents = {a};
    out->back = [a](Tensor& o) {
        if (!a->needs_grad) return;
        for (int r = 0; r < o.rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < o.cols; ++c)
                dot += o.grad[static_cast<size_t>(r) * o.cols + c] * o.val[static_cast<size_t>(r) * o.cols + c];
            for (int c = 0; c < o.cols; ++c) {
                const size_t i = static_cast<size_t>(r) * o.cols + c;
                a->grad[i] += o.val[i] * (o.grad[i] - dot);
            }
        }
    };
    return out;
}

inline TensorPtr layer_norm(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias,
                            double eps = 1e-5) {
    if (gain->rows != 1 || gain->cols != a->cols || bias->rows != 1 || bias->cols != a->cols)
        throw std::invalid_argument("layer_norm: parameter shape mismatch for input " + shape_str(*a));
    auto out = make_tensor(a->rows, a->cols);
    auto xhat = std::make_shared<std::vector<double>>(a->size());
    auto inv_std = std::make_shared<std::vector<double>>(a->rows);
    const int C = a->cols;
    for (int r = 0; r < a->rows; ++r) {
        double mu = 0.0;
        for (int c = 0; c < C; ++c) mu += a->at(r, c);
        mu /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = a->at(r, c) - mu;
            var += d * d;
        }
        var /= C;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (int c = 0; c < C; ++c) {
            const double xh = (a->at(r, c) - mu) * is;
            (*xhat)[static_cast<size_t>(r) * C + c] = xh;
            out->at(r, c) = gain->val[c] * xh + bias->val[c];
        }
    }
    out->parents = {a, gain, bias};
    out->back = [a, gain, bias, xhat, inv_std, C](Tensor& o) {
        for (int r = 0; r < o.rows; ++r) {
            const double* xh = xhat->data() + static_cast<size_t>(r) * C;
            const double* go = o.grad.data() + static_cast<size_t>(r) * C;
            if (gain->needs_grad)
                for (int c = 0; c < C; ++c) gain->grad[c] += go[c] * xh[c];
            if (bias->needs_grad)
                for (int c = 0; c < C; ++c) bias->grad[c] += go[c];
            if (!a->needs_grad) continue;
            double m1 = 0.0, m2 = 0.0;
            for (int c = 0; c < C; ++c) {
                const double dxh = go[c] * gain->val[c];
                m1 += dxh;
                m2 += dxh * xh[c];
            }
            m1 /= C;
            m2 /= C;
            const double is = (*inv_std)[r];
            for (int c = 0; c < C; ++c) {
                const double dxh = go[c] * gain->val[c];
                a->grad[static_cast<size_t>(r) * C + c] += is * (dxh - m1 - xh[c] * m2);
            }
        }
    };
    return out;
}

// Inverted dropout; identity when not training or p == 0.
inline TensorPtr dropout(const TensorPtr& a, double p, std::mt19937_64& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
    if (!training || p == 0.0) return a;
    auto keep = std::make_shared<std::vector<double>>(a->size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double s = 1.0 / (1.0 - p);
    for (auto& k : *keep) k = (u(rng) < p) ? 0.0 : s;
    auto out = make_tensor(a->rows, a->cols);
    for (int i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * (*keep)[i];
    out->parents = {a};
    out->back = [a, keep](Tensor& o) {
        if (!a->needs_grad) return;
        for (int i = 0; i < o.size(); ++i) a->grad[i] += o.grad[i] * (*keep)[i];
    };
    return out;
}

inline TensorPtr embedding_rows(const TensorPtr& table, const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("embedding_rows: empty id list");
    for (int id : ids)
        if (id < 0 || id >= table->rows)
            throw std::out_of_range("embedding_rows: id " + std::to_string(id) + " out of vocab " +
                                    std::to_string(table->rows));
    auto out = make_tensor(static_cast<int>(ids.size()), table->cols);
    for (size_t r = 0; r < ids.size(); ++r)
        std::copy_n(table->val.begin() + static_cast<size_t>(ids[r]) * table->cols, table->cols,
                    out->val.begin() + r * table->cols);
    out->parents = {table};
    out->back = [table, ids](Tensor& o) {
        if (!table->needs_grad) return;
        for (size_t r = 0; r < ids.size(); ++r)
            for (int c = 0; c < o.cols; ++c)
                table->grad[static_cast<size_t>(ids[r]) * o.cols + c] += o.grad[r * o.cols + c];
    };
    return out;
}

// Mean token-level cross-entropy over rows where mask != 0 (mask may be
// empty meaning all rows count). Fused log-softmax for stability.
inline TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets,
                               const std::vector<unsigned char>& mask = {}) {
    if (static_cast<int>(targets.size()) != logits->rows)
        throw std::invalid_argument("cross_entropy: target count " + std::to_string(targets.size()) +
                                    " vs logits " + shape_str(*logits));
    if (!mask.empty() && mask.size() != targets.size())
        throw std::invalid_argument("cross_entropy: mask size mismatch");
    const int T = logits->rows, V = logits->cols;
    int active = 0;
    for (int r = 0; r < T; ++r)
        if (mask.empty() || mask[r]) ++active;
    if (active == 0) throw std::invalid_argument("cross_entropy: no active positions");
    auto probs = std::make_shared<std::vector<double>>(logits->size());
    double loss = 0.0;
    for (int r = 0; r < T; ++r) {
        const double* lr = logits->val.data() + static_cast<size_t>(r) * V;
        double mx = *std::max_element(lr, lr + V);
        double z = 0.0;
        double* pr = probs->data() + static_cast<size_t>(r) * V;
        for (int c = 0; c < V; ++c) {
            pr[c] = std::exp(lr[c] - mx);
            z += pr[c];
        }
        for (int c = 0; c < V; ++c) pr[c] /= z;
        if (mask.empty() || mask[r]) {
            const int t = targets[r];
            if (t < 0 || t >= V) throw std::out_of_range("cross_entropy: target out of range");
            loss -= std::log(std::max(pr[t], 1e-300));
        }
    }
    auto out = make_tensor(1, 1);
    out->val[0] = loss / active;
    out->parents = {logits};
    out->back = [logits, targets, mask, probs, active](Tensor& o) {
        if (!logits->needs_grad) return;
        const int T = logits->rows, V = logits->cols;
        const double g = o.grad[0] / active;
        for (int r = 0; r < T; ++r) {
            if (!mask.empty() && !mask[r]) continue;
            const double* pr = probs->data() + static_cast<size_t>(r) * V;
            double* gr = logits->grad.data() + static_cast<size_t>(r) * V;
            for (int c = 0; c < V; ++c) gr[c] += g * pr[c];
            gr[targets[r]] -= g;
        }
    };
    return out;
}

// Mean binary cross-entropy from logits [N,1].
inline TensorPtr bce_with_logits(const TensorPtr& logits, const std::vector<double>& targets) {
    if (logits->cols != 1 || static_cast<int>(targets.size()) != logits->rows)
        throw std::invalid_argument("bce_with_logits: shape mismatch " + shape_str(*logits));
    const int N = logits->rows;
    auto out = make_tensor(1, 1);
    double loss = 0.0;
    for (int i = 0; i < N; ++i) {
        const double x = logits->val[i];
        // log(1 + exp(-|x|)) + max(x,0) - t*x
        loss += std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0) - targets[i] * x;
    }
    out->val[0] = loss / N;
    out->parents = {logits};
    out->back = [logits, targets, N](Tensor& o) {
        if (!logits->needs_grad) return;
        const double g = o.grad[0] / N;
        for (int i = 0; i < N; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-logits->val[i]));
            logits->grad[i] += g * (p - targets[i]);
        }
    };
    return out;
}

inline TensorPtr sum_all(const TensorPtr& a) {
    auto out = make_tensor(1, 1);
    for (double v : a->val) out->val[0] += v;
    out->parents = {a};
    out->back = [a](Tensor& o) {
        if (!a->needs_grad) return;
        for (int i = 0; i < a->size(); ++i) a->grad[i] += o.grad[0];
    };
    return out;
}

inline TensorPtr mean_all(const TensorPtr& a) { return scale(sum_all(a), 1.0 / a->size()); }

// Reverse topological sweep from a scalar root.
inline void backward(const TensorPtr& root) {
    if (root->size() != 1) throw std::invalid_argument("backward: root must be scalar");
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<Tensor*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor* p = node->parents[idx++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->back) (*it)->back(**it);
}

}  // namespace longsum::ad
