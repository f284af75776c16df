#pragma once

// Central finite-difference gradient oracle used by the unit and
// acceptance suites. Rebuilds the forward graph per probe, so the
// function under test must be a pure function of the leaf values.

#include <cmath>
#include <functional>
#include <vector>

#include "longsum/autodiff.hpp"

namespace fdcheck {

using longsum::ad::TensorPtr;

struct FdResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

// forward() must rebuild and return the scalar loss from the current
// leaf values. Returns the worst relative error across all leaf entries,
// with relative error defined against max(|analytic|, |numeric|, eps_floor).
inline FdResult fd_check(const std::vector<TensorPtr>& leaves,
                         const std::function<longsum::ad::TensorPtr()>& forward,
                         double h = 1e-5, double eps_floor = 1e-6) {
    for (auto& l : leaves) std::fill(l->grad.begin(), l->grad.end(), 0.0);
    auto loss = forward();
    longsum::ad::backward(loss);

    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves) analytic.push_back(l->grad);

    FdResult res;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        for (int i = 0; i < leaf->size(); ++i) {
            const double orig = leaf->val[i];
            leaf->val[i] = orig + h;
            const double fp = forward()->val[0];
            leaf->val[i] = orig - h;
            const double fm = forward()->val[0];
            leaf->val[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[li][i];
            const double abs_err = std::fabs(a - numeric);
            const double denom = std::max({std::fabs(a), std::fabs(numeric), eps_floor});
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
            res.max_rel_err = std::max(res.max_rel_err, abs_err / denom);
        }
    }
    return res;
}

inline void fill_random(const TensorPtr& t, std::mt19937_64& rng, double scale = 0.5) {
    std::normal_distribution<double> d(0.0, scale);
    for (auto& v : t->val) v = d(rng);
}

}  // namespace fdcheck
