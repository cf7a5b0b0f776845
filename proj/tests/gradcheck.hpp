#pragma once

// Central finite-difference oracle for reverse-mode gradients. Test-only.

#include "mppn/random.hpp"
#include "mppn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace mppn::testing {

inline Tensor random_tensor(Shape shape, SplitMix64& rng, bool requires_grad = true, double lo = -1.0,
                            double hi = 1.0)
{
    Eigen::ArrayXd v(numel(shape));
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Reduces any tensor to a scalar through fixed random weights so every
// output element contributes a distinct amount.
inline Tensor weighted_sum(const Tensor& out, std::uint64_t seed = 99)
{
    SplitMix64 rng(seed);
    Tensor w = random_tensor(out.shape(), rng, false);
    return sum(mul(out, w));
}

// Largest per-tensor relative error max|a - n| / max(|a|, |n|) over all inputs.
inline double gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs, double h = 1e-6)
{
    for (Tensor& t : inputs) t.zero_grad();
    loss_fn().backward();
    std::vector<Eigen::ArrayXd> analytic;
    for (const Tensor& t : inputs) analytic.push_back(t.grad());

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor& t = inputs[k];
        Eigen::ArrayXd numeric(t.size());
        for (Index i = 0; i < t.size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + h;
            const double up = loss_fn().item();
            t.data()[i] = saved - h;
            const double down = loss_fn().item();
            t.data()[i] = saved;
            numeric[i] = (up - down) / (2.0 * h);
        }
        const double scale = std::max(analytic[k].abs().maxCoeff(), numeric.abs().maxCoeff());
        if (scale == 0.0) continue;
        worst = std::max(worst, (analytic[k] - numeric).abs().maxCoeff() / scale);
    }
    return worst;
}

} // namespace mppn::testing
