#include "mppn/forecaster.hpp"

#include "mppn/error.hpp"

#include <cmath>

namespace mppn {

std::vector<Tensor> Forecaster::parameter_tensors() const
{
    std::vector<Tensor> out;
    for (auto& p : parameters()) out.push_back(p.value);
    return out;
}

Index Forecaster::parameter_count() const
{
    Index total = 0;
    for (const auto& p : parameters()) total += p.value.size();
    return total;
}

Tensor uniform_init(Shape shape, Index fan_in, SplitMix64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::ArrayXd v(numel(shape));
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor as_batch(const Tensor& x, Index lookback, Index channels, const char* model)
{
    if (x.rank() == 2 && x.dim(0) == lookback && x.dim(1) == channels) return reshape(x, {1, lookback, channels});
    if (x.rank() == 3 && x.dim(1) == lookback && x.dim(2) == channels) return x;
    throw DimensionError(std::string(model) + ": expected input [L=" + std::to_string(lookback) + ", C=" +
                         std::to_string(channels) + "] with optional batch axis, got " + to_string(x.shape()));
}

Tensor restore_rank(const Tensor& y, const Tensor& original_input)
{
    if (original_input.rank() == 2) return reshape(y, {y.dim(1), y.dim(2)});
    return y;
}

} // namespace mppn
