#include "mppn/baselines.hpp"

#include "mppn/error.hpp"

#include <algorithm>

namespace mppn {

namespace {

void check_window(Index length, Index window)
{
    if (window % 2 == 0) throw ArgumentError("moving average window must be odd, got " + std::to_string(window));
    if (window < 3 || window > 2 * length - 1) {
        throw ArgumentError("moving average window " + std::to_string(window) + " must lie in [3, 2L-1] for L=" +
                            std::to_string(length));
    }
}

void check_config(const LinearBaselineConfig& c)
{
    if (c.lookback < 1 || c.horizon < 1 || c.channels < 1) {
        throw ConfigError("baseline: lookback, horizon and channels must be >= 1");
    }
}

// [B, L, C] -> [B, C, L]
Tensor channels_first(const Tensor& batch) { return permute(batch, {0, 2, 1}); }

// [B, C, 1] -> [B, C, count]
Tensor last_value(const Tensor& series_first, Index count)
{
    return expand_last(slice(series_first, -1, series_first.dim(-1) - 1, 1), count);
}

} // namespace

Tensor naive_last(const Tensor& x, Index horizon)
{
    if (x.rank() < 2 || x.dim(-2) < 1) throw DimensionError("naive_last: input must be [L, C] or [B, L, C]");
    if (horizon < 1) throw ArgumentError("naive_last: horizon must be >= 1");
    const bool single = x.rank() == 2;
    const Tensor batch = single ? reshape(x, {1, x.dim(0), x.dim(1)}) : x;
    const Tensor y = permute(last_value(channels_first(batch), horizon), {0, 2, 1});
    return single ? reshape(y, {horizon, x.dim(1)}) : y;
}

Eigen::MatrixXd moving_average_matrix(Index length, Index window)
{
    check_window(length, window);
    const Index half = window / 2;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(length, length);
    const double w = 1.0 / static_cast<double>(window);
    for (Index t = 0; t < length; ++t) {
        for (Index o = -half; o <= half; ++o) a(std::clamp<Index>(t + o, 0, length - 1), t) += w;
    }
    return a;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> moving_average_decompose(const Eigen::MatrixXd& x, Index window)
{
    const Index length = x.rows();
    check_window(length, window);
    const Index half = window / 2;
    Eigen::MatrixXd trend(length, x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
        for (Index t = 0; t < length; ++t) {
            double s = 0.0;
            for (Index o = -half; o <= half; ++o) s += x(std::clamp<Index>(t + o, 0, length - 1), c);
            trend(t, c) = s / static_cast<double>(window);
        }
    }
    Eigen::MatrixXd seasonal = x - trend;
    return {std::move(trend), std::move(seasonal)};
}

// ---------------------------------------------------------------------------

NaiveModel::NaiveModel(LinearBaselineConfig config) : config_(config) { check_config(config_); }

Tensor NaiveModel::forward(const Tensor& x) const
{
    const Tensor batch = as_batch(x, config_.lookback, config_.channels, "naive");
    return restore_rank(naive_last(batch, config_.horizon), x);
}

NLinearModel::NLinearModel(LinearBaselineConfig config) : config_(config)
{
    check_config(config_);
    SplitMix64 rng(config_.seed);
    weight = uniform_init({config_.lookback, config_.horizon}, config_.lookback, rng);
    bias = Tensor::zeros({config_.horizon}, true);
}

Tensor NLinearModel::forward(const Tensor& x) const
{
    const Tensor series = channels_first(as_batch(x, config_.lookback, config_.channels, "nlinear"));
    const Tensor centred = sub(series, last_value(series, config_.lookback));
    const Tensor y = add(linear(centred, weight, bias), last_value(series, config_.horizon));
    return restore_rank(permute(y, {0, 2, 1}), x);
}

std::vector<NamedTensor> NLinearModel::parameters() const
{
    return {{"linear.weight", weight}, {"linear.bias", bias}};
}

DLinearModel::DLinearModel(LinearBaselineConfig config) : config_(config)
{
    check_config(config_);
    const Eigen::MatrixXd a = moving_average_matrix(config_.lookback, config_.window);
    // Row-major storage of A for matmul.
    Eigen::ArrayXd flat(a.size());
    for (Index s = 0; s < a.rows(); ++s) {
        for (Index t = 0; t < a.cols(); ++t) flat[s * a.cols() + t] = a(s, t);
    }
    averaging_ = Tensor::from({config_.lookback, config_.lookback}, std::move(flat));

    SplitMix64 rng(config_.seed);
    trend_weight = uniform_init({config_.lookback, config_.horizon}, config_.lookback, rng);
    trend_bias = Tensor::zeros({config_.horizon}, true);
    seasonal_weight = uniform_init({config_.lookback, config_.horizon}, config_.lookback, rng);
    seasonal_bias = Tensor::zeros({config_.horizon}, true);
}

Tensor DLinearModel::forward(const Tensor& x) const
{
    const Tensor series = channels_first(as_batch(x, config_.lookback, config_.channels, "dlinear"));
    const Tensor trend = matmul(series, averaging_);
    const Tensor seasonal = sub(series, trend);
    const Tensor y = add(linear(trend, trend_weight, trend_bias), linear(seasonal, seasonal_weight, seasonal_bias));
    return restore_rank(permute(y, {0, 2, 1}), x);
}

std::vector<NamedTensor> DLinearModel::parameters() const
{
    return {{"trend.weight", trend_weight},
            {"trend.bias", trend_bias},
            {"seasonal.weight", seasonal_weight},
            {"seasonal.bias", seasonal_bias}};
}

} // namespace mppn
