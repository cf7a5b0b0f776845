#pragma once

#include "mppn/forecaster.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <utility>

namespace mppn {

/// Repeats the last observed row for every horizon step.
Tensor naive_last(const Tensor& x, Index horizon);

/// Centred moving average with edge replication. Columns are series.
/// Returns (trend, seasonal) with seasonal = x - trend.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> moving_average_decompose(const Eigen::MatrixXd& x, Index window);

/// [L, L] matrix A with trend_row = x_row * A for a length-L series.
Eigen::MatrixXd moving_average_matrix(Index length, Index window);

struct LinearBaselineConfig {
    Index lookback = 336;
    Index horizon = 96;
    Index channels = 1;
    Index window = 25;  // DLinear moving-average width
    std::uint64_t seed = 0;
};

class NaiveModel : public Forecaster {
public:
    explicit NaiveModel(LinearBaselineConfig config);

    std::string kind() const override { return "naive"; }
    Index lookback() const override { return config_.lookback; }
    Index horizon() const override { return config_.horizon; }
    Index channels() const override { return config_.channels; }
    Tensor forward(const Tensor& x) const override;
    std::vector<NamedTensor> parameters() const override { return {}; }

private:
    LinearBaselineConfig config_;
};

/// y = Linear(x - x_last) + x_last, weights shared across channels.
class NLinearModel : public Forecaster {
public:
    explicit NLinearModel(LinearBaselineConfig config);

    std::string kind() const override { return "nlinear"; }
    Index lookback() const override { return config_.lookback; }
    Index horizon() const override { return config_.horizon; }
    Index channels() const override { return config_.channels; }
    Tensor forward(const Tensor& x) const override;
    std::vector<NamedTensor> parameters() const override;

    Tensor weight;  // [L, H]
    Tensor bias;    // [H]

private:
    LinearBaselineConfig config_;
};

/// Trend/seasonal decomposition followed by one linear map per component.
class DLinearModel : public Forecaster {
public:
    explicit DLinearModel(LinearBaselineConfig config);

    std::string kind() const override { return "dlinear"; }
    Index lookback() const override { return config_.lookback; }
    Index horizon() const override { return config_.horizon; }
    Index channels() const override { return config_.channels; }
    Tensor forward(const Tensor& x) const override;
    std::vector<NamedTensor> parameters() const override;

    Tensor trend_weight;     // [L, H]
    Tensor trend_bias;       // [H]
    Tensor seasonal_weight;  // [L, H]
    Tensor seasonal_bias;    // [H]

private:
    LinearBaselineConfig config_;
    Tensor averaging_;  // constant [L, L]
};

} // namespace mppn
