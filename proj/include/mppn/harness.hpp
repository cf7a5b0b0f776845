#pragma once

#include "mppn/checkpoint.hpp"
#include "mppn/config.hpp"
#include "mppn/data.hpp"
#include "mppn/forecaster.hpp"
#include "mppn/periods.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace mppn {

/// Patience-based early stopping on validation MSE (strict improvement).
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);

    /// Records one epoch; returns true when it is the new best.
    bool update(double val_mse);
    bool should_stop() const { return stale_ >= patience_; }
    int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
    double best() const { return best_; }
    int epochs() const { return epochs_; }

private:
    int patience_;
    int epochs_ = 0;
    int stale_ = 0;
    int best_epoch_ = 0;
    double best_ = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_mse = 0.0;
    bool improved = false;
};

/// A model with the scaling it was trained under.
struct FittedModel {
    RunConfig config;  // periods and channels resolved
    std::unique_ptr<Forecaster> model;
    Standardizer scaler;

    Checkpoint to_checkpoint() const;
    static FittedModel from_checkpoint(const Checkpoint& ckpt);
};

struct TrainResult {
    FittedModel fitted;
    std::vector<EpochRecord> log;
    int best_epoch = 0;
    double best_val_mse = 0.0;
    bool early_stopped = false;
    std::vector<Index> floored_channels;

    nlohmann::json to_json() const;
};

/// Builds an untrained model. MPPN needs config.periods already resolved.
std::unique_ptr<Forecaster> make_model(const RunConfig& config);

/// Periods from the training split (MPPN only; overrides win).
std::vector<Index> resolve_periods(const RunConfig& config, const Eigen::MatrixXd& standardized, const SplitBounds& bounds);

/// Shuffled mini-batch Adam with early stopping; restores the best epoch.
/// Progress lines go to `log` when given.
TrainResult train(RunConfig config, const SeriesDataset& data, std::ostream* log = nullptr);

/// Used by train() and tests: the stopping rule applied to a fixed
/// validation trace. Returns (epochs run, best epoch).
std::pair<int, int> early_stopping_trace(const std::vector<double>& val_mse, int patience);

/// MSE/MAE on standardized values over every window of `split`.
ForecastMetrics evaluate(const FittedModel& fitted, const SeriesDataset& data, Split split,
                         std::optional<Index> batch_size = std::nullopt);

struct AnalyzeOptions {
    int q = 10;
    Binning binning = Binning::EqualFrequency;
    int top_k = 2;
    std::vector<Index> period_overrides;
};

/// Predictability report and period set in one JSON document.
nlohmann::json analyze(const SeriesDataset& data, const AnalyzeOptions& options);

/// Forecast H steps from origin t (rows [t-L, t) as input), in data units.
/// Defaults to the end of the series.
SeriesDataset forecast(const FittedModel& fitted, const SeriesDataset& data, std::optional<Index> origin = std::nullopt);

struct Tone {
    double amplitude = 1.0;
    double period = 24.0;
    double phase = 0.0;
};

struct SynthSpec {
    std::vector<std::vector<Tone>> channels;  // one tone list per channel
    double trend = 0.0;                       // added slope per step
    double noise_sd = 0.0;
    Index length = 0;
    std::uint64_t seed = 0;
};

/// Parses "amp:period:phase,amp:period:phase" for one channel.
std::vector<Tone> parse_tones(const std::string& text);

/// Sum of sinusoids + linear trend + seeded Gaussian noise, hourly stamps.
SeriesDataset synthesize(const SynthSpec& spec);

} // namespace mppn
