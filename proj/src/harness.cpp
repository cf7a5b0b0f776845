#include "mppn/harness.hpp"

#include "mppn/adam.hpp"
#include "mppn/baselines.hpp"
#include "mppn/error.hpp"
#include "mppn/model.hpp"
#include "mppn/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

namespace mppn {

namespace {

LinearBaselineConfig baseline_config(const RunConfig& c)
{
    LinearBaselineConfig b;
    b.lookback = c.lookback;
    b.horizon = c.horizon;
    b.channels = c.channels;
    b.window = c.window;
    b.seed = c.seed;
    return b;
}

MppnConfig mppn_config(const RunConfig& c)
{
    MppnConfig m;
    m.lookback = c.lookback;
    m.horizon = c.horizon;
    m.channels = c.channels;
    m.hidden = c.hidden;
    m.resolutions = c.resolutions;
    m.periods = c.periods;
    m.overlap = c.overlap;
    m.seed = c.seed;
    return m;
}

void validate(const RunConfig& c)
{
    if (!is_model_kind(c.model)) throw ConfigError("unknown model kind '" + c.model + "'");
    if (c.lookback < 1 || c.horizon < 1) throw ConfigError("lookback and horizon must be >= 1");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (c.patience < 1) throw ConfigError("patience must be >= 1");
    if (c.top_k < 1) throw ConfigError("top_k must be >= 1");
    if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError("lr must be a positive number");
    if (!(c.weight_decay >= 0.0) || !std::isfinite(c.weight_decay)) throw ConfigError("weight_decay must be >= 0");
}

// Distinct, well-mixed shuffle seed per epoch.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch)
{
    return SplitMix64(seed + static_cast<std::uint64_t>(epoch) * 0x9E3779B97F4A7C15ull).next();
}

ForecastMetrics evaluate_standardized(const Forecaster& model, const Eigen::MatrixXd& z, const SplitBounds& bounds,
                                      Split split, Index batch_size)
{
    WindowStream stream(z, bounds, split, model.lookback(), model.horizon(), batch_size);
    MetricsAccumulator acc;
    WindowBatch batch;
    while (stream.next(batch)) acc.add(model.forward(batch.inputs).detach(), batch.targets);
    return acc.result();
}

std::vector<Eigen::ArrayXd> snapshot(const std::vector<Tensor>& params)
{
    std::vector<Eigen::ArrayXd> out;
    for (const Tensor& p : params) out.push_back(p.data());
    return out;
}

void restore(std::vector<Tensor>& params, const std::vector<Eigen::ArrayXd>& saved)
{
    for (std::size_t i = 0; i < params.size(); ++i) params[i].data() = saved[i];
}

Tensor row_tensor(const Eigen::RowVectorXd& v)
{
    return Tensor::from({v.size()}, Eigen::ArrayXd(v.transpose().array()));
}

Eigen::RowVectorXd row_vector(const Tensor& t) { return t.data().matrix().transpose(); }

} // namespace

// ---------------------------------------------------------------------------

EarlyStopping::EarlyStopping(int patience) : patience_(patience)
{
    if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::update(double val_mse)
{
    ++epochs_;
    if (best_epoch_ == 0 || val_mse < best_) {
        best_ = val_mse;
        best_epoch_ = epochs_;
        stale_ = 0;
        return true;
    }
    ++stale_;
    return false;
}

std::pair<int, int> early_stopping_trace(const std::vector<double>& val_mse, int patience)
{
    EarlyStopping es(patience);
    for (double v : val_mse) {
        es.update(v);
        if (es.should_stop()) break;
    }
    return {es.epochs(), es.best_epoch()};
}

// ---------------------------------------------------------------------------

Checkpoint FittedModel::to_checkpoint() const
{
    Checkpoint ckpt;
    ckpt.config = config;
    for (const auto& p : model->parameters()) ckpt.tensors.push_back({p.name, p.value.detach()});
    ckpt.tensors.push_back({"scaler.mean", row_tensor(scaler.mean())});
    ckpt.tensors.push_back({"scaler.scale", row_tensor(scaler.scale())});
    return ckpt;
}

FittedModel FittedModel::from_checkpoint(const Checkpoint& ckpt)
{
    FittedModel out;
    out.config = ckpt.config;
    validate(out.config);
    if (out.config.channels < 1) throw FormatError("checkpoint: config has no channel count");
    try {
        out.model = make_model(out.config);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: stored config does not build a model: ") + e.what());
    }
    for (auto& p : out.model->parameters()) {
        const Tensor& stored = ckpt.find(p.name);
        if (stored.shape() != p.value.shape()) {
            throw FormatError("checkpoint: tensor '" + p.name + "' has shape " + to_string(stored.shape()) +
                              ", model expects " + to_string(p.value.shape()));
        }
        Tensor target = p.value;
        target.data() = stored.data();
    }
    const Tensor& mean = ckpt.find("scaler.mean");
    const Tensor& scale = ckpt.find("scaler.scale");
    if (mean.shape() != Shape{out.config.channels} || scale.shape() != Shape{out.config.channels}) {
        throw FormatError("checkpoint: scaler statistics do not match the channel count");
    }
    out.scaler = Standardizer::from_stats(row_vector(mean), row_vector(scale));
    return out;
}

nlohmann::json TrainResult::to_json() const
{
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : log) {
        epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_mse", e.val_mse},
                          {"improved", e.improved}});
    }
    return {{"model", fitted.config.model},
            {"periods", fitted.config.periods},
            {"parameters", fitted.model->parameter_count()},
            {"epochs", epochs},
            {"best_epoch", best_epoch},
            {"best_val_mse", best_val_mse},
            {"early_stopped", early_stopped},
            {"floored_channels", floored_channels}};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Forecaster> make_model(const RunConfig& config)
{
    validate(config);
    if (config.channels < 1) throw ConfigError("channel count must be >= 1");
    if (config.model == "mppn") return std::make_unique<MppnModel>(mppn_config(config));
    if (config.model == "dlinear") return std::make_unique<DLinearModel>(baseline_config(config));
    if (config.model == "nlinear") return std::make_unique<NLinearModel>(baseline_config(config));
    return std::make_unique<NaiveModel>(baseline_config(config));
}

std::vector<Index> resolve_periods(const RunConfig& config, const Eigen::MatrixXd& standardized, const SplitBounds& bounds)
{
    if (!config.periods.empty()) return override_periods(config.periods).periods();
    return topk_periods(amplitude_spectrum(standardized.topRows(bounds.train_end)), config.top_k).periods();
}

TrainResult train(RunConfig config, const SeriesDataset& data, std::ostream* log)
{
    validate(config);
    if (data.length() == 0 || data.channels() == 0) throw DataError("training data is empty");
    config.channels = data.channels();
    config.channel_names = data.names;

    const SplitBounds bounds = chronological_split(data.length(), config.split_scheme);
    TrainResult result;
    Standardizer scaler = Standardizer::fit(data.values, bounds.train_end, config.strict, &result.floored_channels);
    const Eigen::MatrixXd z = scaler.apply(data.values);
    if (config.model == "mppn") config.periods = resolve_periods(config, z, bounds);

    auto model = make_model(config);
    // Fail early on splits too short for a single window.
    window_origins(bounds, Split::Train, config.lookback, config.horizon);
    window_origins(bounds, Split::Val, config.lookback, config.horizon);

    std::vector<Tensor> params = model->parameter_tensors();
    if (params.empty()) {
        result.best_val_mse = evaluate_standardized(*model, z, bounds, Split::Val, config.batch_size).mse;
    } else {
        Adam opt(params, {.lr = config.lr, .weight_decay = config.weight_decay});
        EarlyStopping stopper(config.patience);
        std::vector<Eigen::ArrayXd> best = snapshot(params);
        for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
            WindowStream stream(z, bounds, Split::Train, config.lookback, config.horizon, config.batch_size,
                                epoch_seed(config.seed, epoch));
            WindowBatch batch;
            double loss_sum = 0.0;
            Index steps = 0;
            while (stream.next(batch)) {
                opt.zero_grad();
                const Tensor loss = mse_loss(model->forward(batch.inputs), batch.targets);
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    throw RuntimeFailure("training diverged (loss " + std::to_string(value) + ") at epoch " +
                                         std::to_string(epoch) + ", step " + std::to_string(steps + 1));
                }
                loss.backward();
                opt.step();
                loss_sum += value;
                ++steps;
            }
            EpochRecord rec;
            rec.epoch = epoch;
            rec.train_loss = loss_sum / static_cast<double>(steps);
            rec.val_mse = evaluate_standardized(*model, z, bounds, Split::Val, config.batch_size).mse;
            if (!std::isfinite(rec.val_mse)) {
                throw RuntimeFailure("validation MSE is not finite at epoch " + std::to_string(epoch));
            }
            rec.improved = stopper.update(rec.val_mse);
            if (rec.improved) best = snapshot(params);
            result.log.push_back(rec);
            if (log) {
                char line[160];
                std::snprintf(line, sizeof line, "epoch %3d  train_loss %.6f  val_mse %.6f%s\n", epoch,
                              rec.train_loss, rec.val_mse, rec.improved ? "  *" : "");
                *log << line << std::flush;
            }
            if (stopper.should_stop()) {
                result.early_stopped = true;
                break;
            }
        }
        restore(params, best);
        result.best_epoch = stopper.best_epoch();
        result.best_val_mse = stopper.best();
    }

    result.fitted.config = std::move(config);
    result.fitted.model = std::move(model);
    result.fitted.scaler = std::move(scaler);
    return result;
}

ForecastMetrics evaluate(const FittedModel& fitted, const SeriesDataset& data, Split split,
                         std::optional<Index> batch_size)
{
    if (data.channels() != fitted.config.channels) {
        throw ConfigError("dataset has " + std::to_string(data.channels()) + " channels but the model expects " +
                          std::to_string(fitted.config.channels));
    }
    const Index bs = batch_size.value_or(fitted.config.batch_size);
    if (bs < 1) throw ConfigError("batch_size must be >= 1");
    const SplitBounds bounds = chronological_split(data.length(), fitted.config.split_scheme);
    return evaluate_standardized(*fitted.model, fitted.scaler.apply(data.values), bounds, split, bs);
}

nlohmann::json analyze(const SeriesDataset& data, const AnalyzeOptions& options)
{
    const PredictabilityReport report = dataset_predictability(data, options.q, options.binning);
    PeriodSet periods;
    if (!options.period_overrides.empty()) {
        periods = override_periods(options.period_overrides);
    } else {
        // Standardize so no channel dominates the averaged spectrum by scale alone.
        const Standardizer s = Standardizer::fit(data.values, data.length(), false);
        periods = topk_periods(amplitude_spectrum(s.apply(data.values)), options.top_k);
    }
    return {{"length", data.length()},
            {"channels", data.channels()},
            {"predictability", report.to_json()},
            {"periods", periods.to_json()}};
}

SeriesDataset forecast(const FittedModel& fitted, const SeriesDataset& data, std::optional<Index> origin)
{
    const Index L = fitted.config.lookback;
    const Index H = fitted.config.horizon;
    const Index C = fitted.config.channels;
    if (data.channels() != C) {
        throw ConfigError("dataset has " + std::to_string(data.channels()) + " channels but the model expects " +
                          std::to_string(C));
    }
    const Index t = origin.value_or(data.length());
    if (t < L || t > data.length()) {
        throw ConfigError("forecast origin " + std::to_string(t) + " must lie in [L=" + std::to_string(L) + ", T=" +
                          std::to_string(data.length()) + "]");
    }
    const Eigen::MatrixXd window = fitted.scaler.apply(data.values.middleRows(t - L, L));
    Eigen::ArrayXd flat(L * C);
    for (Index i = 0; i < L; ++i) {
        for (Index c = 0; c < C; ++c) flat[i * C + c] = window(i, c);
    }
    const Tensor y = fitted.model->forward(Tensor::from({L, C}, std::move(flat)));
    Eigen::MatrixXd pred(H, C);
    for (Index h = 0; h < H; ++h) {
        for (Index c = 0; c < C; ++c) pred(h, c) = y.at({h, c});
    }

    SeriesDataset out;
    out.names = data.names;
    out.values = fitted.scaler.invert(pred);
    for (Index h = 0; h < H; ++h) {
        const Index row = t + h;
        out.timestamps.push_back(row < static_cast<Index>(data.timestamps.size()) ? data.timestamps[row]
                                                                                  : std::to_string(row));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<Tone> parse_tones(const std::string& text)
{
    std::vector<Tone> tones;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream parts(item);
        std::string field;
        std::vector<double> v;
        while (std::getline(parts, field, ':')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw ArgumentError("synth: bad tone field '" + field + "' in '" + item + "'");
            }
        }
        if (v.size() < 2 || v.size() > 3) throw ArgumentError("synth: tone must be amp:period[:phase], got '" + item + "'");
        if (!(v[1] > 0.0)) throw ArgumentError("synth: tone period must be positive, got '" + item + "'");
        tones.push_back({v[0], v[1], v.size() == 3 ? v[2] : 0.0});
    }
    if (tones.empty()) throw ArgumentError("synth: empty tone list");
    return tones;
}

SeriesDataset synthesize(const SynthSpec& spec)
{
    if (spec.length < 8) throw ArgumentError("synth: T must be >= 8");
    if (spec.channels.empty()) throw ArgumentError("synth: at least one channel is required");
    if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) throw ArgumentError("synth: noise sd must be >= 0");
    if (!std::isfinite(spec.trend)) throw ArgumentError("synth: trend must be finite");
    for (const auto& channel : spec.channels) {
        for (const Tone& tone : channel) {
            if (!(tone.period > 0.0) || !std::isfinite(tone.amplitude) || !std::isfinite(tone.phase)) {
                throw ArgumentError("synth: tones need a positive period and finite amplitude/phase");
            }
        }
    }

    const Index T = spec.length;
    const auto C = static_cast<Index>(spec.channels.size());
    SeriesDataset out;
    out.values.resize(T, C);
    SplitMix64 rng(spec.seed);
    for (Index t = 0; t < T; ++t) {
        for (Index c = 0; c < C; ++c) {
            double v = spec.trend * static_cast<double>(t);
            for (const Tone& tone : spec.channels[c]) {
                v += tone.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / tone.period + tone.phase);
            }
            if (spec.noise_sd > 0.0) v += spec.noise_sd * rng.normal();
            out.values(t, c) = v;
        }
    }
    for (Index c = 0; c < C; ++c) out.names.push_back("s" + std::to_string(c));

    using namespace std::chrono;
    const sys_days start = year{2016} / July / 1;
    char buf[64];
    for (Index t = 0; t < T; ++t) {
        const auto stamp = sys_seconds(start) + hours(t);
        const auto day = floor<days>(stamp);
        const year_month_day ymd(day);
        const hh_mm_ss hms(stamp - day);
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02ld:00:00", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<long>(hms.hours().count()));
        out.timestamps.emplace_back(buf);
    }
    return out;
}

} // namespace mppn
