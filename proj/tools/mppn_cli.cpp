// Command-line front end: analyze, train, eval, forecast, synth, gates.
// Reports go to stdout as JSON; progress and errors go to stderr.

#include "mppn/error.hpp"
#include "mppn/harness.hpp"
#include "mppn/model.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace mppn;

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

struct Globals {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string data;
    std::string config;
    std::string out;
    bool no_date_column = false;
    bool lenient = false;
    std::vector<std::string> sets;  // raw key=value overrides
};

RunConfig base_config(const Globals& g)
{
    RunConfig c = g.config.empty() ? RunConfig{} : RunConfig::load(g.config);
    for (const auto& kv : g.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed_given) c.seed = g.seed;
    if (!g.data.empty()) c.data = g.data;
    if (g.no_date_column) c.date_column = false;
    if (g.lenient) c.strict = false;
    return c;
}

SeriesDataset load_data(const RunConfig& c)
{
    if (c.data.empty()) throw ConfigError("no dataset given (use --data or data= in the config)");
    return load_csv(c.data, {.strict = c.strict, .date_column = c.date_column});
}

// Writes to --out when given, else stdout.
template <typename Fn>
void emit(const std::string& path, Fn&& write)
{
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + path);
    write(out);
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

nlohmann::json metrics_json(const ForecastMetrics& m, Split split)
{
    return {{"split", to_string(split)}, {"mse", m.mse}, {"mae", m.mae}, {"windows", m.windows}};
}

FittedModel load_fitted(const std::string& path)
{
    if (path.empty()) throw ConfigError("a checkpoint is required (--checkpoint)");
    return FittedModel::from_checkpoint(load_checkpoint(path));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"MPPN: multi-resolution periodic pattern network forecaster"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { g.seed = s, g.seed_given = true; }, "Seed for initialisation, shuffling and synth")
        ->trigger_on_parse();
    app.add_option("--data", g.data, "Input CSV");
    app.add_option("--config", g.config, "Run config (key=value text or JSON)");
    app.add_option("--out", g.out, "Output file (checkpoint for train, CSV otherwise)");
    app.add_flag("--no-date-column", g.no_date_column, "CSV has no leading date column and no header");
    app.add_flag("--lenient", g.lenient, "Forward-fill missing CSV cells instead of failing");
    app.add_option("--set", g.sets, "Config override key=value (repeatable)");

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Predictability and period report");
    AnalyzeOptions aopt;
    std::string binning = "equal-frequency";
    analyze_cmd->add_option("-q,--q", aopt.q, "Number of bins")->capture_default_str();
    analyze_cmd->add_option("--binning", binning, "equal-frequency or equal-width")->capture_default_str();
    analyze_cmd->add_option("-k,--top-k", aopt.top_k, "Periods to report")->capture_default_str();
    analyze_cmd->add_option("--periods", aopt.period_overrides, "Explicit periods (skip FFT selection)")->delimiter(',');

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    std::optional<std::string> model_kind;
    std::optional<Index> lookback, horizon, hidden, batch_size;
    std::optional<int> epochs, patience, top_k;
    std::optional<double> lr, weight_decay;
    std::optional<std::string> split_scheme;
    std::vector<Index> resolutions, periods;
    bool overlap = false;
    train_cmd->add_option("--model", model_kind, "mppn, dlinear, nlinear or naive");
    train_cmd->add_option("--lookback", lookback, "Lookback window L");
    train_cmd->add_option("--horizon", horizon, "Forecast horizon H");
    train_cmd->add_option("--hidden", hidden, "Hidden width D");
    train_cmd->add_option("--resolutions", resolutions, "Patch resolutions")->delimiter(',');
    train_cmd->add_option("--periods", periods, "Explicit periods (skip FFT selection)")->delimiter(',');
    train_cmd->add_option("-k,--top-k", top_k, "Number of detected periods");
    train_cmd->add_option("--epochs", epochs, "Maximum epochs");
    train_cmd->add_option("--patience", patience, "Early stopping patience");
    train_cmd->add_option("--batch-size", batch_size, "Mini-batch size");
    train_cmd->add_option("--lr", lr, "Learning rate");
    train_cmd->add_option("--weight-decay", weight_decay, "L2 weight decay");
    train_cmd->add_option("--split-scheme", split_scheme, "ett (6:2:2) or standard (7:1:2)");
    train_cmd->add_flag("--overlap", overlap, "Overlapping (stride-1) patches");
    bool quiet = false;
    train_cmd->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Metrics of a checkpoint on one split");
    std::string ckpt_path;
    std::string split_name = "test";
    std::optional<Index> eval_batch;
    eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    eval_cmd->add_option("--split", split_name, "train, val or test")->capture_default_str();
    eval_cmd->add_option("--batch-size", eval_batch, "Evaluation batch size");

    // forecast
    auto* forecast_cmd = app.add_subcommand("forecast", "Predictions CSV for one origin");
    std::optional<Index> origin;
    forecast_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    forecast_cmd->add_option("--origin", origin, "First forecast row (default: end of data)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic CSV");
    std::vector<std::string> tone_specs;
    SynthSpec spec;
    synth_cmd->add_option("--channel", tone_specs, "Tones for one channel: amp:period[:phase],... (repeatable)")
        ->required();
    synth_cmd->add_option("--length", spec.length, "Number of rows T")->required();
    synth_cmd->add_option("--trend", spec.trend, "Linear trend slope per step");
    synth_cmd->add_option("--noise", spec.noise_sd, "Gaussian noise standard deviation");

    // gates
    auto* gates_cmd = app.add_subcommand("gates", "Channel adaptation gates CSV");
    gates_cmd->add_option("--checkpoint", ckpt_path, "MPPN checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (analyze_cmd->parsed()) {
            RunConfig c = base_config(g);
            aopt.binning = parse_binning(binning);
            print_json(analyze(load_data(c), aopt));
        } else if (train_cmd->parsed()) {
            RunConfig c = base_config(g);
            if (model_kind) c.set("model", *model_kind);
            if (lookback) c.lookback = *lookback;
            if (horizon) c.horizon = *horizon;
            if (hidden) c.hidden = *hidden;
            if (!resolutions.empty()) c.resolutions = resolutions;
            if (!periods.empty()) c.periods = periods;
            if (top_k) c.top_k = *top_k;
            if (epochs) c.max_epochs = *epochs;
            if (patience) c.patience = *patience;
            if (batch_size) c.batch_size = *batch_size;
            if (lr) c.lr = *lr;
            if (weight_decay) c.weight_decay = *weight_decay;
            if (split_scheme) c.split_scheme = parse_split_scheme(*split_scheme);
            if (overlap) c.overlap = true;
            if (!g.out.empty()) c.checkpoint = g.out;

            const SeriesDataset data = load_data(c);
            TrainResult run = train(c, data, quiet ? nullptr : &std::cerr);
            save_checkpoint(run.fitted.config.checkpoint, run.fitted.to_checkpoint());
            nlohmann::json report = run.to_json();
            report["checkpoint"] = run.fitted.config.checkpoint;
            report["val"] = metrics_json(evaluate(run.fitted, data, Split::Val), Split::Val);
            report["test"] = metrics_json(evaluate(run.fitted, data, Split::Test), Split::Test);
            print_json(report);
        } else if (eval_cmd->parsed()) {
            const FittedModel fitted = load_fitted(ckpt_path);
            RunConfig c = base_config(g);
            if (c.data.empty()) c.data = fitted.config.data;
            c.date_column = g.no_date_column ? false : fitted.config.date_column;
            const Split split = parse_split(split_name);
            print_json(metrics_json(evaluate(fitted, load_data(c), split, eval_batch), split));
        } else if (forecast_cmd->parsed()) {
            const FittedModel fitted = load_fitted(ckpt_path);
            RunConfig c = base_config(g);
            if (c.data.empty()) c.data = fitted.config.data;
            c.date_column = g.no_date_column ? false : fitted.config.date_column;
            const SeriesDataset fc = forecast(fitted, load_data(c), origin);
            emit(g.out, [&](std::ostream& os) { write_csv(os, fc); });
        } else if (synth_cmd->parsed()) {
            for (const auto& t : tone_specs) spec.channels.push_back(parse_tones(t));
            spec.seed = g.seed;
            const SeriesDataset ds = synthesize(spec);
            emit(g.out, [&](std::ostream& os) { write_csv(os, ds); });
        } else if (gates_cmd->parsed()) {
            const FittedModel fitted = load_fitted(ckpt_path);
            const auto* mppn = dynamic_cast<const MppnModel*>(fitted.model.get());
            if (!mppn) throw ConfigError("gates: checkpoint holds a " + fitted.config.model + " model, not mppn");
            const GateMatrix gates = export_gates(mppn->params(), fitted.config.channel_names);
            emit(g.out, [&](std::ostream& os) { write_gates_csv(os, gates); });
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const RuntimeFailure& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kRuntime;
    }
    return kOk;
}
