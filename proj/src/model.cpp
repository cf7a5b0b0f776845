#include "mppn/model.hpp"

#include "mppn/error.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace mppn {

namespace {

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

std::string branch_name(Index period, Index resolution)
{
    return "(period " + std::to_string(period) + ", r " + std::to_string(resolution) + ")";
}

void expect_shape(const Tensor& t, const Shape& shape, const std::string& what)
{
    if (!t.defined() || t.shape() != shape) {
        throw DimensionError(what + " must be " + to_string(shape) + ", got " +
                             (t.defined() ? to_string(t.shape()) : std::string("undefined")));
    }
}

} // namespace

PatternLayout PatternLayout::resolve(const MppnConfig& config)
{
    const Index L = config.lookback;
    if (L < 1 || config.horizon < 1 || config.channels < 1 || config.hidden < 1) {
        throw ConfigError("mppn: lookback, horizon, channels and hidden must all be >= 1");
    }
    if (config.resolutions.empty()) throw ConfigError("mppn: at least one resolution is required");
    if (config.periods.empty()) throw ConfigError("mppn: at least one period is required");
    std::set<Index> seen;
    for (Index r : config.resolutions) {
        if (r < 1 || r > L) {
            throw ConfigError("mppn: resolution " + std::to_string(r) + " must lie in [1, L=" + std::to_string(L) + "]");
        }
        if (!seen.insert(r).second) throw ConfigError("mppn: duplicate resolution " + std::to_string(r));
    }
    seen.clear();
    for (Index p : config.periods) {
        if (p < 2) throw ConfigError("mppn: period " + std::to_string(p) + " must be >= 2");
        if (!seen.insert(p).second) throw ConfigError("mppn: duplicate period " + std::to_string(p));
    }

    PatternLayout layout;
    for (Index period : config.periods) {
        for (Index r : config.resolutions) {
            PatternBranch b{period, r, L / period, period / r, ceil_div(L, r)};
            if (b.dilation < 1) {
                layout.skipped.push_back({period, r, "period shorter than the resolution"});
                continue;
            }
            if (b.kernel < 1) {
                layout.skipped.push_back({period, r, "period longer than the lookback"});
                continue;
            }
            if ((b.kernel - 1) * b.dilation + 1 > b.patches) {
                throw ConfigError("mppn: receptive field of branch " + branch_name(period, r) +
                                  " exceeds the patched length " + std::to_string(b.patches));
            }
            layout.pattern_dim += b.dilation;
            layout.branches.push_back(b);
        }
    }
    if (layout.branches.empty()) {
        throw ConfigError("mppn: no (period, resolution) branch is usable with L=" + std::to_string(L));
    }
    return layout;
}

Index pattern_dim(const MppnConfig& config) { return PatternLayout::resolve(config).pattern_dim; }

MppnParams MppnParams::initialize(const MppnConfig& config, const PatternLayout& layout)
{
    SplitMix64 rng(config.seed);
    const Index D = config.hidden;
    MppnParams p;
    for (Index r : config.resolutions) {
        p.patch_weight.push_back(uniform_init({D, 1, r}, r, rng));
        p.patch_bias.push_back(Tensor::zeros({D}, true));
    }
    for (const auto& b : layout.branches) {
        p.mine_weight.push_back(uniform_init({D, D, b.kernel}, D * b.kernel, rng));
        p.mine_bias.push_back(Tensor::zeros({D}, true));
    }
    p.embedding = Tensor::zeros({config.channels, layout.pattern_dim}, true);
    p.out_weight = uniform_init({layout.pattern_dim * D, config.horizon}, layout.pattern_dim * D, rng);
    p.out_bias = Tensor::zeros({config.horizon}, true);
    return p;
}

// ---------------------------------------------------------------------------

Tensor pad_left_replicate(const Tensor& x, Index multiple)
{
    if (multiple < 1) throw ArgumentError("pad_left_replicate: multiple must be >= 1");
    const Index length = x.dim(-1);
    const Index pad = ceil_div(length, multiple) * multiple - length;
    if (pad == 0) return x;
    return concat({expand_last(slice(x, -1, 0, 1), pad), x}, -1);
}

Tensor multi_resolution_patch(const Tensor& x, const Tensor& weight, const Tensor& bias, Index resolution, bool overlap)
{
    const Index length = x.dim(-1);
    if (resolution < 1 || resolution > length) {
        throw ConfigError("multi_resolution_patch: resolution " + std::to_string(resolution) +
                          " exceeds the series length " + std::to_string(length));
    }
    if (!overlap) return conv1d(pad_left_replicate(x, resolution), weight, bias, resolution, 1);
    const Tensor dense = conv1d(x, weight, bias, 1, 1);
    const Index keep = ceil_div(length, resolution);
    return slice(dense, -1, dense.dim(-1) - keep, keep);
}

Tensor periodic_pattern_mine(const Tensor& patched, const Tensor& weight, const Tensor& bias,
                             const PatternBranch& branch)
{
    const Index available = patched.dim(-1);
    if ((branch.kernel - 1) * branch.dilation + 1 > available) {
        throw ConfigError("periodic_pattern_mine: receptive field of branch " +
                          branch_name(branch.period, branch.resolution) + " exceeds input length " +
                          std::to_string(available));
    }
    const Tensor raw = conv1d(patched, weight, bias, 1, branch.dilation);
    return slice(raw, -1, raw.dim(-1) - branch.dilation, branch.dilation);
}

Tensor assemble_patterns(const Tensor& x, const MppnParams& params, const MppnConfig& config,
                         const PatternLayout& layout)
{
    const Tensor batch = as_batch(x, config.lookback, config.channels, "mppn");
    const Index B = batch.dim(0);
    const Index C = config.channels;
    const Index L = config.lookback;

    // Channels are processed independently with shared weights.
    const Tensor series = reshape(permute(batch, {0, 2, 1}), {B * C, 1, L});
    std::vector<Tensor> patched;
    for (std::size_t j = 0; j < config.resolutions.size(); ++j) {
        patched.push_back(multi_resolution_patch(series, params.patch_weight[j], params.patch_bias[j],
                                                 config.resolutions[j], config.overlap));
    }

    std::vector<Tensor> pieces;
    for (std::size_t i = 0; i < layout.branches.size(); ++i) {
        const auto& branch = layout.branches[i];
        const auto j = static_cast<std::size_t>(
            std::find(config.resolutions.begin(), config.resolutions.end(), branch.resolution) -
            config.resolutions.begin());
        pieces.push_back(periodic_pattern_mine(patched[j], params.mine_weight[i], params.mine_bias[i], branch));
    }
    const Tensor joined = permute(concat(std::span<const Tensor>(pieces), -1), {0, 2, 1});  // [N, P, D]
    const Tensor out = reshape(joined, {B, C, layout.pattern_dim, config.hidden});
    if (x.rank() == 2) return reshape(out, {C, layout.pattern_dim, config.hidden});
    return out;
}

Tensor channel_adapt(const Tensor& patterns, const Tensor& embedding)
{
    if (embedding.rank() != 2) throw DimensionError("channel_adapt: E must be [C, P], got " + to_string(embedding.shape()));
    const Tensor gate = reshape(sigmoid(embedding), {embedding.dim(0), embedding.dim(1), 1});
    return broadcast_mul(patterns, gate);
}

// ---------------------------------------------------------------------------

MppnModel::MppnModel(MppnConfig config) : config_(std::move(config)), layout_(PatternLayout::resolve(config_))
{
    params_ = MppnParams::initialize(config_, layout_);
}

MppnModel::MppnModel(MppnConfig config, MppnParams params)
    : config_(std::move(config)), layout_(PatternLayout::resolve(config_)), params_(std::move(params))
{
    const Index D = config_.hidden;
    const Index P = layout_.pattern_dim;
    if (params_.patch_weight.size() != config_.resolutions.size() ||
        params_.patch_bias.size() != config_.resolutions.size() ||
        params_.mine_weight.size() != layout_.branches.size() || params_.mine_bias.size() != layout_.branches.size()) {
        throw DimensionError("mppn: parameter set does not match the config");
    }
    for (std::size_t j = 0; j < config_.resolutions.size(); ++j) {
        expect_shape(params_.patch_weight[j], {D, 1, config_.resolutions[j]}, "patch weight");
        expect_shape(params_.patch_bias[j], {D}, "patch bias");
    }
    for (std::size_t i = 0; i < layout_.branches.size(); ++i) {
        expect_shape(params_.mine_weight[i], {D, D, layout_.branches[i].kernel}, "mining weight");
        expect_shape(params_.mine_bias[i], {D}, "mining bias");
    }
    expect_shape(params_.embedding, {config_.channels, P}, "embedding E");
    expect_shape(params_.out_weight, {P * D, config_.horizon}, "output weight");
    expect_shape(params_.out_bias, {config_.horizon}, "output bias");
}

Tensor MppnModel::forward(const Tensor& x) const
{
    const Tensor batch = as_batch(x, config_.lookback, config_.channels, "mppn");
    const Index B = batch.dim(0);
    const Index C = config_.channels;
    const Index P = layout_.pattern_dim;
    const Tensor patterns = assemble_patterns(batch, params_, config_, layout_);
    const Tensor adapted = channel_adapt(patterns, params_.embedding);
    const Tensor flat = reshape(adapted, {B * C, P * config_.hidden});
    const Tensor projected = linear(flat, params_.out_weight, params_.out_bias);
    const Tensor y = permute(reshape(projected, {B, C, config_.horizon}), {0, 2, 1});
    return restore_rank(y, x);
}

std::vector<NamedTensor> MppnModel::parameters() const
{
    std::vector<NamedTensor> out;
    for (std::size_t j = 0; j < config_.resolutions.size(); ++j) {
        const std::string prefix = "patch.r" + std::to_string(config_.resolutions[j]);
        out.push_back({prefix + ".weight", params_.patch_weight[j]});
        out.push_back({prefix + ".bias", params_.patch_bias[j]});
    }
    for (std::size_t i = 0; i < layout_.branches.size(); ++i) {
        const auto& b = layout_.branches[i];
        const std::string prefix = "mine.p" + std::to_string(b.period) + ".r" + std::to_string(b.resolution);
        out.push_back({prefix + ".weight", params_.mine_weight[i]});
        out.push_back({prefix + ".bias", params_.mine_bias[i]});
    }
    out.push_back({"embedding", params_.embedding});
    out.push_back({"output.weight", params_.out_weight});
    out.push_back({"output.bias", params_.out_bias});
    return out;
}

// ---------------------------------------------------------------------------

GateMatrix export_gates(const MppnParams& params, const std::vector<std::string>& channel_names)
{
    const Tensor g = sigmoid(params.embedding.detach());
    const Index C = g.dim(0);
    const Index P = g.dim(1);
    GateMatrix out;
    out.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        g.data().data(), C, P);
    for (Index c = 0; c < C; ++c) {
        out.channels.push_back(c < static_cast<Index>(channel_names.size()) ? channel_names[c]
                                                                            : "c" + std::to_string(c));
    }
    return out;
}

void write_gates_csv(std::ostream& out, const GateMatrix& gates)
{
    out << "channel";
    for (Index p = 0; p < gates.values.cols(); ++p) out << ",p" << p;
    out << '\n';
    char buf[64];
    for (Index c = 0; c < gates.values.rows(); ++c) {
        out << gates.channels[c];
        for (Index p = 0; p < gates.values.cols(); ++p) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, gates.values(c, p));
            out << ',';
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

GateMatrix read_gates_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("channel", 0) != 0) throw FormatError("gates csv: missing header");
    const auto columns = static_cast<Index>(std::count(line.begin(), line.end(), ','));
    std::vector<std::vector<double>> rows;
    GateMatrix out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        out.channels.push_back(cell);
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc()) throw FormatError("gates csv: bad value '" + cell + "'");
            row.push_back(v);
        }
        if (static_cast<Index>(row.size()) != columns) throw FormatError("gates csv: ragged row");
        rows.push_back(std::move(row));
    }
    out.values.resize(static_cast<Index>(rows.size()), columns);
    for (Index c = 0; c < out.values.rows(); ++c) {
        for (Index p = 0; p < columns; ++p) out.values(c, p) = rows[c][p];
    }
    return out;
}

} // namespace mppn
