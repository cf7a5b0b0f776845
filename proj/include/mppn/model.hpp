#pragma once

#include "mppn/forecaster.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mppn {

struct MppnConfig {
    Index lookback = 336;                   // L
    Index horizon = 96;                     // H
    Index channels = 1;                     // C
    Index hidden = 48;                      // D
    std::vector<Index> resolutions{1, 3, 4, 6};
    std::vector<Index> periods;             // from period detection or an override
    bool overlap = false;                   // stride-1 patching
    std::uint64_t seed = 0;
};

/// One (period, resolution) branch of the pattern miner.
struct PatternBranch {
    Index period = 0;
    Index resolution = 0;
    Index kernel = 0;     // floor(L / period)
    Index dilation = 0;   // floor(period / r): phases per period at this resolution
    Index patches = 0;    // ceil(L / r): length of the patched series fed to the miner
};

struct SkippedBranch {
    Index period = 0;
    Index resolution = 0;
    std::string reason;
};

/// Validated branch geometry for a config. Branches follow config order:
/// periods outermost, resolutions innermost.
struct PatternLayout {
    std::vector<PatternBranch> branches;
    std::vector<SkippedBranch> skipped;
    Index pattern_dim = 0;  // P

    static PatternLayout resolve(const MppnConfig& config);
};

/// P = sum of floor(period / r) over retained branches.
Index pattern_dim(const MppnConfig& config);

struct MppnParams {
    std::vector<Tensor> patch_weight;  // per resolution: [D, 1, r]
    std::vector<Tensor> patch_bias;    // per resolution: [D]
    std::vector<Tensor> mine_weight;   // per branch: [D, D, K]
    std::vector<Tensor> mine_bias;     // per branch: [D]
    Tensor embedding;                  // E: [C, P]
    Tensor out_weight;                 // W: [P*D, H]
    Tensor out_bias;                   // b: [H]

    static MppnParams initialize(const MppnConfig& config, const PatternLayout& layout);
};

// ---------------------------------------------------------------------------
// Building blocks. Series tensors are batched per channel: [N, 1, L].

/// Left-pads by repeating the first value until the length is a multiple of r.
Tensor pad_left_replicate(const Tensor& x, Index multiple);

/// Patch embedding for resolution r: [N, 1, L] -> [N, D, ceil(L/r)].
/// Non-overlap: pad then stride r. Overlap: stride 1 on the raw series, then
/// the trailing ceil(L/r) positions.
Tensor multi_resolution_patch(const Tensor& x, const Tensor& weight, const Tensor& bias, Index resolution,
                              bool overlap = false);

/// Dilated convolution over one period at one resolution, keeping the last
/// floor(period/r) outputs: [N, D, L_r] -> [N, D, floor(period/r)].
Tensor periodic_pattern_mine(const Tensor& patched, const Tensor& weight, const Tensor& bias,
                             const PatternBranch& branch);

/// x [L, C] or [B, L, C] -> X_Pattern [C, P, D] or [B, C, P, D].
Tensor assemble_patterns(const Tensor& x, const MppnParams& params, const MppnConfig& config,
                         const PatternLayout& layout);

/// X_Pattern [..., C, P, D] gated by sigmoid(E [C, P]).
Tensor channel_adapt(const Tensor& patterns, const Tensor& embedding);

class MppnModel : public Forecaster {
public:
    explicit MppnModel(MppnConfig config);
    MppnModel(MppnConfig config, MppnParams params);

    std::string kind() const override { return "mppn"; }
    Index lookback() const override { return config_.lookback; }
    Index horizon() const override { return config_.horizon; }
    Index channels() const override { return config_.channels; }

    Tensor forward(const Tensor& x) const override;
    std::vector<NamedTensor> parameters() const override;

    const MppnConfig& config() const { return config_; }
    const PatternLayout& layout() const { return layout_; }
    const MppnParams& params() const { return params_; }
    MppnParams& params() { return params_; }

private:
    MppnConfig config_;
    PatternLayout layout_;
    MppnParams params_;
};

/// sigmoid(E) with channel names; one row per channel.
struct GateMatrix {
    std::vector<std::string> channels;
    Eigen::MatrixXd values;  // [C, P]
};

GateMatrix export_gates(const MppnParams& params, const std::vector<std::string>& channel_names);
void write_gates_csv(std::ostream& out, const GateMatrix& gates);
GateMatrix read_gates_csv(std::istream& in);

} // namespace mppn
