#pragma once

#include "mppn/random.hpp"
#include "mppn/tensor.hpp"

#include <string>
#include <vector>

namespace mppn {

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Direct multi-horizon forecaster: [B, L, C] -> [B, H, C], or [L, C] -> [H, C].
class Forecaster {
public:
    virtual ~Forecaster() = default;

    virtual std::string kind() const = 0;
    virtual Index lookback() const = 0;
    virtual Index horizon() const = 0;
    virtual Index channels() const = 0;

    virtual Tensor forward(const Tensor& x) const = 0;

    // Learnable tensors in a fixed order. The handles alias the model's storage.
    virtual std::vector<NamedTensor> parameters() const = 0;

    std::vector<Tensor> parameter_tensors() const;
    Index parameter_count() const;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn in row-major order.
Tensor uniform_init(Shape shape, Index fan_in, SplitMix64& rng);

// Shared helpers for forward(): accept [L, C] or [B, L, C] and restore the
// caller's rank on the way out.
Tensor as_batch(const Tensor& x, Index lookback, Index channels, const char* model);
Tensor restore_rank(const Tensor& y, const Tensor& original_input);

} // namespace mppn
