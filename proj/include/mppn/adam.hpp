#pragma once

#include "mppn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace mppn {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Coupled L2: added to the gradient before the moment updates.
    double weight_decay = 1e-5;
};

/// Adam with bias correction. Moment buffers are bound to a fixed parameter
/// list at construction; every step must pass the same list.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamOptions options = {});

    // Applies one update using each parameter's accumulated gradient.
    // Parameters without a gradient are treated as having a zero gradient.
    void step();
    void zero_grad();

    std::int64_t steps() const { return t_; }
    const AdamOptions& options() const { return options_; }
    const std::vector<Eigen::ArrayXd>& first_moments() const { return m_; }
    const std::vector<Eigen::ArrayXd>& second_moments() const { return v_; }

private:
    std::vector<Tensor> params_;
    AdamOptions options_;
    std::vector<Eigen::ArrayXd> m_;
    std::vector<Eigen::ArrayXd> v_;
    std::int64_t t_ = 0;
};

} // namespace mppn
