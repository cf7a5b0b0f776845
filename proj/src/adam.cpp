#include "mppn/adam.hpp"

#include "mppn/error.hpp"

#include <cmath>

namespace mppn {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), options_(options)
{
    if (options_.lr <= 0.0 || options_.eps <= 0.0 || options_.weight_decay < 0.0) {
        throw ArgumentError("adam: lr and eps must be positive, weight_decay non-negative");
    }
    if (options_.beta1 < 0.0 || options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
        throw ArgumentError("adam: betas must lie in [0, 1)");
    }
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        if (!p.defined()) throw ArgumentError("adam: undefined parameter");
        m_.push_back(Eigen::ArrayXd::Zero(p.size()));
        v_.push_back(Eigen::ArrayXd::Zero(p.size()));
    }
}

void Adam::step()
{
    ++t_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (m_[i].size() != p.size()) throw ArgumentError("adam: parameter " + std::to_string(i) + " changed size");
        Eigen::ArrayXd g = p.grad();
        if (options_.weight_decay != 0.0) g += options_.weight_decay * p.data();
        m_[i] = b1 * m_[i] + (1.0 - b1) * g;
        v_[i] = b2 * v_[i] + (1.0 - b2) * g.square();
        p.data() -= options_.lr * (m_[i] / correction1) / ((v_[i] / correction2).sqrt() + options_.eps);
    }
}

void Adam::zero_grad()
{
    for (Tensor& p : params_) p.zero_grad();
}

} // namespace mppn
