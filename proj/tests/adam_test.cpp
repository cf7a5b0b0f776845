#include "mppn/adam.hpp"
#include "mppn/error.hpp"

#include <gtest/gtest.h>

namespace mppn {
namespace {

TEST(Adam, ZeroGradientWithoutDecayLeavesParameter)
{
    Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    Adam opt({p}, {.weight_decay = 0.0});
    sum(scale(p, 0.0)).backward();
    opt.step();
    EXPECT_EQ(p.data()[0], 1.0);
    EXPECT_EQ(p.data()[1], -2.0);
    EXPECT_EQ(p.data()[2], 0.5);
}

TEST(Adam, FirstStepMatchesBiasCorrectedFormula)
{
    // t=1: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1, step = lr / (1 + eps).
    Tensor p = Tensor::scalar(0.0, true);
    Adam opt({p}, {.lr = 1e-3, .weight_decay = 0.0});
    sum(p).backward();
    opt.step();
    EXPECT_DOUBLE_EQ(p.item(), -1e-3 / (1.0 + 1e-8));
    EXPECT_DOUBLE_EQ(opt.first_moments()[0][0], 0.1);
    EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, CoupledWeightDecayEntersTheGradient)
{
    Tensor p = Tensor::scalar(2.0, true);
    Adam opt({p}, {.weight_decay = 0.1});
    opt.step();  // no gradient: effective g = 0.1 * 2
    EXPECT_DOUBLE_EQ(opt.first_moments()[0][0], 0.1 * 0.2);
    EXPECT_NEAR(opt.second_moments()[0][0], 0.001 * 0.04, 1e-18);
    EXPECT_LT(p.item(), 2.0);
}

TEST(Adam, DecreasesConvexQuadratic)
{
    Tensor p = Tensor::scalar(0.0, true);
    Tensor target = Tensor::scalar(3.0);
    Adam opt({p}, {.lr = 0.1});
    double previous = mse_loss(p, target).item();
    for (int i = 0; i < 2; ++i) {
        opt.zero_grad();
        Tensor loss = mse_loss(p, target);
        loss.backward();
        opt.step();
        const double now = mse_loss(p, target).item();
        EXPECT_LT(now, previous);
        previous = now;
    }
}

TEST(Adam, BitDeterministic)
{
    auto run = [] {
        Tensor p = Tensor::from({2}, {0.25, -0.75}, true);
        Tensor target = Tensor::from({2}, {1.0, 2.0});
        Adam opt({p});
        for (int i = 0; i < 25; ++i) {
            opt.zero_grad();
            mse_loss(p, target).backward();
            opt.step();
        }
        return Eigen::ArrayXd(p.data());
    };
    const Eigen::ArrayXd a = run();
    const Eigen::ArrayXd b = run();
    EXPECT_TRUE((a == b).all());
}

TEST(Adam, RejectsBadOptions)
{
    Tensor p = Tensor::scalar(0.0, true);
    EXPECT_THROW(Adam({p}, {.lr = 0.0}), ArgumentError);
    EXPECT_THROW(Adam({p}, {.beta1 = 1.0}), ArgumentError);
}

} // namespace
} // namespace mppn
