#include "gradcheck.hpp"

#include "mppn/error.hpp"
#include "mppn/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace mppn {
namespace {

using testing::gradcheck;
using testing::random_tensor;
using testing::weighted_sum;

constexpr double kOpTolerance = 1e-5;

void expect_values(const Tensor& t, std::initializer_list<double> expected)
{
    ASSERT_EQ(t.size(), static_cast<Index>(expected.size()));
    Index i = 0;
    for (double e : expected) EXPECT_DOUBLE_EQ(t.data()[i++], e) << "at " << i - 1;
}

// conv1d ------------------------------------------------------------------

TEST(Conv1d, IdentityKernel)
{
    Tensor x = Tensor::from({1, 4}, {1, 2, 3, 4});
    Tensor w = Tensor::from({1, 1, 1}, {1});
    Tensor b = Tensor::from({1}, {0});
    Tensor y = conv1d(x, w, b, 1, 1);
    EXPECT_EQ(y.shape(), (Shape{1, 4}));
    expect_values(y, {1, 2, 3, 4});
}

TEST(Conv1d, OutputLength)
{
    Tensor x = Tensor::zeros({1, 6});
    Tensor w = Tensor::zeros({1, 1, 2});
    Tensor b = Tensor::zeros({1});
    EXPECT_EQ(conv1d(x, w, b, 2, 1).shape(), (Shape{1, 3}));
    // floor((20 - 3*3 - 1)/2) + 1 = 6
    EXPECT_EQ(conv1d(Tensor::zeros({1, 20}), Tensor::zeros({2, 1, 4}), Tensor::zeros({2}), 2, 3).shape(),
              (Shape{2, 6}));
}

TEST(Conv1d, HandComputedDilation)
{
    // out[t] = x[t] + 10 * x[t + 2]
    Tensor x = Tensor::from({1, 5}, {1, 2, 3, 4, 5});
    Tensor w = Tensor::from({1, 1, 2}, {1, 10});
    Tensor b = Tensor::from({1}, {0.5});
    expect_values(conv1d(x, w, b, 1, 2), {31.5, 42.5, 53.5});
}

TEST(Conv1d, GradientMatchesFiniteDifferences)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(seed);
        Tensor x = random_tensor({2, 20}, rng);
        Tensor w = random_tensor({3, 2, 4}, rng);
        Tensor b = random_tensor({3}, rng);
        const double err = gradcheck([&] { return weighted_sum(conv1d(x, w, b, 2, 3)); }, {x, w, b});
        EXPECT_LE(err, kOpTolerance) << "seed " << seed;
    }
}

TEST(Conv1d, BatchedGradientMatchesFiniteDifferences)
{
    SplitMix64 rng(5);
    Tensor x = random_tensor({3, 2, 11}, rng);
    Tensor w = random_tensor({4, 2, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    EXPECT_LE(gradcheck([&] { return weighted_sum(conv1d(x, w, b, 1, 2)); }, {x, w, b}), kOpTolerance);
}

TEST(Conv1d, BatchedEqualsPerSample)
{
    SplitMix64 rng(17);
    Tensor x = random_tensor({3, 2, 9}, rng, false);
    Tensor w = random_tensor({2, 2, 3}, rng, false);
    Tensor b = random_tensor({2}, rng, false);
    Tensor all = conv1d(x, w, b, 2, 1);
    for (Index s = 0; s < 3; ++s) {
        Tensor one = conv1d(reshape(slice(x, 0, s, 1), {2, 9}), w, b, 2, 1);
        Tensor part = slice(all, 0, s, 1);
        EXPECT_TRUE(((one.data() - part.data()).abs() < 1e-12).all());
    }
}

TEST(Conv1d, LinearInInputAndWeight)
{
    SplitMix64 rng(3);
    Tensor x = random_tensor({2, 15}, rng, false);
    Tensor y = random_tensor({2, 15}, rng, false);
    Tensor w = random_tensor({3, 2, 3}, rng, false);
    Tensor v = random_tensor({3, 2, 3}, rng, false);
    Tensor zero = Tensor::zeros({3});
    const double a = 0.7, c = -1.9;

    Tensor lhs = conv1d(add(scale(x, a), scale(y, c)), w, zero, 1, 2);
    Tensor rhs = add(scale(conv1d(x, w, zero, 1, 2), a), scale(conv1d(y, w, zero, 1, 2), c));
    EXPECT_LE((lhs.data() - rhs.data()).abs().maxCoeff(), 1e-12);

    lhs = conv1d(x, add(scale(w, a), scale(v, c)), zero, 1, 2);
    rhs = add(scale(conv1d(x, w, zero, 1, 2), a), scale(conv1d(x, v, zero, 1, 2), c));
    EXPECT_LE((lhs.data() - rhs.data()).abs().maxCoeff(), 1e-12);
}

TEST(Conv1d, Errors)
{
    Tensor b = Tensor::zeros({1});
    EXPECT_THROW(conv1d(Tensor::zeros({2, 8}), Tensor::zeros({1, 3, 2}), b), DimensionError);
    EXPECT_THROW(conv1d(Tensor::zeros({1, 4}), Tensor::zeros({1, 1, 3}), b, 1, 2), DimensionError);
    EXPECT_THROW(conv1d(Tensor::zeros({1, 4}), Tensor::zeros({1, 1, 2}), Tensor::zeros({2})), DimensionError);
    EXPECT_THROW(conv1d(Tensor::zeros({1, 4}), Tensor::zeros({1, 1, 2}), b, 0, 1), ArgumentError);
}

// linear ------------------------------------------------------------------

TEST(Linear, Identity)
{
    Tensor x = Tensor::from({1, 3}, {1, 1, 1});
    Tensor w = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    expect_values(linear(x, w, Tensor::zeros({3})), {1, 1, 1});
}

TEST(Linear, BiasAdd)
{
    Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor w = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::from({2}, {10, 20});
    expect_values(linear(x, w, b), {11, 22, 13, 24});
}

TEST(Linear, GradientMatchesFiniteDifferences)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(seed);
        Tensor x = random_tensor({4, 7}, rng);
        Tensor w = random_tensor({7, 5}, rng);
        Tensor b = random_tensor({5}, rng);
        EXPECT_LE(gradcheck([&] { return weighted_sum(linear(x, w, b)); }, {x, w, b}), kOpTolerance);
    }
}

TEST(Linear, HigherRankInput)
{
    SplitMix64 rng(1);
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor w = random_tensor({4, 2}, rng);
    Tensor b = random_tensor({2}, rng);
    EXPECT_EQ(linear(x, w, b).shape(), (Shape{2, 3, 2}));
    EXPECT_LE(gradcheck([&] { return weighted_sum(linear(x, w, b)); }, {x, w, b}), kOpTolerance);
}

TEST(Linear, InnerDimensionMismatch)
{
    EXPECT_THROW(linear(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}), Tensor::zeros({2})), DimensionError);
    EXPECT_THROW(linear(Tensor::zeros({2, 3}), Tensor::zeros({3, 2}), Tensor::zeros({3})), DimensionError);
}

// sigmoid -----------------------------------------------------------------

TEST(Sigmoid, ZeroAndGradient)
{
    Tensor x = Tensor::scalar(0.0, true);
    Tensor y = sigmoid(x);
    EXPECT_DOUBLE_EQ(y.item(), 0.5);
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Sigmoid, SaturatesWithoutNaN)
{
    Tensor y = sigmoid(Tensor::from({3}, {50.0, -1000.0, 1000.0}));
    EXPECT_NEAR(y.data()[0], 1.0, 1e-12);
    EXPECT_EQ(y.data()[1], 0.0);
    EXPECT_EQ(y.data()[2], 1.0);
    EXPECT_TRUE(y.data().isFinite().all());
}

TEST(Sigmoid, GradientMatchesFiniteDifferences)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(seed);
        Tensor x = random_tensor({3, 3}, rng, true, -4.0, 4.0);
        EXPECT_LE(gradcheck([&] { return weighted_sum(sigmoid(x)); }, {x}), kOpTolerance);
    }
}

// concat / slice ------------------------------------------------------------

TEST(Concat, Examples)
{
    Tensor c = concat({Tensor::from({1, 2}, {1, 2}), Tensor::from({1, 1}, {3})}, 1);
    EXPECT_EQ(c.shape(), (Shape{1, 3}));
    expect_values(c, {1, 2, 3});
    EXPECT_EQ(concat({Tensor::zeros({2, 3}), Tensor::zeros({2, 5})}, 1).shape(), (Shape{2, 8}));
}

TEST(Concat, SumBackwardGivesOnes)
{
    SplitMix64 rng(2);
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2, 5}, rng);
    sum(concat({a, b}, 1)).backward();
    EXPECT_TRUE((a.grad() == 1.0).all());
    EXPECT_TRUE((b.grad() == 1.0).all());
}

TEST(Concat, GradientMatchesFiniteDifferences)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(seed);
        Tensor a = random_tensor({2, 3, 2}, rng);
        Tensor b = random_tensor({2, 1, 2}, rng);
        EXPECT_LE(gradcheck([&] { return weighted_sum(concat({a, b}, -2)); }, {a, b}), kOpTolerance);
    }
}

TEST(Concat, SplitReconstructsBitExactly)
{
    SplitMix64 rng(8);
    Tensor a = random_tensor({3, 2, 4}, rng, false);
    Tensor b = random_tensor({3, 5, 4}, rng, false);
    const Index lengths[] = {2, 5};
    auto parts = split(concat({a, b}, 1), 1, lengths);
    ASSERT_EQ(parts.size(), 2u);
    EXPECT_TRUE((parts[0].data() == a.data()).all());
    EXPECT_TRUE((parts[1].data() == b.data()).all());
    EXPECT_EQ(parts[1].shape(), b.shape());
}

TEST(Concat, Errors)
{
    EXPECT_THROW(concat({Tensor::zeros({2, 3}), Tensor::zeros({3, 3})}, 1), DimensionError);
    EXPECT_THROW(concat(std::span<const Tensor>{}, 0), ArgumentError);
}

TEST(Slice, GradientMatchesFiniteDifferences)
{
    SplitMix64 rng(4);
    Tensor x = random_tensor({2, 7, 3}, rng);
    EXPECT_LE(gradcheck([&] { return weighted_sum(slice(x, 1, 4, 3)); }, {x}), kOpTolerance);
    EXPECT_THROW(slice(x, 1, 5, 3), DimensionError);
}

// broadcast_mul -------------------------------------------------------------

TEST(BroadcastMul, UnitAndHalfGates)
{
    SplitMix64 rng(6);
    Tensor a = random_tensor({2, 3, 4}, rng, false);
    EXPECT_TRUE((broadcast_mul(a, Tensor::full({2, 3, 1}, 1.0)).data() == a.data()).all());
    EXPECT_TRUE((broadcast_mul(a, Tensor::full({2, 3, 1}, 0.5)).data() == a.data() / 2.0).all());
}

TEST(BroadcastMul, GradientMatchesFiniteDifferences)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(seed);
        Tensor a = random_tensor({2, 3, 4}, rng);
        Tensor g = random_tensor({2, 3, 1}, rng);
        EXPECT_LE(gradcheck([&] { return weighted_sum(broadcast_mul(a, g)); }, {a, g}), kOpTolerance);
    }
}

TEST(BroadcastMul, LeadingAxesBroadcast)
{
    SplitMix64 rng(7);
    Tensor a = random_tensor({3, 2, 3, 4}, rng);
    Tensor g = random_tensor({2, 3, 1}, rng);
    EXPECT_LE(gradcheck([&] { return weighted_sum(broadcast_mul(a, g)); }, {a, g}), kOpTolerance);
}

TEST(BroadcastMul, RejectsIncompatibleShapes)
{
    EXPECT_THROW(broadcast_mul(Tensor::zeros({2, 3, 4}), Tensor::zeros({2, 3, 2})), DimensionError);
    EXPECT_THROW(broadcast_mul(Tensor::zeros({2, 3, 4}), Tensor::zeros({3, 2, 1})), DimensionError);
}

// mse_loss ------------------------------------------------------------------

TEST(MseLoss, Examples)
{
    Tensor t = Tensor::from({2}, {1, 3});
    EXPECT_EQ(mse_loss(t, t).item(), 0.0);
    EXPECT_DOUBLE_EQ(mse_loss(Tensor::zeros({2}), t).item(), 5.0);
    EXPECT_THROW(mse_loss(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
}

TEST(MseLoss, GradientMatchesFiniteDifferences)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(seed);
        Tensor p = random_tensor({5, 4}, rng);
        Tensor t = random_tensor({5, 4}, rng);
        EXPECT_LE(gradcheck([&] { return mse_loss(p, t); }, {p, t}), 1e-6);
    }
}

// remaining shape ops ---------------------------------------------------------

TEST(ShapeOps, PermuteReshapeExpandGradients)
{
    SplitMix64 rng(11);
    Tensor x = random_tensor({2, 3, 4}, rng);
    EXPECT_LE(gradcheck([&] { return weighted_sum(permute(x, {2, 0, 1})); }, {x}), kOpTolerance);
    EXPECT_LE(gradcheck([&] { return weighted_sum(reshape(x, {6, 4})); }, {x}), kOpTolerance);
    Tensor c = random_tensor({3, 1}, rng);
    EXPECT_LE(gradcheck([&] { return weighted_sum(expand_last(c, 5)); }, {c}), kOpTolerance);
    Tensor y = random_tensor({2, 3, 4}, rng);
    EXPECT_LE(gradcheck([&] { return weighted_sum(mul(sub(x, y), add(x, scale(y, 2.0)))); }, {x, y}),
              kOpTolerance);
}

TEST(ShapeOps, PermuteMovesElements)
{
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor t = permute(x, {1, 0});
    EXPECT_EQ(t.shape(), (Shape{3, 2}));
    expect_values(t, {1, 4, 2, 5, 3, 6});
    EXPECT_THROW(reshape(x, {4}), DimensionError);
}

// backward --------------------------------------------------------------------

TEST(Backward, SumGivesOnes)
{
    Tensor x = Tensor::from({3}, {1, 2, 3}, true);
    sum(x).backward();
    EXPECT_TRUE((x.grad() == 1.0).all());
}

TEST(Backward, FanOutAccumulates)
{
    Tensor x = Tensor::from({2}, {0.3, -4.0}, true);
    sum(add(x, x)).backward();
    EXPECT_TRUE((x.grad() == 2.0).all());
}

TEST(Backward, SumOfBranchesEqualsSumOfGradients)
{
    SplitMix64 rng(12);
    Tensor x = random_tensor({4}, rng);
    auto f = [&] { return sum(sigmoid(x)); };
    auto g = [&] { return sum(mul(x, x)); };

    f().backward();
    Eigen::ArrayXd gf = x.grad();
    x.zero_grad();
    g().backward();
    Eigen::ArrayXd gg = x.grad();
    x.zero_grad();
    add(f(), g()).backward();
    EXPECT_LE((x.grad() - (gf + gg)).abs().maxCoeff(), 1e-12);
}

TEST(Backward, RejectsNonScalar)
{
    Tensor x = Tensor::zeros({2}, true);
    EXPECT_THROW(scale(x, 2.0).backward(), ArgumentError);
}

TEST(Backward, OpNamesAreRecorded)
{
    Tensor x = Tensor::zeros({2}, true);
    EXPECT_EQ(x.op_name(), "leaf");
    EXPECT_EQ(sigmoid(x).op_name(), "sigmoid");
    EXPECT_EQ(sigmoid(Tensor::zeros({2})).op_name(), "leaf");
}

} // namespace
} // namespace mppn
