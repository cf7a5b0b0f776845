#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mppn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct TensorImpl;

// One recorded operation. Nodes are ordered by `seq`, which is assigned at
// creation time; backward visits them in strictly decreasing `seq`.
struct Node {
    std::uint64_t seq = 0;
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    // Receives the gradient of the node's output and accumulates into inputs.
    std::function<void(const Eigen::ArrayXd&)> backward;
};

struct TensorImpl {
    Shape shape;
    Eigen::ArrayXd data;
    Eigen::ArrayXd grad;  // empty until a gradient arrives
    bool requires_grad = false;
    std::shared_ptr<Node> node;

    void accumulate(const Eigen::ArrayXd& g);
};

} // namespace detail

/// Dense row-major array of doubles with optional gradient tracking.
///
/// A Tensor is a cheap handle: copies share the same storage and graph node.
/// Use `clone()` for an independent copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, Eigen::ArrayXd values, bool requires_grad = false);
    static Tensor from(Shape shape, std::initializer_list<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    Index rank() const { return static_cast<Index>(shape().size()); }
    Index dim(Index axis) const;
    Index size() const;

    Eigen::ArrayXd& data();
    const Eigen::ArrayXd& data() const;
    double item() const;
    double at(std::initializer_list<Index> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool has_grad() const;
    // Gradient buffer; zeros of the right size when none has been accumulated.
    Eigen::ArrayXd grad() const;
    void zero_grad();

    // Same values, no graph history.
    Tensor detach() const;
    Tensor clone() const;

    // Reverse-mode sweep from this scalar.
    void backward() const;

    // Name of the op that produced this tensor, or "leaf".
    std::string op_name() const;

    // Internal: used by the op implementations.
    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Axis arguments accept negative values counted
// from the end.

/// 1D convolution without implicit padding.
/// input [Cin, Lin] or [N, Cin, Lin]; weight [Cout, Cin, K]; bias [Cout].
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index stride = 1,
              Index dilation = 1);

/// Affine map over the last axis: input [..., F] x weight [F, G] + bias [G].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// input [..., F] x matrix [F, G]. The matrix may be a constant.
Tensor matmul(const Tensor& input, const Tensor& matrix);

Tensor sigmoid(const Tensor& x);
Tensor concat(std::span<const Tensor> tensors, Index axis);
Tensor concat(std::initializer_list<Tensor> tensors, Index axis);
Tensor slice(const Tensor& x, Index axis, Index start, Index length);
std::vector<Tensor> split(const Tensor& x, Index axis, std::span<const Index> lengths);

/// a [..., C, P, D] scaled by gate [C, P, 1]; leading axes of `a` broadcast.
Tensor broadcast_mul(const Tensor& a, const Tensor& gate);

/// Repeats a tensor whose last extent is 1 to `count` along the last axis.
Tensor expand_last(const Tensor& x, Index count);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, std::span<const Index> order);
Tensor permute(const Tensor& x, std::initializer_list<Index> order);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Operator sugar for tests and small expressions.
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

} // namespace mppn
