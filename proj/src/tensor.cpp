#include "mppn/tensor.hpp"

#include "mppn/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace mppn {

using detail::Node;
using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;
using Eigen::ArrayXd;

namespace {

std::atomic<std::uint64_t> next_seq{1};

// a * b with every output accumulated over the inner axis in index order.
// Blocked GEMM kernels choose code paths by a row or column's position in
// the block, so one sample's result could depend on where it sits in the
// batch. Forward passes use this; backward passes keep Eigen's GEMM.
RowMatrix ordered_product(const Eigen::Ref<const RowMatrix>& a, const Eigen::Ref<const RowMatrix>& b)
{
    RowMatrix y = RowMatrix::Zero(a.rows(), b.cols());
    const Index n = b.cols();
    for (Index i = 0; i < a.rows(); ++i) {
        double* yr = y.row(i).data();
        for (Index k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            const double* br = b.row(k).data();
            for (Index j = 0; j < n; ++j) yr[j] += s * br[j];
        }
    }
    return y;
}

Index normalize_axis(Index axis, Index rank, const char* op)
{
    const Index a = axis < 0 ? axis + rank : axis;
    if (a < 0 || a >= rank) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for rank " + std::to_string(rank));
    }
    return a;
}

Index product(const Shape& shape, std::size_t begin, std::size_t end)
{
    Index p = 1;
    for (std::size_t i = begin; i < end; ++i) p *= shape[i];
    return p;
}

// Builds the output tensor and, if any input tracks gradients, its node.
Tensor record(const char* op, Shape shape, ArrayXd values, std::vector<ImplPtr> inputs,
              std::function<void(const ArrayXd&)> backward)
{
    auto out = std::make_shared<TensorImpl>();
    out->shape = std::move(shape);
    out->data = std::move(values);
    const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                     [](const ImplPtr& p) { return p->requires_grad; });
    if (tracked) {
        out->requires_grad = true;
        auto node = std::make_shared<Node>();
        node->seq = next_seq.fetch_add(1, std::memory_order_relaxed);
        node->op = op;
        node->inputs = std::move(inputs);
        node->backward = std::move(backward);
        out->node = std::move(node);
    }
    return Tensor(std::move(out));
}

void require_defined(const Tensor& t, const char* op)
{
    if (!t.defined()) throw ArgumentError(std::string(op) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                             " vs " + to_string(b.shape()));
    }
}

} // namespace

Index numel(const Shape& shape) { return product(shape, 0, shape.size()); }

std::string to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

void TensorImpl::accumulate(const ArrayXd& g)
{
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
    for (Index e : shape) {
        if (e <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->data = ArrayXd::Constant(numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, ArrayXd values, bool requires_grad)
{
    for (Index e : shape) {
        if (e <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    }
    if (numel(shape) != values.size()) {
        throw DimensionError("shape " + to_string(shape) + " needs " + std::to_string(numel(shape)) +
                             " values, got " + std::to_string(values.size()));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values, bool requires_grad)
{
    ArrayXd v(static_cast<Index>(values.size()));
    std::copy(values.begin(), values.end(), v.data());
    return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return full({}, value, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

Index Tensor::dim(Index axis) const { return shape()[normalize_axis(axis, rank(), "dim")]; }

Index Tensor::size() const { return impl_->data.size(); }

ArrayXd& Tensor::data() { return impl_->data; }
const ArrayXd& Tensor::data() const { return impl_->data; }

double Tensor::item() const
{
    if (size() != 1) throw ArgumentError("item() on tensor of shape " + to_string(shape()));
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<Index> index) const
{
    if (static_cast<Index>(index.size()) != rank()) throw DimensionError("at(): wrong index rank");
    Index flat = 0;
    std::size_t axis = 0;
    for (Index i : index) {
        if (i < 0 || i >= shape()[axis]) throw DimensionError("at(): index out of range");
        flat = flat * shape()[axis] + i;
        ++axis;
    }
    return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return impl_->grad.size() != 0; }

ArrayXd Tensor::grad() const
{
    if (impl_->grad.size() == 0) return ArrayXd::Zero(size());
    return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.resize(0); }

Tensor Tensor::detach() const { return from(shape(), data()); }

Tensor Tensor::clone() const { return from(shape(), data(), requires_grad()); }

std::string Tensor::op_name() const { return impl_->node ? impl_->node->op : "leaf"; }

void Tensor::backward() const
{
    if (size() != 1) throw ArgumentError("backward() needs a scalar loss, got shape " + to_string(shape()));
    if (!impl_->requires_grad) return;

    // Gather every non-leaf tensor reachable from the loss.
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    std::vector<TensorImpl*> stack{impl_.get()};
    while (!stack.empty()) {
        TensorImpl* t = stack.back();
        stack.pop_back();
        if (!t->node || !seen.insert(t).second) continue;
        order.push_back(t);
        for (const auto& in : t->node->inputs) {
            if (in->node) stack.push_back(in.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const TensorImpl* a, const TensorImpl* b) { return a->node->seq > b->node->seq; });

    impl_->accumulate(ArrayXd::Ones(1));
    for (TensorImpl* t : order) {
        if (t->grad.size() == 0) continue;
        t->node->backward(t->grad);
    }
}

// ---------------------------------------------------------------------------
// conv1d

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index stride, Index dilation)
{
    require_defined(input, "conv1d");
    if (stride < 1 || dilation < 1) throw ArgumentError("conv1d: stride and dilation must be >= 1");
    if (weight.rank() != 3) throw DimensionError("conv1d: weight must be [Cout, Cin, K], got " + to_string(weight.shape()));
    const bool batched = input.rank() == 3;
    if (!batched && input.rank() != 2) {
        throw DimensionError("conv1d: input must be [Cin, Lin] or [N, Cin, Lin], got " + to_string(input.shape()));
    }
    const Index n = batched ? input.dim(0) : 1;
    const Index cin = input.dim(-2);
    const Index lin = input.dim(-1);
    const Index cout = weight.dim(0);
    const Index k = weight.dim(2);
    if (weight.dim(1) != cin) {
        throw DimensionError("conv1d: axis 1 of weight is " + std::to_string(weight.dim(1)) +
                             " but input has " + std::to_string(cin) + " channels");
    }
    if (bias.rank() != 1 || bias.dim(0) != cout) {
        throw DimensionError("conv1d: bias must be [" + std::to_string(cout) + "], got " + to_string(bias.shape()));
    }
    const Index field = (k - 1) * dilation + 1;
    if (lin < field) {
        throw DimensionError("conv1d: receptive field " + std::to_string(field) + " exceeds input length " +
                             std::to_string(lin));
    }
    const Index lout = (lin - field) / stride + 1;
    const Index rows = cin * k;
    const Index cols_n = n * lout;

    auto cols = std::make_shared<RowMatrix>(rows, cols_n);
    const double* x = input.data().data();
    for (Index s = 0; s < n; ++s) {
        for (Index ci = 0; ci < cin; ++ci) {
            const double* xs = x + (s * cin + ci) * lin;
            for (Index j = 0; j < k; ++j) {
                double* row = cols->data() + (ci * k + j) * cols_n + s * lout;
                const Index offset = j * dilation;
                for (Index t = 0; t < lout; ++t) row[t] = xs[t * stride + offset];
            }
        }
    }

    Eigen::Map<const RowMatrix> w(weight.data().data(), cout, rows);
    RowMatrix y = ordered_product(w, *cols);
    y.colwise() += bias.data().matrix();

    ArrayXd out(n * cout * lout);
    for (Index s = 0; s < n; ++s) {
        for (Index c = 0; c < cout; ++c) {
            std::copy_n(y.data() + c * cols_n + s * lout, lout, out.data() + (s * cout + c) * lout);
        }
    }

    Shape shape = batched ? Shape{n, cout, lout} : Shape{cout, lout};
    auto xi = input.impl();
    auto wi = weight.impl();
    auto bi = bias.impl();
    return record("conv1d", std::move(shape), std::move(out), {xi, wi, bi},
                  [=](const ArrayXd& g) {
                      RowMatrix gm(cout, cols_n);
                      for (Index s = 0; s < n; ++s) {
                          for (Index c = 0; c < cout; ++c) {
                              std::copy_n(g.data() + (s * cout + c) * lout, lout,
                                          gm.data() + c * cols_n + s * lout);
                          }
                      }
                      if (wi->requires_grad) {
                          RowMatrix gw = gm * cols->transpose();
                          wi->accumulate(Eigen::Map<const ArrayXd>(gw.data(), gw.size()));
                      }
                      if (bi->requires_grad) bi->accumulate(gm.rowwise().sum().array());
                      if (xi->requires_grad) {
                          Eigen::Map<const RowMatrix> wm(wi->data.data(), cout, rows);
                          RowMatrix gc = wm.transpose() * gm;
                          ArrayXd gx = ArrayXd::Zero(n * cin * lin);
                          for (Index s = 0; s < n; ++s) {
                              for (Index ci = 0; ci < cin; ++ci) {
                                  double* gxs = gx.data() + (s * cin + ci) * lin;
                                  for (Index j = 0; j < k; ++j) {
                                      const double* row = gc.data() + (ci * k + j) * cols_n + s * lout;
                                      const Index offset = j * dilation;
                                      for (Index t = 0; t < lout; ++t) gxs[t * stride + offset] += row[t];
                                  }
                              }
                          }
                          xi->accumulate(gx);
                      }
                  });
}

// ---------------------------------------------------------------------------
// linear / matmul

namespace {

Tensor affine(const char* op, const Tensor& input, const Tensor& weight, const Tensor* bias)
{
    require_defined(input, op);
    if (weight.rank() != 2) throw DimensionError(std::string(op) + ": weight must be rank 2, got " + to_string(weight.shape()));
    if (input.rank() < 1) throw DimensionError(std::string(op) + ": input must have at least one axis");
    const Index f = weight.dim(0);
    const Index g = weight.dim(1);
    if (input.dim(-1) != f) {
        throw DimensionError(std::string(op) + ": input last axis is " + std::to_string(input.dim(-1)) +
                             " but weight expects " + std::to_string(f));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != g)) {
        throw DimensionError(std::string(op) + ": bias must be [" + std::to_string(g) + "], got " +
                             to_string(bias->shape()));
    }
    const Index m = input.size() / f;
    Eigen::Map<const RowMatrix> x(input.data().data(), m, f);
    Eigen::Map<const RowMatrix> w(weight.data().data(), f, g);
    RowMatrix y = ordered_product(x, w);
    if (bias) y.rowwise() += bias->data().matrix().transpose();

    Shape shape = input.shape();
    shape.back() = g;
    auto xi = input.impl();
    auto wi = weight.impl();
    std::vector<ImplPtr> inputs{xi, wi};
    ImplPtr bi;
    if (bias) {
        bi = bias->impl();
        inputs.push_back(bi);
    }
    return record(op, std::move(shape), Eigen::Map<const ArrayXd>(y.data(), y.size()), std::move(inputs),
                  [=](const ArrayXd& grad) {
                      Eigen::Map<const RowMatrix> gm(grad.data(), m, g);
                      if (xi->requires_grad) {
                          Eigen::Map<const RowMatrix> wm(wi->data.data(), f, g);
                          RowMatrix gx = gm * wm.transpose();
                          xi->accumulate(Eigen::Map<const ArrayXd>(gx.data(), gx.size()));
                      }
                      if (wi->requires_grad) {
                          Eigen::Map<const RowMatrix> xm(xi->data.data(), m, f);
                          RowMatrix gw = xm.transpose() * gm;
                          wi->accumulate(Eigen::Map<const ArrayXd>(gw.data(), gw.size()));
                      }
                      if (bi && bi->requires_grad) bi->accumulate(gm.colwise().sum().transpose().array());
                  });
}

} // namespace

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias)
{
    return affine("linear", input, weight, &bias);
}

Tensor matmul(const Tensor& input, const Tensor& matrix) { return affine("matmul", input, matrix, nullptr); }

// ---------------------------------------------------------------------------
// elementwise

Tensor sigmoid(const Tensor& x)
{
    require_defined(x, "sigmoid");
    // Split by sign so exp() never overflows.
    ArrayXd y = x.data().unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    auto xi = x.impl();
    ArrayXd saved = y;
    return record("sigmoid", x.shape(), std::move(y), {xi},
                  [xi, saved = std::move(saved)](const ArrayXd& g) {
                      xi->accumulate(g * saved * (1.0 - saved));
                  });
}

Tensor add(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "add");
    auto ai = a.impl();
    auto bi = b.impl();
    return record("add", a.shape(), a.data() + b.data(), {ai, bi}, [ai, bi](const ArrayXd& g) {
        if (ai->requires_grad) ai->accumulate(g);
        if (bi->requires_grad) bi->accumulate(g);
    });
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "sub");
    auto ai = a.impl();
    auto bi = b.impl();
    return record("sub", a.shape(), a.data() - b.data(), {ai, bi}, [ai, bi](const ArrayXd& g) {
        if (ai->requires_grad) ai->accumulate(g);
        if (bi->requires_grad) bi->accumulate(-g);
    });
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mul");
    auto ai = a.impl();
    auto bi = b.impl();
    return record("mul", a.shape(), a.data() * b.data(), {ai, bi}, [ai, bi](const ArrayXd& g) {
        if (ai->requires_grad) ai->accumulate(g * bi->data);
        if (bi->requires_grad) bi->accumulate(g * ai->data);
    });
}

Tensor scale(const Tensor& x, double factor)
{
    require_defined(x, "scale");
    auto xi = x.impl();
    return record("scale", x.shape(), x.data() * factor, {xi},
                  [xi, factor](const ArrayXd& g) { xi->accumulate(g * factor); });
}

// ---------------------------------------------------------------------------
// shape manipulation

Tensor reshape(const Tensor& x, Shape shape)
{
    require_defined(x, "reshape");
    if (numel(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    }
    auto xi = x.impl();
    return record("reshape", std::move(shape), x.data(), {xi}, [xi](const ArrayXd& g) { xi->accumulate(g); });
}

namespace {

// Gathers `src` (with shape `in`) into the layout given by `order`.
ArrayXd permute_values(const ArrayXd& src, const Shape& in, std::span<const Index> order)
{
    const auto rank = in.size();
    std::vector<Index> in_stride(rank, 1);
    for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
    Shape out(rank);
    std::vector<Index> stride(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out[i] = in[order[i]];
        stride[i] = in_stride[order[i]];
    }
    ArrayXd dst(src.size());
    std::vector<Index> counter(rank, 0);
    Index offset = 0;
    for (Index flat = 0; flat < dst.size(); ++flat) {
        dst[flat] = src[offset];
        for (std::size_t i = rank; i-- > 0;) {
            ++counter[i];
            offset += stride[i];
            if (counter[i] < out[i]) break;
            offset -= stride[i] * out[i];
            counter[i] = 0;
        }
    }
    return dst;
}

} // namespace

Tensor permute(const Tensor& x, std::span<const Index> order)
{
    require_defined(x, "permute");
    const auto rank = static_cast<std::size_t>(x.rank());
    if (order.size() != rank) throw DimensionError("permute: order has wrong length");
    std::vector<Index> perm(order.begin(), order.end());
    std::vector<bool> used(rank, false);
    for (Index& p : perm) {
        p = normalize_axis(p, static_cast<Index>(rank), "permute");
        if (used[p]) throw ArgumentError("permute: repeated axis");
        used[p] = true;
    }
    std::vector<Index> inverse(rank);
    Shape shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        inverse[perm[i]] = static_cast<Index>(i);
        shape[i] = x.shape()[perm[i]];
    }
    auto xi = x.impl();
    return record("permute", shape, permute_values(x.data(), x.shape(), perm), {xi},
                  [xi, shape, inverse](const ArrayXd& g) {
                      xi->accumulate(permute_values(g, shape, inverse));
                  });
}

Tensor permute(const Tensor& x, std::initializer_list<Index> order)
{
    return permute(x, std::span<const Index>(order.begin(), order.size()));
}

Tensor slice(const Tensor& x, Index axis, Index start, Index length)
{
    require_defined(x, "slice");
    const Index a = normalize_axis(axis, x.rank(), "slice");
    const Index extent = x.shape()[a];
    if (start < 0 || length < 1 || start + length > extent) {
        throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") outside axis " + std::to_string(a) + " of extent " + std::to_string(extent));
    }
    const Index outer = product(x.shape(), 0, a);
    const Index inner = product(x.shape(), a + 1, x.shape().size());
    ArrayXd out(outer * length * inner);
    for (Index o = 0; o < outer; ++o) {
        std::copy_n(x.data().data() + (o * extent + start) * inner, length * inner,
                    out.data() + o * length * inner);
    }
    Shape shape = x.shape();
    shape[a] = length;
    auto xi = x.impl();
    return record("slice", std::move(shape), std::move(out), {xi}, [=](const ArrayXd& g) {
        ArrayXd gx = ArrayXd::Zero(outer * extent * inner);
        for (Index o = 0; o < outer; ++o) {
            gx.segment((o * extent + start) * inner, length * inner) = g.segment(o * length * inner, length * inner);
        }
        xi->accumulate(gx);
    });
}

Tensor concat(std::span<const Tensor> tensors, Index axis)
{
    if (tensors.empty()) throw ArgumentError("concat: empty tensor list");
    const Tensor& first = tensors.front();
    require_defined(first, "concat");
    const Index a = normalize_axis(axis, first.rank(), "concat");
    Shape shape = first.shape();
    shape[a] = 0;
    std::vector<Index> extents;
    for (const Tensor& t : tensors) {
        require_defined(t, "concat");
        if (t.rank() != first.rank()) throw DimensionError("concat: rank mismatch");
        for (Index i = 0; i < first.rank(); ++i) {
            if (i != a && t.shape()[i] != first.shape()[i]) {
                throw DimensionError("concat: axis " + std::to_string(i) + " disagrees: " + to_string(t.shape()) +
                                     " vs " + to_string(first.shape()));
            }
        }
        extents.push_back(t.shape()[a]);
        shape[a] += t.shape()[a];
    }
    const Index outer = product(shape, 0, a);
    const Index inner = product(shape, a + 1, shape.size());
    const Index total = shape[a];
    ArrayXd out(outer * total * inner);
    std::vector<ImplPtr> inputs;
    Index at = 0;
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const Index e = extents[k];
        for (Index o = 0; o < outer; ++o) {
            std::copy_n(tensors[k].data().data() + o * e * inner, e * inner, out.data() + (o * total + at) * inner);
        }
        at += e;
        inputs.push_back(tensors[k].impl());
    }
    auto captured = inputs;
    return record("concat", std::move(shape), std::move(out), std::move(inputs),
                  [captured, extents, outer, inner, total](const ArrayXd& g) {
                      Index at = 0;
                      for (std::size_t k = 0; k < captured.size(); ++k) {
                          const Index e = extents[k];
                          if (captured[k]->requires_grad) {
                              ArrayXd gk(outer * e * inner);
                              for (Index o = 0; o < outer; ++o) {
                                  gk.segment(o * e * inner, e * inner) = g.segment((o * total + at) * inner, e * inner);
                              }
                              captured[k]->accumulate(gk);
                          }
                          at += e;
                      }
                  });
}

Tensor concat(std::initializer_list<Tensor> tensors, Index axis)
{
    return concat(std::span<const Tensor>(tensors.begin(), tensors.size()), axis);
}

std::vector<Tensor> split(const Tensor& x, Index axis, std::span<const Index> lengths)
{
    const Index a = normalize_axis(axis, x.rank(), "split");
    const Index total = std::accumulate(lengths.begin(), lengths.end(), Index{0});
    if (total != x.shape()[a]) throw DimensionError("split: lengths do not sum to the axis extent");
    std::vector<Tensor> parts;
    Index start = 0;
    for (Index len : lengths) {
        parts.push_back(slice(x, a, start, len));
        start += len;
    }
    return parts;
}

Tensor broadcast_mul(const Tensor& a, const Tensor& gate)
{
    require_defined(a, "broadcast_mul");
    if (gate.rank() != 3 || gate.dim(2) != 1) {
        throw DimensionError("broadcast_mul: gate must be [C, P, 1], got " + to_string(gate.shape()));
    }
    if (a.rank() < 3 || a.dim(-3) != gate.dim(0) || a.dim(-2) != gate.dim(1)) {
        throw DimensionError("broadcast_mul: cannot broadcast " + to_string(gate.shape()) + " against " +
                             to_string(a.shape()));
    }
    const Index cp = gate.dim(0) * gate.dim(1);
    const Index d = a.dim(-1);
    const Index lead = a.size() / (cp * d);
    ArrayXd out(a.size());
    const ArrayXd& av = a.data();
    const ArrayXd& gv = gate.data();
    for (Index l = 0; l < lead; ++l) {
        for (Index i = 0; i < cp; ++i) {
            const Index base = (l * cp + i) * d;
            out.segment(base, d) = av.segment(base, d) * gv[i];
        }
    }
    auto ai = a.impl();
    auto gi = gate.impl();
    return record("broadcast_mul", a.shape(), std::move(out), {ai, gi}, [=](const ArrayXd& g) {
        if (ai->requires_grad) {
            ArrayXd ga(g.size());
            for (Index l = 0; l < lead; ++l) {
                for (Index i = 0; i < cp; ++i) {
                    const Index base = (l * cp + i) * d;
                    ga.segment(base, d) = g.segment(base, d) * gi->data[i];
                }
            }
            ai->accumulate(ga);
        }
        if (gi->requires_grad) {
            ArrayXd gg = ArrayXd::Zero(cp);
            for (Index l = 0; l < lead; ++l) {
                for (Index i = 0; i < cp; ++i) {
                    const Index base = (l * cp + i) * d;
                    gg[i] += (g.segment(base, d) * ai->data.segment(base, d)).sum();
                }
            }
            gi->accumulate(gg);
        }
    });
}

Tensor expand_last(const Tensor& x, Index count)
{
    require_defined(x, "expand_last");
    if (x.rank() < 1 || x.dim(-1) != 1) {
        throw DimensionError("expand_last: last axis must have extent 1, got " + to_string(x.shape()));
    }
    if (count < 1) throw ArgumentError("expand_last: count must be >= 1");
    const Index rows = x.size();
    ArrayXd out(rows * count);
    for (Index i = 0; i < rows; ++i) out.segment(i * count, count).setConstant(x.data()[i]);
    Shape shape = x.shape();
    shape.back() = count;
    auto xi = x.impl();
    return record("expand_last", std::move(shape), std::move(out), {xi}, [xi, rows, count](const ArrayXd& g) {
        Eigen::Map<const RowMatrix> gm(g.data(), rows, count);
        xi->accumulate(gm.rowwise().sum().array());
    });
}

// ---------------------------------------------------------------------------
// reductions and losses

Tensor sum(const Tensor& x)
{
    require_defined(x, "sum");
    auto xi = x.impl();
    const Index n = x.size();
    return record("sum", {}, ArrayXd::Constant(1, x.data().sum()), {xi},
                  [xi, n](const ArrayXd& g) { xi->accumulate(ArrayXd::Constant(n, g[0])); });
}

Tensor mean(const Tensor& x)
{
    require_defined(x, "mean");
    auto xi = x.impl();
    const Index n = x.size();
    return record("mean", {}, ArrayXd::Constant(1, x.data().mean()), {xi},
                  [xi, n](const ArrayXd& g) { xi->accumulate(ArrayXd::Constant(n, g[0] / static_cast<double>(n))); });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target)
{
    require_same_shape(pred, target, "mse_loss");
    ArrayXd diff = pred.data() - target.data();
    const double n = static_cast<double>(diff.size());
    const double value = diff.square().sum() / n;
    auto pi = pred.impl();
    auto ti = target.impl();
    return record("mse_loss", {}, ArrayXd::Constant(1, value), {pi, ti},
                  [pi, ti, diff = std::move(diff), n](const ArrayXd& g) {
                      const ArrayXd gp = diff * (2.0 * g[0] / n);
                      if (pi->requires_grad) pi->accumulate(gp);
                      if (ti->requires_grad) ti->accumulate(-gp);
                  });
}

} // namespace mppn
