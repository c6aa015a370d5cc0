#include "lcp/tensor.hpp"

#include <string>

#include "lcp/errors.hpp"

namespace lcp {

namespace {

int64_t checked_numel(const std::vector<int64_t>& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
    int64_t n = 1;
    for (int64_t e : shape) {
        if (e < 1) throw ShapeError("tensor extent must be >= 1, got " + std::to_string(e));
        n *= e;
    }
    return n;
}

std::string shape_string(const std::vector<int64_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

} // namespace

Tensor Tensor::zeros(const std::vector<int64_t>& shape) {
    int64_t n = checked_numel(shape);
    Tensor t;
    t.shape_ = shape;
    t.data_.assign(static_cast<size_t>(n), 0.0);
    return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> values) {
    int64_t n = checked_numel(shape);
    if (n != static_cast<int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
    if (!a.same_shape(b)) {
        throw ShapeError("elementwise op on mismatched shapes " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
    Tensor out = a;
    double* o = out.data().data();
    const double* bp = b.data().data();
    const int64_t n = a.numel();
    switch (op) {
    case ElementwiseOp::kAdd:
        for (int64_t i = 0; i < n; ++i) o[i] += bp[i];
        break;
    case ElementwiseOp::kSub:
        for (int64_t i = 0; i < n; ++i) o[i] -= bp[i];
        break;
    case ElementwiseOp::kMul:
        for (int64_t i = 0; i < n; ++i) o[i] *= bp[i];
        break;
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::kMul); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul requires rank-2 tensors, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul inner extents differ: " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
    }
    Tensor out = Tensor::zeros({m, n});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* op = out.data().data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t l = 0; l < k; ++l) {
            const double av = ap[i * k + l];
            const double* brow = bp + l * n;
            double* orow = op + i * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

} // namespace lcp
