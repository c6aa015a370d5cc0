#pragma once

#include <cstdint>
#include <vector>

namespace lcp {

// Dense multi-dimensional array of doubles, row-major, explicit shape.
// This is the carrier for every activation, weight and gradient in the
// project. There is no broadcasting and no autodiff: any shape mismatch is a
// ShapeError, and gradients are produced by the explicit backward passes in
// nn.hpp. All free-function ops are pure (inputs untouched, new tensor out).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const std::vector<int64_t>& shape);
    static Tensor from(std::vector<int64_t> shape, std::vector<double> values);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }

    // 2-D and 3-D indexed access (unchecked beyond debug builds).
    double operator()(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double& operator()(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double operator()(int64_t i, int64_t j, int64_t k) const {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double& operator()(int64_t i, int64_t j, int64_t k) {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

enum class ElementwiseOp { kAdd, kSub, kMul };

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Standard matrix product of two rank-2 tensors [m x k] * [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

} // namespace lcp
