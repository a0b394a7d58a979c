#include "kgvqa/autodiff/tensor.hpp"

#include <sstream>

#include "kgvqa/error.hpp"

namespace kgvqa::ad {

std::size_t shape_numel(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> values_, bool requires_grad_)
    : shape(std::move(shape_)), values(std::move(values_)), requires_grad(requires_grad_) {
    if (shape.empty()) throw Error(ErrorCode::kShapeMismatch, "tensor: empty shape");
    for (auto d : shape) {
        if (d == 0) throw Error(ErrorCode::kShapeMismatch, "tensor: zero dimension in shape " + shape_string(shape));
    }
    if (values.size() != shape_numel(shape)) {
        throw Error(ErrorCode::kShapeMismatch, "tensor: " + std::to_string(values.size()) +
                                                   " values do not fill shape " + shape_string(shape));
    }
    if (requires_grad) grad.assign(values.size(), 0.0);
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
    auto n = values.size();
    return Tensor({1, n}, std::move(values));
}

std::size_t Tensor::rows() const {
    if (shape.size() == 1) return 1;
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
    return r;
}

std::size_t Tensor::cols() const { return shape.back(); }

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

}  // namespace kgvqa::ad
