#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kgvqa::ad {

/// Dense row-major array of doubles. Rank-1 tensors are viewed as a single
/// row by the matrix operations.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor row(std::vector<double> values);

    std::size_t size() const { return values.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    void zero_grad();
};

std::size_t shape_numel(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

}  // namespace kgvqa::ad
