#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kgvqa/autodiff/param_store.hpp"
#include "kgvqa/autodiff/tensor.hpp"

namespace kgvqa::ad {

class Tape;

/// Handle to a matrix value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    std::size_t rows() const;
    std::size_t cols() const;
    std::span<const double> values() const;
    double operator()(std::size_t r, std::size_t c) const;
    /// Value of a 1x1 result.
    double item() const;
    Tensor tensor() const;
};

/// Records operations in execution order and replays them backwards.
/// A tape belongs to one thread for the duration of a forward/backward pass.
class Tape {
   public:
    struct Node {
        std::string_view op;
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::vector<double> value;
        const double* external = nullptr;
        std::vector<double> grad;
        bool requires_grad = false;
        std::optional<std::size_t> param_index;
        std::function<void(Tape&, std::uint32_t)> backward;

        const double* data() const { return external ? external : value.data(); }
        std::size_t size() const { return rows * cols; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(const Tensor& t);
    Var constant(std::size_t rows, std::size_t cols, std::vector<double> values);
    Var zeros(std::size_t rows, std::size_t cols);
    /// Free leaf with its own gradient slot.
    Var variable(const Tensor& t);
    /// Leaf aliasing a stored parameter. The store must outlive the tape.
    Var param(const ParamStore& store, std::size_t index);

    /// Reverse sweep from a 1x1 loss.
    void backward(Var loss);
    /// Adds scale * d(loss)/d(param) into each bound parameter's grad.
    void accumulate_grads(ParamStore& store, double scale = 1.0) const;
    /// Gradient of the last backward() w.r.t. v; zeros if v was unreachable.
    std::vector<double> grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    void clear();

    // Used by op implementations.
    const Node& node(std::uint32_t id) const { return nodes_[id]; }
    Node& node(std::uint32_t id) { return nodes_[id]; }
    std::vector<double>& grad_slot(std::uint32_t id);
    Var push(Node node);

   private:
    std::vector<Node> nodes_;
};

// Matrix product a(n x k) * b(k x m).
Var matmul(Var a, Var b);
// a(n x k) * b(m x k)^T.
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
// Adds a 1 x m row to every row of a.
Var add_row(Var a, Var row);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// s * a + shift, elementwise.
Var affine(Var a, double s, double shift);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var gather_rows(Var a, std::span<const std::uint32_t> index);
// Sums rows of a into num_segments output rows; empty segments are zero.
Var segment_sum(Var a, std::span<const std::uint32_t> segment, std::size_t num_segments);
// Multiplies each row of a(n x m) by weights(n x 1).
Var scale_rows(Var a, Var weights);
// Softmax over every element of a.
Var softmax(Var a);
// Softmax of scores(n x 1) normalized within each segment.
Var segment_softmax(Var scores, std::span<const std::uint32_t> segment, std::size_t num_segments);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
// Natural log with inputs below floor clamped (zero gradient there).
Var log(Var a, double floor = 1e-12);
// Column-wise mean over rows: 1 x m.
Var mean_rows(Var a);
Var sum(Var a);
// sum_i weights_i * rows_i: 1 x m.
Var weighted_sum(Var rows, Var weights);
Var dropout(Var a, double p, bool training, std::mt19937_64& rng);
// x W^T + b with W (out x in), b (1 x out) optional.
Var linear(Var x, Var weight, std::optional<Var> bias);

}  // namespace kgvqa::ad
