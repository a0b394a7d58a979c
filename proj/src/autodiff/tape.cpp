#include "kgvqa/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "kgvqa/error.hpp"

namespace kgvqa::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<RowMatrix> view(double* p, std::size_t r, std::size_t c) {
    return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

Eigen::Map<const RowMatrix> cview(const double* p, std::size_t r, std::size_t c) {
    return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

std::string dims(std::size_t r, std::size_t c) { return "[" + std::to_string(r) + "x" + std::to_string(c) + "]"; }

[[noreturn]] void shape_error(std::string_view op, const Var& a, const Var& b) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": incompatible shapes " + dims(a.rows(), a.cols()) +
                                               " and " + dims(b.rows(), b.cols()));
}

void require_same_tape(const Var& a, const Var& b, std::string_view op) {
    if (a.tape != b.tape || a.tape == nullptr) {
        throw Error(ErrorCode::kInvalidArgument, std::string(op) + ": operands recorded on different tapes");
    }
}

void check_finite(std::string_view op, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) throw Error(ErrorCode::kNonFinite, std::string(op) + ": produced a non-finite value");
    }
}

Tape::Node make_node(std::string_view op, std::size_t rows, std::size_t cols, std::vector<double> value,
                     bool requires_grad) {
    check_finite(op, value);
    Tape::Node n;
    n.op = op;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return n;
}

// Unary elementwise op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Var unary(std::string_view op, Var a, Fwd fwd, Deriv deriv) {
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    std::vector<double> out(na.size());
    const double* x = na.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
    auto node = make_node(op, na.rows, na.cols, std::move(out), na.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, deriv](Tape& t, std::uint32_t self) {
            const auto& ns = t.node(self);
            auto& ga = t.grad_slot(ia);
            const double* x = t.node(ia).data();
            const double* y = ns.data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ns.grad[i] * deriv(x[i], y[i]);
        };
    }
    return t.push(std::move(node));
}

}  // namespace

// ---------------------------------------------------------------------------
// Var

std::size_t Var::rows() const { return tape->node(id).rows; }
std::size_t Var::cols() const { return tape->node(id).cols; }

std::span<const double> Var::values() const {
    const auto& n = tape->node(id);
    return {n.data(), n.size()};
}

double Var::operator()(std::size_t r, std::size_t c) const {
    const auto& n = tape->node(id);
    return n.data()[r * n.cols + c];
}

double Var::item() const {
    if (rows() != 1 || cols() != 1) {
        throw Error(ErrorCode::kShapeMismatch, "item: expected [1x1], got " + dims(rows(), cols()));
    }
    return values()[0];
}

Tensor Var::tensor() const {
    auto v = values();
    return Tensor::matrix(rows(), cols(), std::vector<double>(v.begin(), v.end()));
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Node node) {
    if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::kPrecondition, "tape: too many nodes");
    }
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(const Tensor& t) { return constant(t.rows(), t.cols(), t.values); }

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (rows == 0 || cols == 0 || values.size() != rows * cols) {
        throw Error(ErrorCode::kShapeMismatch,
                    "constant: " + std::to_string(values.size()) + " values for shape " + dims(rows, cols));
    }
    return push(make_node("constant", rows, cols, std::move(values), false));
}

Var Tape::zeros(std::size_t rows, std::size_t cols) {
    return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Var Tape::variable(const Tensor& t) {
    return push(make_node("variable", t.rows(), t.cols(), t.values, true));
}

Var Tape::param(const ParamStore& store, std::size_t index) {
    const Tensor& p = store[index];
    Node n;
    n.op = "param";
    n.rows = p.rows();
    n.cols = p.cols();
    n.external = p.values.data();
    n.requires_grad = true;
    n.param_index = index;
    return push(std::move(n));
}

std::vector<double>& Tape::grad_slot(std::uint32_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.size(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw Error(ErrorCode::kInvalidArgument, "backward: loss recorded on another tape");
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw Error(ErrorCode::kShapeMismatch, "backward: loss must be scalar, got " + dims(loss.rows(), loss.cols()));
    }
    for (auto& n : nodes_) n.grad.clear();
    grad_slot(loss.id)[0] = 1.0;
    for (std::int64_t i = loss.id; i >= 0; --i) {
        auto& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.empty() || !n.backward) continue;
        n.backward(*this, static_cast<std::uint32_t>(i));
    }
}

void Tape::accumulate_grads(ParamStore& store, double scale) const {
    for (const auto& n : nodes_) {
        if (!n.param_index || n.grad.empty()) continue;
        auto& g = store[*n.param_index].grad;
        if (g.size() != n.grad.size()) g.assign(n.grad.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * n.grad[i];
    }
}

std::vector<double> Tape::grad(Var v) const {
    const auto& n = nodes_[v.id];
    if (n.grad.empty()) return std::vector<double>(n.size(), 0.0);
    return n.grad;
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// Ops

Var matmul(Var a, Var b) {
    require_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    const auto& nb = t.node(b.id);
    if (na.cols != nb.rows) shape_error("matmul", a, b);
    const std::size_t n = na.rows, k = na.cols, m = nb.cols;
    std::vector<double> out(n * m);
    view(out.data(), n, m).noalias() = cview(na.data(), n, k) * cview(nb.data(), k, m);
    auto node = make_node("matmul", n, m, std::move(out), na.requires_grad || nb.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, ib = b.id, n, k, m](Tape& t, std::uint32_t self) {
            const auto G = cview(t.node(self).grad.data(), n, m);
            if (t.node(ia).requires_grad) {
                view(t.grad_slot(ia).data(), n, k).noalias() += G * cview(t.node(ib).data(), k, m).transpose();
            }
            if (t.node(ib).requires_grad) {
                view(t.grad_slot(ib).data(), k, m).noalias() += cview(t.node(ia).data(), n, k).transpose() * G;
            }
        };
    }
    return t.push(std::move(node));
}

Var matmul_nt(Var a, Var b) {
    require_same_tape(a, b, "matmul_nt");
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    const auto& nb = t.node(b.id);
    if (na.cols != nb.cols) shape_error("matmul_nt", a, b);
    const std::size_t n = na.rows, k = na.cols, m = nb.rows;
    std::vector<double> out(n * m);
    view(out.data(), n, m).noalias() = cview(na.data(), n, k) * cview(nb.data(), m, k).transpose();
    auto node = make_node("matmul_nt", n, m, std::move(out), na.requires_grad || nb.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, ib = b.id, n, k, m](Tape& t, std::uint32_t self) {
            const auto G = cview(t.node(self).grad.data(), n, m);
            if (t.node(ia).requires_grad) {
                view(t.grad_slot(ia).data(), n, k).noalias() += G * cview(t.node(ib).data(), m, k);
            }
            if (t.node(ib).requires_grad) {
                view(t.grad_slot(ib).data(), m, k).noalias() += G.transpose() * cview(t.node(ia).data(), n, k);
            }
        };
    }
    return t.push(std::move(node));
}

namespace {

template <typename Fwd, typename DA, typename DB>
Var binary_same_shape(std::string_view op, Var a, Var b, Fwd fwd, DA da, DB db) {
    require_same_tape(a, b, op);
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    const auto& nb = t.node(b.id);
    if (na.rows != nb.rows || na.cols != nb.cols) shape_error(op, a, b);
    std::vector<double> out(na.size());
    const double* x = na.data();
    const double* y = nb.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i], y[i]);
    auto node = make_node(op, na.rows, na.cols, std::move(out), na.requires_grad || nb.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, ib = b.id, da, db](Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            const double* x = t.node(ia).data();
            const double* y = t.node(ib).data();
            if (t.node(ia).requires_grad) {
                auto& ga = t.grad_slot(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[i]);
            }
            if (t.node(ib).requires_grad) {
                auto& gb = t.grad_slot(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(x[i], y[i]);
            }
        };
    }
    return t.push(std::move(node));
}

}  // namespace

Var add(Var a, Var b) {
    return binary_same_shape(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary_same_shape(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary_same_shape(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var add_row(Var a, Var row) {
    require_same_tape(a, row, "add_row");
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    const auto& nr = t.node(row.id);
    if (nr.rows != 1 || nr.cols != na.cols) shape_error("add_row", a, row);
    const std::size_t n = na.rows, m = na.cols;
    std::vector<double> out(na.data(), na.data() + n * m);
    const double* r = nr.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += r[j];
    auto node = make_node("add_row", n, m, std::move(out), na.requires_grad || nr.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, ir = row.id, n, m](Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            if (t.node(ia).requires_grad) {
                auto& ga = t.grad_slot(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (t.node(ir).requires_grad) {
                auto& gr = t.grad_slot(ir);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gr[j] += g[i * m + j];
            }
        };
    }
    return t.push(std::move(node));
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double s, double shift) {
    return unary(
        "affine", a, [s, shift](double x) { return s * x + shift; }, [s](double, double) { return s; });
}

Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat_cols: no operands");
    Tape& t = *parts[0].tape;
    const std::size_t n = parts[0].rows();
    std::size_t m = 0;
    bool rg = false;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        require_same_tape(parts[0], p, "concat_cols");
        if (p.rows() != n) shape_error("concat_cols", parts[0], p);
        ids.push_back(p.id);
        offsets.push_back(m);
        m += p.cols();
        rg = rg || t.node(p.id).requires_grad;
    }
    std::vector<double> out(n * m);
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto& np = t.node(ids[k]);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(np.data() + i * np.cols, np.cols, out.data() + i * m + offsets[k]);
    }
    auto node = make_node("concat_cols", n, m, std::move(out), rg);
    if (rg) {
        node.backward = [ids, offsets, n, m](Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                if (!t.node(ids[k]).requires_grad) continue;
                const std::size_t c = t.node(ids[k]).cols;
                auto& gp = t.grad_slot(ids[k]);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * m + offsets[k] + j];
            }
        };
    }
    return t.push(std::move(node));
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    if (count == 0 || begin + count > na.cols) {
        throw Error(ErrorCode::kShapeMismatch, "slice_cols: columns [" + std::to_string(begin) + ", " +
                                                   std::to_string(begin + count) + ") out of range for " +
                                                   dims(na.rows, na.cols));
    }
    const std::size_t n = na.rows, m = na.cols;
    std::vector<double> out(n * count);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(na.data() + i * m + begin, count, out.data() + i * count);
    auto node = make_node("slice_cols", n, count, std::move(out), na.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, begin, count, n, m](Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            auto& ga = t.grad_slot(ia);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < count; ++j) ga[i * m + begin + j] += g[i * count + j];
        };
    }
    return t.push(std::move(node));
}

Var gather_rows(Var a, std::span<const std::uint32_t> index) {
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    if (index.empty()) throw Error(ErrorCode::kShapeMismatch, "gather_rows: empty index");
    const std::size_t m = na.cols;
    std::vector<double> out(index.size() * m);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= na.rows) {
            throw Error(ErrorCode::kShapeMismatch, "gather_rows: row " + std::to_string(index[i]) +
                                                       " out of range for " + dims(na.rows, na.cols));
        }
        std::copy_n(na.data() + index[i] * m, m, out.data() + i * m);
    }
    auto node = make_node("gather_rows", index.size(), m, std::move(out), na.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, idx = std::vector<std::uint32_t>(index.begin(), index.end()), m](
                            Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            auto& ga = t.grad_slot(ia);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < m; ++j) ga[idx[i] * m + j] += g[i * m + j];
        };
    }
    return t.push(std::move(node));
}

Var segment_sum(Var a, std::span<const std::uint32_t> segment, std::size_t num_segments) {
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    if (segment.size() != na.rows || num_segments == 0) {
        throw Error(ErrorCode::kShapeMismatch, "segment_sum: " + std::to_string(segment.size()) +
                                                   " segment ids for " + dims(na.rows, na.cols));
    }
    const std::size_t m = na.cols;
    std::vector<double> out(num_segments * m, 0.0);
    for (std::size_t i = 0; i < segment.size(); ++i) {
        if (segment[i] >= num_segments) throw Error(ErrorCode::kShapeMismatch, "segment_sum: segment id out of range");
        for (std::size_t j = 0; j < m; ++j) out[segment[i] * m + j] += na.data()[i * m + j];
    }
    auto node = make_node("segment_sum", num_segments, m, std::move(out), na.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, seg = std::vector<std::uint32_t>(segment.begin(), segment.end()), m](
                            Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            auto& ga = t.grad_slot(ia);
            for (std::size_t i = 0; i < seg.size(); ++i)
                for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[seg[i] * m + j];
        };
    }
    return t.push(std::move(node));
}

Var scale_rows(Var a, Var weights) {
    require_same_tape(a, weights, "scale_rows");
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    const auto& nw = t.node(weights.id);
    if (nw.cols != 1 || nw.rows != na.rows) shape_error("scale_rows", a, weights);
    const std::size_t n = na.rows, m = na.cols;
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = na.data()[i * m + j] * nw.data()[i];
    auto node = make_node("scale_rows", n, m, std::move(out), na.requires_grad || nw.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, iw = weights.id, n, m](Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            const double* A = t.node(ia).data();
            const double* W = t.node(iw).data();
            if (t.node(ia).requires_grad) {
                auto& ga = t.grad_slot(ia);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[i * m + j] * W[i];
            }
            if (t.node(iw).requires_grad) {
                auto& gw = t.grad_slot(iw);
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * A[i * m + j];
                    gw[i] += s;
                }
            }
        };
    }
    return t.push(std::move(node));
}

Var segment_softmax(Var scores, std::span<const std::uint32_t> segment, std::size_t num_segments) {
    Tape& t = *scores.tape;
    const auto& ns = t.node(scores.id);
    if (ns.size() == 0) throw Error(ErrorCode::kInvalidArgument, "softmax: empty index set");
    if (ns.cols != 1 || segment.size() != ns.rows) {
        throw Error(ErrorCode::kShapeMismatch, "segment_softmax: expected scores [nx1] with n segment ids, got " +
                                                   dims(ns.rows, ns.cols) + " and " +
                                                   std::to_string(segment.size()) + " ids");
    }
    const std::size_t n = ns.rows;
    const double* x = ns.data();
    std::vector<double> mx(num_segments, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        if (segment[i] >= num_segments) throw Error(ErrorCode::kShapeMismatch, "segment_softmax: segment id out of range");
        mx[segment[i]] = std::max(mx[segment[i]], x[i]);
    }
    std::vector<double> out(n);
    std::vector<double> denom(num_segments, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(x[i] - mx[segment[i]]);
        denom[segment[i]] += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= denom[segment[i]];
    auto node = make_node("segment_softmax", n, 1, std::move(out), ns.requires_grad);
    if (node.requires_grad) {
        node.backward = [is = scores.id, seg = std::vector<std::uint32_t>(segment.begin(), segment.end()),
                         num_segments](Tape& t, std::uint32_t self) {
            const auto& nself = t.node(self);
            const auto& g = nself.grad;
            const double* y = nself.data();
            std::vector<double> dot(num_segments, 0.0);
            for (std::size_t i = 0; i < seg.size(); ++i) dot[seg[i]] += g[i] * y[i];
            auto& gs = t.grad_slot(is);
            for (std::size_t i = 0; i < seg.size(); ++i) gs[i] += y[i] * (g[i] - dot[seg[i]]);
        };
    }
    return t.push(std::move(node));
}

Var softmax(Var a) {
    const std::size_t n = a.rows() * a.cols();
    // Flatten to a column; every element shares one segment.
    Var flat = a;
    if (a.cols() != 1) {
        Tape& t = *a.tape;
        const auto& na = t.node(a.id);
        auto node = make_node("reshape", n, 1, std::vector<double>(na.data(), na.data() + n), na.requires_grad);
        if (node.requires_grad) {
            node.backward = [ia = a.id](Tape& t, std::uint32_t self) {
                const auto& g = t.node(self).grad;
                auto& ga = t.grad_slot(ia);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            };
        }
        flat = t.push(std::move(node));
    }
    std::vector<std::uint32_t> seg(n, 0);
    return segment_softmax(flat, seg, 1);
}

Var tanh(Var a) {
    return unary(
        "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a, double floor) {
    return unary(
        "log", a, [floor](double x) { return std::log(std::max(x, floor)); },
        [floor](double x, double) { return x < floor ? 0.0 : 1.0 / x; });
}

Var mean_rows(Var a) {
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    const std::size_t n = na.rows, m = na.cols;
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j] += na.data()[i * m + j];
    for (auto& v : out) v /= static_cast<double>(n);
    auto node = make_node("mean_rows", 1, m, std::move(out), na.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id, n, m](Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            auto& ga = t.grad_slot(ia);
            const double inv = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[j] * inv;
        };
    }
    return t.push(std::move(node));
}

Var sum(Var a) {
    Tape& t = *a.tape;
    const auto& na = t.node(a.id);
    double s = 0.0;
    for (std::size_t i = 0; i < na.size(); ++i) s += na.data()[i];
    auto node = make_node("sum", 1, 1, {s}, na.requires_grad);
    if (node.requires_grad) {
        node.backward = [ia = a.id](Tape& t, std::uint32_t self) {
            const double g = t.node(self).grad[0];
            auto& ga = t.grad_slot(ia);
            for (auto& v : ga) v += g;
        };
    }
    return t.push(std::move(node));
}

Var weighted_sum(Var rows, Var weights) {
    std::vector<std::uint32_t> seg(rows.rows(), 0);
    return segment_sum(scale_rows(rows, weights), seg, 1);
}

Var dropout(Var a, double p, bool training, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0) throw Error(ErrorCode::kInvalidArgument, "dropout: p must lie in [0, 1)");
    if (!training || p == 0.0) return a;
    Tape& t = *a.tape;
    const std::size_t n = a.rows() * a.cols();
    std::vector<double> mask(n);
    std::bernoulli_distribution keep(1.0 - p);
    const double s = 1.0 / (1.0 - p);
    for (auto& v : mask) v = keep(rng) ? s : 0.0;
    return mul(a, t.constant(a.rows(), a.cols(), std::move(mask)));
}

Var linear(Var x, Var weight, std::optional<Var> bias) {
    Var y = matmul_nt(x, weight);
    if (bias) y = add_row(y, *bias);
    return y;
}

}  // namespace kgvqa::ad
