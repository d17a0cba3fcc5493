#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape owns every node created while building an expression; nodes are
// appended in evaluation order, so the tape itself is a topological order and
// backward() is a single reverse sweep. Values are Eigen matrices; scalars are
// 1x1 matrices. A Tape is single-threaded; separate tapes share nothing.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stl2vec/ad/smooth.hpp"
#include "stl2vec/error.hpp"

namespace stl2vec::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;
};

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    MatMul,
    Neg,
    Scale,
    Shift,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Sin,
    Cos,
    Element,
    Segment,
    Stack,
    Concat,
    Affine,
    Sum,
    HardMax,
    HardMin,
    SmoothMax,
    SmoothMin,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::MatMul: return "matmul";
        case Op::Neg: return "neg";
        case Op::Scale: return "scale";
        case Op::Shift: return "shift";
        case Op::Tanh: return "tanh";
        case Op::Sigmoid: return "sigmoid";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Element: return "element";
        case Op::Segment: return "segment";
        case Op::Stack: return "stack";
        case Op::Concat: return "concat";
        case Op::Affine: return "affine";
        case Op::Sum: return "sum";
        case Op::HardMax: return "hard_max";
        case Op::HardMin: return "hard_min";
        case Op::SmoothMax: return "smooth_max";
        case Op::SmoothMin: return "smooth_min";
    }
    return "?";
}

struct Node {
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    Matrix value;
    Op op = Op::Leaf;
    bool requires_grad = false;
    std::uint32_t lhs = kNone;
    std::uint32_t rhs = kNone;
    std::vector<std::uint32_t> args;  // n-ary parents
    double scalar = 0.0;              // scale factor, shift, affine offset, beta
    Eigen::Index index = 0;           // element index, segment start, extremum winner
    Matrix aux;                       // affine coefficients, smooth extremum weights
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// Leaf that receives a gradient.
    Var variable(Matrix value) { return leaf(std::move(value), true); }
    Var variable(double value) { return leaf(Matrix::Constant(1, 1, value), true); }

    /// Leaf excluded from differentiation.
    Var constant(Matrix value) { return leaf(std::move(value), false); }
    Var constant(double value) { return leaf(Matrix::Constant(1, 1, value), false); }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    double scalar(Var v) const {
        const Matrix& m = value(v);
        if (m.size() != 1) throw DimensionError("scalar() on a non-scalar node");
        return m(0, 0);
    }

    /// Gradient of the last backward() output w.r.t. v; zeros if v was unreachable.
    Matrix grad(Var v) const {
        const Node& n = nodes_.at(v.id);
        if (v.id < grads_.size() && grads_[v.id].size() != 0) return grads_[v.id];
        return Matrix::Zero(n.value.rows(), n.value.cols());
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(Var v) const { return nodes_.at(v.id); }

    /// Smallest winner/runner-up margin over every hard extremum node built so
    /// far; +inf when there are none. Finite-difference checks near 0 are
    /// meaningless because the expression has a kink there.
    double min_extremum_gap() const noexcept { return min_gap_; }

    Var push(Node node) {
        if (!node.value.allFinite()) {
            throw NumericalError(std::string("non-finite value produced by ") + op_name(node.op));
        }
        nodes_.push_back(std::move(node));
        return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

    void note_gap(double gap) {
        if (gap < min_gap_) min_gap_ = gap;
    }

    /// Fills gradients of `output` (must be 1x1) w.r.t. every node.
    void backward(Var output);

private:
    Var leaf(Matrix value, bool needs_grad) {
        Node n;
        n.value = std::move(value);
        n.op = Op::Leaf;
        n.requires_grad = needs_grad;
        return push(std::move(n));
    }

    template <typename Expr>
    void accumulate(std::uint32_t id, const Expr& g) {
        if (id == Node::kNone || !nodes_[id].requires_grad) return;
        Matrix& slot = grads_[id];
        if (slot.size() == 0) {
            slot = g;
        } else {
            slot += g;
        }
    }

    void accumulate_at(std::uint32_t id, Eigen::Index row, Eigen::Index col, double g) {
        if (id == Node::kNone || !nodes_[id].requires_grad) return;
        Matrix& slot = grads_[id];
        if (slot.size() == 0) slot = Matrix::Zero(nodes_[id].value.rows(), nodes_[id].value.cols());
        slot(row, col) += g;
    }

    std::vector<Node> nodes_;
    std::vector<Matrix> grads_;
    double min_gap_ = std::numeric_limits<double>::infinity();
};

namespace detail {

inline Tape& tape_of(Var v) {
    if (v.tape == nullptr) throw InvalidArgument("Var is not attached to a tape");
    return *v.tape;
}

inline Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw InvalidArgument("operands live on different tapes");
    return tape_of(a);
}

inline Node unary(Var x, Op op, Matrix value) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.lhs = x.id;
    n.requires_grad = x.tape->requires_grad(x.id);
    return n;
}

inline Node binary(Var a, Var b, Op op, Matrix value) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.lhs = a.id;
    n.rhs = b.id;
    n.requires_grad = a.tape->requires_grad(a.id) || a.tape->requires_grad(b.id);
    return n;
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ")");
    }
}

inline std::vector<double> scalar_values(std::span<const Var> args, const char* what) {
    if (args.empty()) throw InvalidArgument(std::string(what) + " of an empty argument list");
    Tape& t = tape_of(args[0]);
    std::vector<double> values;
    values.reserve(args.size());
    for (Var a : args) {
        if (a.tape != &t) throw InvalidArgument("operands live on different tapes");
        const Matrix& m = t.value(a);
        if (m.size() != 1) throw DimensionError(std::string(what) + " expects scalar arguments");
        values.push_back(m(0, 0));
    }
    return values;
}

inline Node nary(std::span<const Var> args, Op op) {
    Node n;
    n.op = op;
    n.args.reserve(args.size());
    for (Var a : args) {
        n.args.push_back(a.id);
        n.requires_grad = n.requires_grad || a.tape->requires_grad(a.id);
    }
    return n;
}

inline Node extremum(std::span<const Var> args, bool is_max) {
    const std::vector<double> values = scalar_values(args, is_max ? "hard_max" : "hard_min");
    Node n = nary(args, is_max ? Op::HardMax : Op::HardMin);
    // first extremal index wins ties
    Eigen::Index best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (is_max ? values[i] > values[best] : values[i] < values[best]) best = static_cast<Eigen::Index>(i);
    }
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (static_cast<Eigen::Index>(i) == best) continue;
        gap = std::min(gap, std::abs(values[best] - values[i]));
    }
    args[0].tape->note_gap(gap);
    n.index = best;
    n.value = Matrix::Constant(1, 1, values[best]);
    return n;
}

inline Node smooth_extremum(std::span<const Var> args, double beta, bool is_max) {
    const char* what = is_max ? "smooth_max" : "smooth_min";
    const std::vector<double> values = scalar_values(args, what);
    if (!(beta > 0.0)) throw InvalidArgument(std::string(what) + " requires beta > 0");
    Node n = nary(args, is_max ? Op::SmoothMax : Op::SmoothMin);
    n.scalar = beta;
    const std::span<const double> view(values);
    const double v = is_max ? smooth_max_value(view, beta) : smooth_min_value(view, beta);
    n.value = Matrix::Constant(1, 1, v);
    // d/da_i = softmax weights (of beta*a for max, -beta*a for min)
    n.aux.resize(static_cast<Eigen::Index>(values.size()), 1);
    const double pivot = is_max ? *std::max_element(values.begin(), values.end())
                                : *std::min_element(values.begin(), values.end());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = std::exp((is_max ? beta : -beta) * (values[i] - pivot));
        n.aux(static_cast<Eigen::Index>(i), 0) = w;
        total += w;
    }
    n.aux /= total;
    return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var operator+(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require_same_shape(t.value(a), t.value(b), "add");
    return t.push(detail::binary(a, b, Op::Add, t.value(a) + t.value(b)));
}

inline Var operator-(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require_same_shape(t.value(a), t.value(b), "sub");
    return t.push(detail::binary(a, b, Op::Sub, t.value(a) - t.value(b)));
}

/// Elementwise (Hadamard) product.
inline Var operator*(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require_same_shape(t.value(a), t.value(b), "mul");
    return t.push(detail::binary(a, b, Op::Mul, t.value(a).cwiseProduct(t.value(b))));
}

inline Var operator-(Var x) {
    Tape& t = detail::tape_of(x);
    return t.push(detail::unary(x, Op::Neg, -t.value(x)));
}

inline Var operator*(double k, Var x) {
    Tape& t = detail::tape_of(x);
    Node n = detail::unary(x, Op::Scale, k * t.value(x));
    n.scalar = k;
    return t.push(std::move(n));
}

inline Var operator*(Var x, double k) { return k * x; }

inline Var operator+(Var x, double k) {
    Tape& t = detail::tape_of(x);
    Node n = detail::unary(x, Op::Shift, t.value(x).array() + k);
    n.scalar = k;
    return t.push(std::move(n));
}

inline Var operator+(double k, Var x) { return x + k; }
inline Var operator-(Var x, double k) { return x + (-k); }
inline Var operator-(double k, Var x) { return (-x) + k; }

inline Var matmul(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    if (t.value(a).cols() != t.value(b).rows()) throw DimensionError("matmul: inner dimensions disagree");
    return t.push(detail::binary(a, b, Op::MatMul, t.value(a) * t.value(b)));
}

// ---------------------------------------------------------------------------
// Nonlinearities

inline Var tanh(Var x) {
    Tape& t = detail::tape_of(x);
    return t.push(detail::unary(x, Op::Tanh, t.value(x).array().tanh().matrix()));
}

inline Var sigmoid(Var x) {
    Tape& t = detail::tape_of(x);
    Matrix v = (1.0 / (1.0 + (-t.value(x).array()).exp())).matrix();
    return t.push(detail::unary(x, Op::Sigmoid, std::move(v)));
}

inline Var exp(Var x) {
    Tape& t = detail::tape_of(x);
    return t.push(detail::unary(x, Op::Exp, t.value(x).array().exp().matrix()));
}

inline Var log(Var x) {
    Tape& t = detail::tape_of(x);
    return t.push(detail::unary(x, Op::Log, t.value(x).array().log().matrix()));
}

inline Var sin(Var x) {
    Tape& t = detail::tape_of(x);
    return t.push(detail::unary(x, Op::Sin, t.value(x).array().sin().matrix()));
}

inline Var cos(Var x) {
    Tape& t = detail::tape_of(x);
    return t.push(detail::unary(x, Op::Cos, t.value(x).array().cos().matrix()));
}

// ---------------------------------------------------------------------------
// Shape manipulation

/// Scalar entry `i` of a column vector (or flat column-major index of a matrix).
inline Var element(Var x, Eigen::Index i) {
    Tape& t = detail::tape_of(x);
    const Matrix& v = t.value(x);
    if (i < 0 || i >= v.size()) throw DimensionError("element: index out of range");
    Node n = detail::unary(x, Op::Element, Matrix::Constant(1, 1, v.reshaped()(i)));
    n.index = i;
    return t.push(std::move(n));
}

/// Rows [start, start + length) of a column vector.
inline Var segment(Var x, Eigen::Index start, Eigen::Index length) {
    Tape& t = detail::tape_of(x);
    const Matrix& v = t.value(x);
    if (v.cols() != 1 || start < 0 || length < 0 || start + length > v.rows()) {
        throw DimensionError("segment: range outside the column vector");
    }
    Node n = detail::unary(x, Op::Segment, v.middleRows(start, length));
    n.index = start;
    return t.push(std::move(n));
}

/// Column vector made of scalar nodes.
inline Var stack(std::span<const Var> scalars) {
    const std::vector<double> values = detail::scalar_values(scalars, "stack");
    Node n = detail::nary(scalars, Op::Stack);
    n.value = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    return scalars[0].tape->push(std::move(n));
}

inline Var stack(std::initializer_list<Var> scalars) {
    return stack(std::span<const Var>(scalars.begin(), scalars.size()));
}

/// Vertical concatenation of column vectors.
inline Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw InvalidArgument("concat of an empty list");
    Tape& t = detail::tape_of(parts[0]);
    Eigen::Index rows = 0;
    for (Var p : parts) {
        if (p.tape != &t) throw InvalidArgument("operands live on different tapes");
        if (t.value(p).cols() != 1) throw DimensionError("concat expects column vectors");
        rows += t.value(p).rows();
    }
    Node n = detail::nary(parts, Op::Concat);
    n.value.resize(rows, 1);
    Eigen::Index at = 0;
    for (Var p : parts) {
        const Matrix& v = t.value(p);
        n.value.middleRows(at, v.rows()) = v;
        at += v.rows();
    }
    return t.push(std::move(n));
}

inline Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
}

/// c . x + d for a column vector x.
inline Var affine(Var x, const RowVector& c, double d) {
    Tape& t = detail::tape_of(x);
    const Matrix& v = t.value(x);
    if (v.cols() != 1 || v.rows() != c.size()) throw DimensionError("affine: coefficient length mismatch");
    Node n = detail::unary(x, Op::Affine, Matrix::Constant(1, 1, c.dot(v.col(0)) + d));
    n.aux = c;
    n.scalar = d;
    return t.push(std::move(n));
}

/// Sum of all entries.
inline Var sum(Var x) {
    Tape& t = detail::tape_of(x);
    return t.push(detail::unary(x, Op::Sum, Matrix::Constant(1, 1, t.value(x).sum())));
}

/// Sum of scalar nodes, accumulated left to right.
inline Var add_all(std::span<const Var> scalars) {
    if (scalars.empty()) throw InvalidArgument("add_all of an empty list");
    return sum(stack(scalars));
}

// ---------------------------------------------------------------------------
// Extrema

/// Exact max; the full gradient goes to the first maximising argument.
inline Var hard_max(std::span<const Var> args) {
    Node n = detail::extremum(args, true);
    return args[0].tape->push(std::move(n));
}

/// Exact min; the full gradient goes to the first minimising argument.
inline Var hard_min(std::span<const Var> args) {
    Node n = detail::extremum(args, false);
    return args[0].tape->push(std::move(n));
}

/// (1/beta) ln sum exp(beta a_i).
inline Var smooth_max(std::span<const Var> args, double beta) {
    Node n = detail::smooth_extremum(args, beta, true);
    return args[0].tape->push(std::move(n));
}

/// -(1/beta) ln sum exp(-beta a_i).
inline Var smooth_min(std::span<const Var> args, double beta) {
    Node n = detail::smooth_extremum(args, beta, false);
    return args[0].tape->push(std::move(n));
}

inline Var hard_max(std::initializer_list<Var> args) { return hard_max(std::span<const Var>(args.begin(), args.size())); }
inline Var hard_min(std::initializer_list<Var> args) { return hard_min(std::span<const Var>(args.begin(), args.size())); }
inline Var smooth_max(std::initializer_list<Var> args, double beta) {
    return smooth_max(std::span<const Var>(args.begin(), args.size()), beta);
}
inline Var smooth_min(std::initializer_list<Var> args, double beta) {
    return smooth_min(std::span<const Var>(args.begin(), args.size()), beta);
}

// ---------------------------------------------------------------------------

inline void Tape::backward(Var output) {
    if (output.tape != this) throw InvalidArgument("backward: output belongs to another tape");
    const Matrix& out = nodes_.at(output.id).value;
    if (out.size() != 1) throw DimensionError("backward: output must be a scalar");

    grads_.assign(nodes_.size(), Matrix());
    if (!nodes_[output.id].requires_grad) return;
    grads_[output.id] = Matrix::Ones(1, 1);

    for (std::int64_t i = output.id; i >= 0; --i) {
        const auto id = static_cast<std::uint32_t>(i);
        const Node& n = nodes_[id];
        if (!n.requires_grad || grads_[id].size() == 0 || n.op == Op::Leaf) continue;
        const Matrix g = grads_[id];
        if (!g.allFinite()) throw NumericalError(std::string("non-finite gradient at ") + op_name(n.op));

        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add:
                accumulate(n.lhs, g);
                accumulate(n.rhs, g);
                break;
            case Op::Sub:
                accumulate(n.lhs, g);
                accumulate(n.rhs, -g);
                break;
            case Op::Mul:
                accumulate(n.lhs, g.cwiseProduct(nodes_[n.rhs].value));
                accumulate(n.rhs, g.cwiseProduct(nodes_[n.lhs].value));
                break;
            case Op::MatMul:
                accumulate(n.lhs, g * nodes_[n.rhs].value.transpose());
                accumulate(n.rhs, nodes_[n.lhs].value.transpose() * g);
                break;
            case Op::Neg:
                accumulate(n.lhs, -g);
                break;
            case Op::Scale:
                accumulate(n.lhs, n.scalar * g);
                break;
            case Op::Shift:
                accumulate(n.lhs, g);
                break;
            case Op::Tanh:
                accumulate(n.lhs, g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
                break;
            case Op::Sigmoid:
                accumulate(n.lhs, g.cwiseProduct((n.value.array() * (1.0 - n.value.array())).matrix()));
                break;
            case Op::Exp:
                accumulate(n.lhs, g.cwiseProduct(n.value));
                break;
            case Op::Log:
                accumulate(n.lhs, g.cwiseQuotient(nodes_[n.lhs].value));
                break;
            case Op::Sin:
                accumulate(n.lhs, g.cwiseProduct(nodes_[n.lhs].value.array().cos().matrix()));
                break;
            case Op::Cos:
                accumulate(n.lhs, g.cwiseProduct((-nodes_[n.lhs].value.array().sin()).matrix()));
                break;
            case Op::Element: {
                const Matrix& src = nodes_[n.lhs].value;
                const Eigen::Index rows = src.rows();
                accumulate_at(n.lhs, n.index % rows, n.index / rows, g(0, 0));
                break;
            }
            case Op::Segment: {
                if (!nodes_[n.lhs].requires_grad) break;
                Matrix& slot = grads_[n.lhs];
                if (slot.size() == 0) slot = Matrix::Zero(nodes_[n.lhs].value.rows(), 1);
                slot.middleRows(n.index, g.rows()) += g;
                break;
            }
            case Op::Stack:
                for (std::size_t k = 0; k < n.args.size(); ++k) {
                    accumulate_at(n.args[k], 0, 0, g(static_cast<Eigen::Index>(k), 0));
                }
                break;
            case Op::Concat: {
                Eigen::Index at = 0;
                for (std::uint32_t a : n.args) {
                    const Eigen::Index rows = nodes_[a].value.rows();
                    accumulate(a, g.middleRows(at, rows));
                    at += rows;
                }
                break;
            }
            case Op::Affine:
                accumulate(n.lhs, g(0, 0) * n.aux.transpose());
                break;
            case Op::Sum: {
                const Matrix& src = nodes_[n.lhs].value;
                accumulate(n.lhs, Matrix::Constant(src.rows(), src.cols(), g(0, 0)));
                break;
            }
            case Op::HardMax:
            case Op::HardMin:
                accumulate_at(n.args[static_cast<std::size_t>(n.index)], 0, 0, g(0, 0));
                break;
            case Op::SmoothMax:
            case Op::SmoothMin:
                for (std::size_t k = 0; k < n.args.size(); ++k) {
                    accumulate_at(n.args[k], 0, 0, g(0, 0) * n.aux(static_cast<Eigen::Index>(k), 0));
                }
                break;
        }
    }
}

}  // namespace stl2vec::ad
