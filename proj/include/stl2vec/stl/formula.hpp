#pragma once

// STL abstract syntax: bounded temporal operators over affine predicates.
//
// Formulas are immutable trees with shared subterms; copying a Formula copies
// a pointer. Every predicate in a tree has the same state dimension.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include "stl2vec/error.hpp"

namespace stl2vec::stl {

/// Discrete closed interval [a, b] of time steps.
struct Interval {
    std::size_t a = 0;
    std::size_t b = 0;

    Interval() = default;
    Interval(std::size_t lo, std::size_t hi) : a(lo), b(hi) {
        if (lo > hi) {
            throw InvalidArgument("interval with a > b: [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
        }
    }

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// h(x) = c . x + d; the predicate holds where h(x) > 0.
struct LinearPredicate {
    Eigen::RowVectorXd c;
    double d = 0.0;
    std::string label;

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(c.size()); }

    template <typename Derived>
    auto operator()(const Eigen::MatrixBase<Derived>& x) const {
        using Scalar = typename Derived::Scalar;
        return c.cast<Scalar>().dot(x.col(0)) + static_cast<Scalar>(d);
    }

    /// Structural equality; labels are display-only and ignored.
    friend bool operator==(const LinearPredicate& l, const LinearPredicate& r) {
        return l.d == r.d && l.c.size() == r.c.size() && l.c == r.c;
    }
};

struct FormulaNode;

class Formula {
public:
    /// The constant `true`.
    Formula();

    static Formula top();
    static Formula predicate(LinearPredicate p);
    static Formula negation(Formula f);
    static Formula conjunction(Formula lhs, Formula rhs);
    static Formula disjunction(Formula lhs, Formula rhs);
    static Formula eventually(Interval i, Formula f);
    static Formula always(Interval i, Formula f);
    static Formula until(Interval i, Formula lhs, Formula rhs);

    const FormulaNode& node() const noexcept { return *node_; }

    template <typename Visitor>
    decltype(auto) visit(Visitor&& visitor) const;

    /// Dimension shared by every predicate, or nullopt for predicate-free trees.
    std::optional<std::size_t> state_dimension() const noexcept;

    /// Number of operators on the longest root-to-leaf path (atoms have depth 0).
    std::size_t depth() const;

    /// Fully parenthesised text accepted by parse().
    std::string to_string() const;

    friend bool operator==(const Formula& l, const Formula& r);

private:
    explicit Formula(std::shared_ptr<const FormulaNode> node) : node_(std::move(node)) {}
    static Formula make(FormulaNode node);

    std::shared_ptr<const FormulaNode> node_;
};

namespace op {
struct True {};
struct Pred {
    LinearPredicate pred;
};
struct Not {
    Formula arg;
};
struct And {
    Formula lhs;
    Formula rhs;
};
struct Or {
    Formula lhs;
    Formula rhs;
};
struct Eventually {
    Interval interval;
    Formula arg;
};
struct Always {
    Interval interval;
    Formula arg;
};
struct Until {
    Interval interval;
    Formula lhs;
    Formula rhs;
};
}  // namespace op

struct FormulaNode {
    using Variant = std::variant<op::True, op::Pred, op::Not, op::And, op::Or, op::Eventually, op::Always, op::Until>;
    Variant v;
    std::optional<std::size_t> dim;
};

template <typename... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <typename... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<std::size_t> merge_dims(std::optional<std::size_t> a, std::optional<std::size_t> b) {
    if (a && b && *a != *b) {
        throw DimensionError("predicates of dimension " + std::to_string(*a) + " and " + std::to_string(*b) +
                             " combined in one formula");
    }
    return a ? a : b;
}

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_predicate(const LinearPredicate& p) {
    std::string out;
    bool first = true;
    for (Eigen::Index k = 0; k < p.c.size(); ++k) {
        const double coef = p.c(k);
        if (coef == 0.0) continue;
        const std::string var = "x" + std::to_string(k + 1);
        const double mag = std::abs(coef);
        if (first) {
            if (coef < 0) out += "-";
        } else {
            out += coef < 0 ? " - " : " + ";
        }
        out += (mag == 1.0 ? var : format_number(mag) + "*" + var);
        first = false;
    }
    if (first) {
        // constant predicate: keep a variable so the text stays a linear combination
        out += "0*x1";
    }
    if (p.d != 0.0) {
        out += p.d < 0 ? " - " : " + ";
        out += format_number(std::abs(p.d));
    }
    out += " > 0";
    return out;
}

inline std::string format_interval(const Interval& i) {
    return "[" + std::to_string(i.a) + "," + std::to_string(i.b) + "]";
}

}  // namespace detail

inline Formula Formula::make(FormulaNode node) { return Formula(std::make_shared<const FormulaNode>(std::move(node))); }

inline Formula::Formula() : node_(std::make_shared<const FormulaNode>(FormulaNode{op::True{}, std::nullopt})) {}

inline Formula Formula::top() { return Formula(); }

inline Formula Formula::predicate(LinearPredicate p) {
    if (p.c.size() == 0) throw DimensionError("predicate with no coefficients");
    const std::size_t dim = p.dimension();
    return make(FormulaNode{op::Pred{std::move(p)}, dim});
}

inline Formula Formula::negation(Formula f) {
    auto dim = f.node_->dim;
    return make(FormulaNode{op::Not{std::move(f)}, dim});
}

inline Formula Formula::conjunction(Formula lhs, Formula rhs) {
    auto dim = detail::merge_dims(lhs.node_->dim, rhs.node_->dim);
    return make(FormulaNode{op::And{std::move(lhs), std::move(rhs)}, dim});
}

inline Formula Formula::disjunction(Formula lhs, Formula rhs) {
    auto dim = detail::merge_dims(lhs.node_->dim, rhs.node_->dim);
    return make(FormulaNode{op::Or{std::move(lhs), std::move(rhs)}, dim});
}

inline Formula Formula::eventually(Interval i, Formula f) {
    auto dim = f.node_->dim;
    return make(FormulaNode{op::Eventually{i, std::move(f)}, dim});
}

inline Formula Formula::always(Interval i, Formula f) {
    auto dim = f.node_->dim;
    return make(FormulaNode{op::Always{i, std::move(f)}, dim});
}

inline Formula Formula::until(Interval i, Formula lhs, Formula rhs) {
    auto dim = detail::merge_dims(lhs.node_->dim, rhs.node_->dim);
    return make(FormulaNode{op::Until{i, std::move(lhs), std::move(rhs)}, dim});
}

template <typename Visitor>
decltype(auto) Formula::visit(Visitor&& visitor) const {
    return std::visit(std::forward<Visitor>(visitor), node_->v);
}

inline std::optional<std::size_t> Formula::state_dimension() const noexcept { return node_->dim; }

inline std::size_t Formula::depth() const {
    return visit(overloaded{
        [](const op::True&) -> std::size_t { return 0; },
        [](const op::Pred&) -> std::size_t { return 0; },
        [](const op::Not& n) -> std::size_t { return 1 + n.arg.depth(); },
        [](const op::And& n) -> std::size_t { return 1 + std::max(n.lhs.depth(), n.rhs.depth()); },
        [](const op::Or& n) -> std::size_t { return 1 + std::max(n.lhs.depth(), n.rhs.depth()); },
        [](const op::Eventually& n) -> std::size_t { return 1 + n.arg.depth(); },
        [](const op::Always& n) -> std::size_t { return 1 + n.arg.depth(); },
        [](const op::Until& n) -> std::size_t { return 1 + std::max(n.lhs.depth(), n.rhs.depth()); },
    });
}

inline std::string Formula::to_string() const {
    return visit(overloaded{
        [](const op::True&) -> std::string { return "true"; },
        [](const op::Pred& n) -> std::string { return detail::format_predicate(n.pred); },
        [](const op::Not& n) -> std::string { return "not (" + n.arg.to_string() + ")"; },
        [](const op::And& n) -> std::string { return "(" + n.lhs.to_string() + ") and (" + n.rhs.to_string() + ")"; },
        [](const op::Or& n) -> std::string { return "(" + n.lhs.to_string() + ") or (" + n.rhs.to_string() + ")"; },
        [](const op::Eventually& n) -> std::string {
            return "F" + detail::format_interval(n.interval) + " (" + n.arg.to_string() + ")";
        },
        [](const op::Always& n) -> std::string {
            return "G" + detail::format_interval(n.interval) + " (" + n.arg.to_string() + ")";
        },
        [](const op::Until& n) -> std::string {
            return "(" + n.lhs.to_string() + ") U" + detail::format_interval(n.interval) + " (" + n.rhs.to_string() +
                   ")";
        },
    });
}

inline bool operator==(const Formula& l, const Formula& r) {
    if (l.node_ == r.node_) return true;
    if (l.node_->v.index() != r.node_->v.index()) return false;
    return std::visit(
        [&](const auto& a) -> bool {
            using T = std::decay_t<decltype(a)>;
            const auto& b = std::get<T>(r.node_->v);
            if constexpr (std::is_same_v<T, op::True>) {
                return true;
            } else if constexpr (std::is_same_v<T, op::Pred>) {
                return a.pred == b.pred;
            } else if constexpr (std::is_same_v<T, op::Not>) {
                return a.arg == b.arg;
            } else if constexpr (std::is_same_v<T, op::And> || std::is_same_v<T, op::Or>) {
                return a.lhs == b.lhs && a.rhs == b.rhs;
            } else if constexpr (std::is_same_v<T, op::Eventually> || std::is_same_v<T, op::Always>) {
                return a.interval == b.interval && a.arg == b.arg;
            } else {
                return a.interval == b.interval && a.lhs == b.lhs && a.rhs == b.rhs;
            }
        },
        l.node_->v);
}

// ---------------------------------------------------------------------------

/// Minimal trajectory length (minus one) that determines robustness at t = 0.
inline std::size_t horizon(const Formula& f) {
    return f.visit(overloaded{
        [](const op::True&) -> std::size_t { return 0; },
        [](const op::Pred&) -> std::size_t { return 0; },
        [](const op::Not& n) { return horizon(n.arg); },
        [](const op::And& n) { return std::max(horizon(n.lhs), horizon(n.rhs)); },
        [](const op::Or& n) { return std::max(horizon(n.lhs), horizon(n.rhs)); },
        [](const op::Eventually& n) { return n.interval.b + horizon(n.arg); },
        [](const op::Always& n) { return n.interval.b + horizon(n.arg); },
        [](const op::Until& n) { return n.interval.b + std::max(horizon(n.lhs), horizon(n.rhs)); },
    });
}

/// Single-coordinate bound `x[k] >= bound` (lower) or `x[k] <= bound` (upper).
inline LinearPredicate axis_bound(std::size_t dim, std::size_t k, double bound, bool lower, std::string label = {}) {
    if (k >= dim) throw DimensionError("axis_bound: coordinate outside the state");
    LinearPredicate p;
    p.c = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dim));
    p.c(static_cast<Eigen::Index>(k)) = lower ? 1.0 : -1.0;
    p.d = lower ? -bound : bound;
    p.label = std::move(label);
    return p;
}

/// [xlo, xhi] x [ylo, yhi] over the first two state coordinates. Robustness at
/// a state is min(qx - xlo, xhi - qx, qy - ylo, yhi - qy).
inline Formula rect_region(double xlo, double xhi, double ylo, double yhi, std::size_t dim = 3) {
    if (!(xlo < xhi) || !(ylo < yhi)) throw InvalidArgument("rect_region: empty rectangle");
    if (dim < 2) throw DimensionError("rect_region needs a state of dimension >= 2");
    Formula f = Formula::conjunction(Formula::predicate(axis_bound(dim, 0, xlo, true)),
                                     Formula::predicate(axis_bound(dim, 0, xhi, false)));
    f = Formula::conjunction(f, Formula::predicate(axis_bound(dim, 1, ylo, true)));
    return Formula::conjunction(f, Formula::predicate(axis_bound(dim, 1, yhi, false)));
}

}  // namespace stl2vec::stl
