#pragma once

// Quantitative (robustness) and qualitative semantics over discrete-time
// trajectories.
//
// The evaluator is written once against an "algebra" that supplies the
// predicate, negation and n-ary extremum operations. Instantiations:
//   ExactAlgebra          plain doubles, exact min/max
//   SmoothAlgebra<T>      log-sum-exp min/max in scalar type T (no tape)
//   TapeAlgebra           nodes on an ad::Tape, hard or smooth extrema
//
// A signal for subformula g is the vector rho^g(x, t) for t = 0 .. T - horizon(g).

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stl2vec/ad/smooth.hpp"
#include "stl2vec/ad/tape.hpp"
#include "stl2vec/error.hpp"
#include "stl2vec/stl/formula.hpp"

namespace stl2vec::stl {

/// Robustness assigned to `true`. Finite so it survives log-sum-exp and the
/// non-finite checks on the tape; negation gives the matching `false` value.
inline constexpr double kTrueRobustness = 1e9;

using State = Eigen::VectorXd;
using Trajectory = std::vector<State>;

struct ExactAlgebra {
    using value_type = double;

    value_type top() const { return kTrueRobustness; }
    value_type predicate(const LinearPredicate& p, const State& x) const { return p(x); }
    value_type negate(value_type v) const { return -v; }
    value_type maximum(std::span<const value_type> v) const {
        double m = v[0];
        for (std::size_t i = 1; i < v.size(); ++i) m = v[i] > m ? v[i] : m;
        return m;
    }
    value_type minimum(std::span<const value_type> v) const {
        double m = v[0];
        for (std::size_t i = 1; i < v.size(); ++i) m = v[i] < m ? v[i] : m;
        return m;
    }
};

template <typename T>
struct SmoothAlgebra {
    using value_type = T;
    T beta;

    value_type top() const { return static_cast<T>(kTrueRobustness); }
    template <typename S>
    value_type predicate(const LinearPredicate& p, const S& x) const {
        return p(x);
    }
    value_type negate(value_type v) const { return -v; }
    value_type maximum(std::span<const value_type> v) const { return ad::smooth_max_value<T>(v, beta); }
    value_type minimum(std::span<const value_type> v) const { return ad::smooth_min_value<T>(v, beta); }
};

enum class ExtremumMode { ExactSubgradient, Smooth };

struct SmoothConfig {
    ExtremumMode mode = ExtremumMode::ExactSubgradient;
    double beta = 10.0;

    static SmoothConfig exact() { return {ExtremumMode::ExactSubgradient, 10.0}; }
    static SmoothConfig smooth(double beta) { return {ExtremumMode::Smooth, beta}; }

    void validate() const {
        if (mode == ExtremumMode::Smooth && !(beta > 0.0)) throw InvalidArgument("smooth mode requires beta > 0");
    }
};

struct TapeAlgebra {
    using value_type = ad::Var;

    ad::Tape* tape;
    SmoothConfig config;

    value_type top() const { return tape->constant(kTrueRobustness); }
    value_type predicate(const LinearPredicate& p, const ad::Var& x) const { return ad::affine(x, p.c, p.d); }
    value_type negate(value_type v) const { return -v; }
    value_type maximum(std::span<const value_type> v) const {
        if (v.size() == 1) return v[0];
        return config.mode == ExtremumMode::Smooth ? ad::smooth_max(v, config.beta) : ad::hard_max(v);
    }
    value_type minimum(std::span<const value_type> v) const {
        if (v.size() == 1) return v[0];
        return config.mode == ExtremumMode::Smooth ? ad::smooth_min(v, config.beta) : ad::hard_min(v);
    }
};

namespace detail {

template <typename Algebra, typename StateT>
std::vector<typename Algebra::value_type> signal(const Formula& f, std::span<const StateT> x, const Algebra& alg) {
    using V = typename Algebra::value_type;
    const std::size_t len = x.size() - horizon(f);
    std::vector<V> out;
    out.reserve(len);

    f.visit(overloaded{
        [&](const op::True&) {
            for (std::size_t t = 0; t < len; ++t) out.push_back(alg.top());
        },
        [&](const op::Pred& n) {
            for (std::size_t t = 0; t < len; ++t) out.push_back(alg.predicate(n.pred, x[t]));
        },
        [&](const op::Not& n) {
            const auto s = signal(n.arg, x, alg);
            for (std::size_t t = 0; t < len; ++t) out.push_back(alg.negate(s[t]));
        },
        [&](const op::And& n) {
            const auto a = signal(n.lhs, x, alg);
            const auto b = signal(n.rhs, x, alg);
            for (std::size_t t = 0; t < len; ++t) {
                const V pair[2] = {a[t], b[t]};
                out.push_back(alg.minimum(pair));
            }
        },
        [&](const op::Or& n) {
            const auto a = signal(n.lhs, x, alg);
            const auto b = signal(n.rhs, x, alg);
            for (std::size_t t = 0; t < len; ++t) {
                const V pair[2] = {a[t], b[t]};
                out.push_back(alg.maximum(pair));
            }
        },
        [&](const op::Eventually& n) {
            const auto s = signal(n.arg, x, alg);
            const std::size_t width = n.interval.b - n.interval.a + 1;
            for (std::size_t t = 0; t < len; ++t) {
                out.push_back(alg.maximum(std::span<const V>(s).subspan(t + n.interval.a, width)));
            }
        },
        [&](const op::Always& n) {
            const auto s = signal(n.arg, x, alg);
            const std::size_t width = n.interval.b - n.interval.a + 1;
            for (std::size_t t = 0; t < len; ++t) {
                out.push_back(alg.minimum(std::span<const V>(s).subspan(t + n.interval.a, width)));
            }
        },
        [&](const op::Until& n) {
            // max over t1 in t+[a,b] of min(rho2(t1), min over t2 in [t, t1] of rho1(t2))
            const auto s1 = signal(n.lhs, x, alg);
            const auto s2 = signal(n.rhs, x, alg);
            std::vector<V> candidates;
            std::vector<V> inner;
            for (std::size_t t = 0; t < len; ++t) {
                candidates.clear();
                for (std::size_t t1 = t + n.interval.a; t1 <= t + n.interval.b; ++t1) {
                    inner.clear();
                    inner.push_back(s2[t1]);
                    for (std::size_t t2 = t; t2 <= t1; ++t2) inner.push_back(s1[t2]);
                    candidates.push_back(alg.minimum(inner));
                }
                out.push_back(alg.maximum(candidates));
            }
        },
    });
    return out;
}

inline void check_horizon(const Formula& f, std::size_t states, std::size_t t) {
    if (states == 0) throw HorizonError("empty trajectory");
    const std::size_t need = t + horizon(f);
    if (need > states - 1) {
        throw HorizonError("formula needs a trajectory up to step " + std::to_string(need) + " but T = " +
                           std::to_string(states - 1));
    }
}

inline void check_dimension(const Formula& f, std::span<const State> x) {
    const auto dim = f.state_dimension();
    if (!dim) return;
    for (const auto& s : x) {
        if (static_cast<std::size_t>(s.size()) != *dim) {
            throw DimensionError("trajectory state of dimension " + std::to_string(s.size()) +
                                 " for a formula over dimension " + std::to_string(*dim));
        }
    }
}

}  // namespace detail

/// Robustness signal rho^f(x, t) for every t in [0, T - horizon(f)].
template <typename Algebra, typename StateT>
std::vector<typename Algebra::value_type> robustness_signal(const Formula& f, std::span<const StateT> x,
                                                            const Algebra& alg) {
    detail::check_horizon(f, x.size(), 0);
    return detail::signal(f, x, alg);
}

/// Exact robustness rho^f(x, t).
inline double robustness(const Formula& f, std::span<const State> x, std::size_t t = 0) {
    detail::check_horizon(f, x.size(), t);
    detail::check_dimension(f, x);
    return detail::signal(f, x.subspan(t), ExactAlgebra{})[0];
}

/// Log-sum-exp robustness at t = 0, evaluated without a tape.
inline double smooth_robustness(const Formula& f, std::span<const State> x, double beta) {
    detail::check_horizon(f, x.size(), 0);
    detail::check_dimension(f, x);
    return detail::signal(f, x, SmoothAlgebra<double>{beta})[0];
}

/// Robustness at t = 0 as a node on `tape`; `states` are n x 1 column nodes.
inline ad::Var robustness(ad::Tape& tape, const Formula& f, std::span<const ad::Var> states, SmoothConfig config) {
    config.validate();
    detail::check_horizon(f, states.size(), 0);
    return detail::signal(f, states, TapeAlgebra{&tape, config})[0];
}

// ---------------------------------------------------------------------------
// Qualitative semantics. Evaluated on its own boolean signals so it can serve
// as an independent check of the sign of robustness.

namespace detail {

inline std::vector<bool> truth(const Formula& f, std::span<const State> x) {
    const std::size_t len = x.size() - horizon(f);
    std::vector<bool> out(len, false);
    f.visit(overloaded{
        [&](const op::True&) { out.assign(len, true); },
        [&](const op::Pred& n) {
            for (std::size_t t = 0; t < len; ++t) out[t] = n.pred(x[t]) > 0.0;
        },
        [&](const op::Not& n) {
            const auto s = truth(n.arg, x);
            for (std::size_t t = 0; t < len; ++t) out[t] = !s[t];
        },
        [&](const op::And& n) {
            const auto a = truth(n.lhs, x);
            const auto b = truth(n.rhs, x);
            for (std::size_t t = 0; t < len; ++t) out[t] = a[t] && b[t];
        },
        [&](const op::Or& n) {
            const auto a = truth(n.lhs, x);
            const auto b = truth(n.rhs, x);
            for (std::size_t t = 0; t < len; ++t) out[t] = a[t] || b[t];
        },
        [&](const op::Eventually& n) {
            const auto s = truth(n.arg, x);
            for (std::size_t t = 0; t < len; ++t) {
                bool any = false;
                for (std::size_t t1 = t + n.interval.a; t1 <= t + n.interval.b && !any; ++t1) any = s[t1];
                out[t] = any;
            }
        },
        [&](const op::Always& n) {
            const auto s = truth(n.arg, x);
            for (std::size_t t = 0; t < len; ++t) {
                bool all = true;
                for (std::size_t t1 = t + n.interval.a; t1 <= t + n.interval.b && all; ++t1) all = s[t1];
                out[t] = all;
            }
        },
        [&](const op::Until& n) {
            const auto s1 = truth(n.lhs, x);
            const auto s2 = truth(n.rhs, x);
            for (std::size_t t = 0; t < len; ++t) {
                bool found = false;
                for (std::size_t t1 = t + n.interval.a; t1 <= t + n.interval.b && !found; ++t1) {
                    if (!s2[t1]) continue;
                    bool hold = true;
                    for (std::size_t t2 = t; t2 <= t1 && hold; ++t2) hold = s1[t2];
                    found = hold;
                }
                out[t] = found;
            }
        },
    });
    return out;
}

}  // namespace detail

/// (x, 0) |= f, with predicates satisfied where h(x_t) > 0.
inline bool satisfies(const Formula& f, std::span<const State> x) {
    detail::check_horizon(f, x.size(), 0);
    detail::check_dimension(f, x);
    return detail::truth(f, x)[0];
}

}  // namespace stl2vec::stl
