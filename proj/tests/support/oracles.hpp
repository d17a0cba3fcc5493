#pragma once

// Test-only oracles. Nothing here calls into the evaluators it checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

#include "stl2vec/stl/formula.hpp"

namespace stl2vec::oracle {

/// Literal robustness recursion: every max/min is materialised over the
/// enumerated time indices, with no signal reuse.
inline double brute_force_robustness(const stl::Formula& f, const std::vector<Eigen::VectorXd>& x, std::size_t t) {
    using namespace stl;
    return f.visit(overloaded{
        [&](const op::True&) { return 1e9; },
        [&](const op::Pred& n) { return n.pred.c.dot(x[t]) + n.pred.d; },
        [&](const op::Not& n) { return -brute_force_robustness(n.arg, x, t); },
        [&](const op::And& n) {
            return std::min(brute_force_robustness(n.lhs, x, t), brute_force_robustness(n.rhs, x, t));
        },
        [&](const op::Or& n) {
            return std::max(brute_force_robustness(n.lhs, x, t), brute_force_robustness(n.rhs, x, t));
        },
        [&](const op::Eventually& n) {
            double best = -1e300;
            for (std::size_t t1 = t + n.interval.a; t1 <= t + n.interval.b; ++t1) {
                best = std::max(best, brute_force_robustness(n.arg, x, t1));
            }
            return best;
        },
        [&](const op::Always& n) {
            double worst = 1e300;
            for (std::size_t t1 = t + n.interval.a; t1 <= t + n.interval.b; ++t1) {
                worst = std::min(worst, brute_force_robustness(n.arg, x, t1));
            }
            return worst;
        },
        [&](const op::Until& n) {
            double best = -1e300;
            for (std::size_t t1 = t + n.interval.a; t1 <= t + n.interval.b; ++t1) {
                double inner = brute_force_robustness(n.rhs, x, t1);
                for (std::size_t t2 = t; t2 <= t1; ++t2) inner = std::min(inner, brute_force_robustness(n.lhs, x, t2));
                best = std::max(best, inner);
            }
            return best;
        },
    });
}

/// Random formulas with operators drawn uniformly and horizon <= budget.
class FormulaGenerator {
public:
    FormulaGenerator(std::uint64_t seed, std::size_t dim) : rng_(seed), dim_(dim) {}

    stl::Formula operator()(std::size_t max_depth, std::size_t budget) { return gen(max_depth, budget); }

    std::vector<Eigen::VectorXd> trajectory(std::size_t T, double scale = 2.0) {
        std::uniform_real_distribution<double> u(-scale, scale);
        std::vector<Eigen::VectorXd> x(T + 1, Eigen::VectorXd(static_cast<Eigen::Index>(dim_)));
        for (auto& s : x)
            for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = u(rng_);
        return x;
    }

    std::mt19937_64& rng() { return rng_; }

private:
    stl::Formula atom() {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        if (std::uniform_int_distribution<int>(0, 9)(rng_) == 0) return stl::Formula::top();
        stl::LinearPredicate p;
        p.c.resize(static_cast<Eigen::Index>(dim_));
        for (Eigen::Index k = 0; k < p.c.size(); ++k) p.c(k) = u(rng_);
        p.d = u(rng_);
        return stl::Formula::predicate(p);
    }

    stl::Interval interval(std::size_t budget) {
        const std::size_t b = std::uniform_int_distribution<std::size_t>(0, budget)(rng_);
        const std::size_t a = std::uniform_int_distribution<std::size_t>(0, b)(rng_);
        return {a, b};
    }

    stl::Formula gen(std::size_t depth, std::size_t budget) {
        using stl::Formula;
        if (depth == 0) return atom();
        switch (std::uniform_int_distribution<int>(0, 7)(rng_)) {
            case 0: return Formula::top();
            case 1: return atom();
            case 2: return Formula::negation(gen(depth - 1, budget));
            case 3: return Formula::conjunction(gen(depth - 1, budget), gen(depth - 1, budget));
            case 4: return Formula::disjunction(gen(depth - 1, budget), gen(depth - 1, budget));
            case 5: {
                const auto i = interval(budget);
                return Formula::eventually(i, gen(depth - 1, budget - i.b));
            }
            case 6: {
                const auto i = interval(budget);
                return Formula::always(i, gen(depth - 1, budget - i.b));
            }
            default: {
                const auto i = interval(budget);
                return Formula::until(i, gen(depth - 1, budget - i.b), gen(depth - 1, budget - i.b));
            }
        }
    }

    std::mt19937_64 rng_;
    std::size_t dim_;
};

}  // namespace stl2vec::oracle
