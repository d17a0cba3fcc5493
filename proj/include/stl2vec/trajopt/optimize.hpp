#pragma once

// Open-loop robustness maximisation over bounded control sequences.
//
// Controls are u_t = u_min + (u_max - u_min)/2 (tanh(theta_t) + 1). Each restart
// runs Adam ascent on smooth robustness; every iterate (including the start)
// is scored by exact robustness and the best one over all restarts is kept.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "stl2vec/ad/adam.hpp"
#include "stl2vec/ad/tape.hpp"
#include "stl2vec/error.hpp"
#include "stl2vec/stl/formula.hpp"
#include "stl2vec/stl/robustness.hpp"
#include "stl2vec/trajopt/dynamics.hpp"
#include "stl2vec/util/random.hpp"

namespace stl2vec::trajopt {

struct OptConfig {
    std::size_t T = 20;
    double beta = 10.0;
    std::size_t iterations = 200;
    double learning_rate = 0.1;
    std::size_t restarts = 3;
    /// Radius of the ball around x0 from which restarts >= 1 draw their start.
    double epsilon = 0.0;
    double init_sigma = 0.5;
    std::uint64_t seed = 0;
    /// Initial-state set; resampled starts are clipped into it.
    std::optional<Box> initial_set;

    void validate() const {
        if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
        if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be >= 0");
        if (!(beta > 0.0)) throw InvalidArgument("beta must be > 0");
        if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be > 0");
    }
};

struct OptResult {
    std::vector<Eigen::VectorXd> controls;    // u_0 .. u_{T-1}
    std::vector<Eigen::VectorXd> trajectory;  // x_0 .. x_T
    double robustness = -std::numeric_limits<double>::infinity();
    double smooth_robustness = -std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;  // ascent steps taken by the winning restart
    std::size_t restart = 0;

    bool success() const { return robustness > 0.0; }
};

/// Uniform sample from the Euclidean ball of radius epsilon around x0,
/// clipped into `initial_set` when given.
inline Eigen::VectorXd resample_vicinity(const Eigen::VectorXd& x0, double epsilon, std::uint64_t seed,
                                         const std::optional<Box>& initial_set = std::nullopt) {
    if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be >= 0");
    if (epsilon == 0.0 || x0.size() == 0) return x0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    Eigen::VectorXd dir(x0.size());
    do {
        for (Eigen::Index k = 0; k < dir.size(); ++k) dir(k) = n01(rng);
    } while (dir.norm() == 0.0);
    const double r = epsilon * std::pow(u01(rng), 1.0 / static_cast<double>(x0.size()));
    Eigen::VectorXd x = x0 + (r / dir.norm()) * dir;
    if (initial_set) x = initial_set->clip(x);
    return x;
}

namespace detail {

inline std::vector<Eigen::VectorXd> controls_of(const DynamicsModel& dyn, const Eigen::VectorXd& theta,
                                                std::size_t T) {
    const auto m = static_cast<Eigen::Index>(dyn.input_dim());
    std::vector<Eigen::VectorXd> u;
    u.reserve(T);
    for (std::size_t t = 0; t < T; ++t) u.push_back(dyn.squash(theta.segment(static_cast<Eigen::Index>(t) * m, m)));
    return u;
}

}  // namespace detail

inline OptResult optimize(const stl::Formula& f, const Eigen::VectorXd& x0, const DynamicsModel& dyn,
                          const OptConfig& cfg) {
    cfg.validate();
    dyn.check_state(x0);
    if (auto d = f.state_dimension(); d && *d != dyn.state_dim()) {
        throw DimensionError("formula over dimension " + std::to_string(*d) + ", system state has " +
                             std::to_string(dyn.state_dim()));
    }
    if (cfg.T < stl::horizon(f)) {
        throw HorizonError("T = " + std::to_string(cfg.T) + " is below the formula horizon " +
                           std::to_string(stl::horizon(f)));
    }

    const auto m = static_cast<Eigen::Index>(dyn.input_dim());
    const Eigen::Index P = m * static_cast<Eigen::Index>(cfg.T);

    OptResult best;
    if (std::holds_alternative<stl::op::True>(f.node().v)) {
        best.controls = detail::controls_of(dyn, Eigen::VectorXd::Zero(P), cfg.T);
        best.trajectory = simulate(dyn, x0, best.controls);
        best.robustness = best.smooth_robustness = stl::kTrueRobustness;
        return best;
    }

    bool any_finished = false;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        Eigen::VectorXd start = x0;
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(P);
        if (r > 0) {
            start = resample_vicinity(x0, cfg.epsilon, util::derive_seed(cfg.seed, {r, 1}), cfg.initial_set);
            std::mt19937_64 rng(util::derive_seed(cfg.seed, {r, 2}));
            std::normal_distribution<double> init(0.0, cfg.init_sigma);
            for (Eigen::Index k = 0; k < P; ++k) theta(k) = init(rng);
        }

        ad::AdamState adam(ad::AdamConfig{cfg.learning_rate});
        std::vector<Eigen::MatrixXd> params{theta};
        double best_exact = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_theta = theta;
        std::size_t best_iter = 0;
        double last_smooth = -std::numeric_limits<double>::infinity();
        try {
            for (std::size_t it = 0;; ++it) {
                ad::Tape tape;
                const ad::Var th = tape.variable(params[0]);
                std::vector<ad::Var> states{tape.constant(start)};
                states.reserve(cfg.T + 1);
                for (std::size_t t = 0; t < cfg.T; ++t) {
                    const ad::Var u = dyn.squash(tape, ad::segment(th, static_cast<Eigen::Index>(t) * m, m));
                    states.push_back(dyn.step(tape, states.back(), u));
                }
                const ad::Var rho = stl::robustness(tape, f, states, stl::SmoothConfig::smooth(cfg.beta));
                last_smooth = tape.scalar(rho);

                std::vector<Eigen::VectorXd> xs;
                xs.reserve(states.size());
                for (const auto& s : states) xs.push_back(tape.value(s));
                const double exact = stl::robustness(f, xs);
                if (exact > best_exact) {
                    best_exact = exact;
                    best_theta = params[0];
                    best_iter = it;
                }
                if (it == cfg.iterations) break;

                tape.backward(rho);
                const std::vector<Eigen::MatrixXd> grads{-tape.grad(th)};
                adam.step(params, grads);
            }
        } catch (const NumericalError&) {
            if (!std::isfinite(best_exact)) continue;
        }
        any_finished = true;
        if (best_exact > best.robustness) {
            best.controls = detail::controls_of(dyn, best_theta, cfg.T);
            best.trajectory = simulate(dyn, start, best.controls);
            best.robustness = stl::robustness(f, best.trajectory);
            best.smooth_robustness = last_smooth;
            best.iterations = best_iter;
            best.restart = r;
        }
    }
    if (!any_finished) throw NumericalError("optimize: every restart hit a non-finite value");
    return best;
}

}  // namespace stl2vec::trajopt
