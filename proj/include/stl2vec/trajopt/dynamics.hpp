#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>

#include "stl2vec/ad/tape.hpp"
#include "stl2vec/error.hpp"

namespace stl2vec::trajopt {

/// Axis-aligned box {x : lo <= x <= hi}.
struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    std::size_t dimension() const { return static_cast<std::size_t>(lo.size()); }
    bool contains(const Eigen::VectorXd& x) const {
        return x.size() == lo.size() && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    }
    Eigen::VectorXd clip(const Eigen::VectorXd& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

/// Discrete-time system x_{t+1} = f(x_t, u_t) with box input bounds. The step
/// is given twice: on doubles for simulation and on tape nodes for gradients.
/// Implementations must make the two agree exactly.
class DynamicsModel {
public:
    DynamicsModel(std::size_t n, Eigen::VectorXd u_min, Eigen::VectorXd u_max)
        : n_(n), u_min_(std::move(u_min)), u_max_(std::move(u_max)) {
        if (u_min_.size() != u_max_.size()) throw DimensionError("input bounds of different length");
        if (!(u_min_.array() < u_max_.array()).all()) throw InvalidArgument("input bounds need u_min < u_max");
    }
    virtual ~DynamicsModel() = default;

    std::size_t state_dim() const noexcept { return n_; }
    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(u_min_.size()); }
    const Eigen::VectorXd& u_min() const noexcept { return u_min_; }
    const Eigen::VectorXd& u_max() const noexcept { return u_max_; }

    virtual Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
    virtual ad::Var step(ad::Tape& tape, ad::Var x, ad::Var u) const = 0;

    /// u = u_min + (u_max - u_min)/2 (tanh(theta) + 1), elementwise. Both
    /// overloads evaluate it as half * tanh(theta) + (u_min + half).
    Eigen::VectorXd squash(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd half = (u_max_ - u_min_) / 2.0;
        const Eigen::VectorXd mid = u_min_ + half;
        return (half.array() * theta.array().tanh() + mid.array()).matrix();
    }
    ad::Var squash(ad::Tape& tape, ad::Var theta) const {
        const Eigen::VectorXd half = (u_max_ - u_min_) / 2.0;
        return tape.constant(half) * ad::tanh(theta) + tape.constant(Eigen::VectorXd(u_min_ + half));
    }

    void check_state(const Eigen::VectorXd& x) const {
        if (static_cast<std::size_t>(x.size()) != n_) {
            throw DimensionError("state of dimension " + std::to_string(x.size()) + ", system has " +
                                 std::to_string(n_));
        }
    }

private:
    std::size_t n_;
    Eigen::VectorXd u_min_;
    Eigen::VectorXd u_max_;
};

/// x_{t+1} = x_t + u_t with n = m.
class Integrator final : public DynamicsModel {
public:
    Integrator(Eigen::VectorXd u_min, Eigen::VectorXd u_max)
        : DynamicsModel(static_cast<std::size_t>(u_min.size()), u_min, u_max) {}
    Integrator(double u_min, double u_max)
        : Integrator(Eigen::VectorXd::Constant(1, u_min), Eigen::VectorXd::Constant(1, u_max)) {}

    Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override { return x + u; }
    ad::Var step(ad::Tape&, ad::Var x, ad::Var u) const override { return x + u; }
};

/// Rolls `controls` forward from x0 and returns x_0..x_T.
inline std::vector<Eigen::VectorXd> simulate(const DynamicsModel& dyn, const Eigen::VectorXd& x0,
                                             const std::vector<Eigen::VectorXd>& controls) {
    dyn.check_state(x0);
    std::vector<Eigen::VectorXd> x;
    x.reserve(controls.size() + 1);
    x.push_back(x0);
    for (const auto& u : controls) x.push_back(dyn.step(x.back(), u));
    return x;
}

}  // namespace stl2vec::trajopt
