#pragma once

// Stacked LSTM policy with a bounded output map.
//
//   gates = Wx s + Wh h + b          (4H rows: input, forget, candidate, output)
//   c' = sigmoid(f) * c + sigmoid(i) * tanh(g)
//   h' = sigmoid(o) * tanh(c')
//   u  = u_min + (u_max - u_min)/2 (tanh(W2 h_top) + 1)
//
// Parameter blocks, in order: for each layer Wx, Wh, b; then W2.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stl2vec/ad/tape.hpp"
#include "stl2vec/error.hpp"
#include "stl2vec/trajopt/dynamics.hpp"

namespace stl2vec::policy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PolicyShape {
    std::size_t state_dim = 3;
    std::size_t encoding_dim = 0;
    std::size_t hidden = 16;
    std::size_t layers = 1;
    std::size_t output_dim = 2;

    std::size_t input_dim() const noexcept { return state_dim + encoding_dim; }
    bool operator==(const PolicyShape&) const = default;
};

class LstmPolicy {
public:
    LstmPolicy(PolicyShape shape, VectorXd u_min, VectorXd u_max)
        : shape_(shape), u_min_(std::move(u_min)), u_max_(std::move(u_max)) {
        if (shape_.hidden < 1 || shape_.layers < 1 || shape_.output_dim < 1 || shape_.input_dim() < 1) {
            throw InvalidArgument("policy sizes must be positive");
        }
        if (static_cast<std::size_t>(u_min_.size()) != shape_.output_dim ||
            static_cast<std::size_t>(u_max_.size()) != shape_.output_dim) {
            throw DimensionError("policy bounds do not match the output dimension");
        }
        if (!(u_min_.array() < u_max_.array()).all()) throw InvalidArgument("policy bounds need u_min < u_max");
        const auto H = static_cast<Eigen::Index>(shape_.hidden);
        for (std::size_t l = 0; l < shape_.layers; ++l) {
            const auto in = static_cast<Eigen::Index>(l == 0 ? shape_.input_dim() : shape_.hidden);
            params_.push_back(MatrixXd::Zero(4 * H, in));
            params_.push_back(MatrixXd::Zero(4 * H, H));
            params_.push_back(MatrixXd::Zero(4 * H, 1));
        }
        params_.push_back(MatrixXd::Zero(static_cast<Eigen::Index>(shape_.output_dim), H));
    }

    /// Weights uniform in [-1/sqrt(H), 1/sqrt(H)], forget-gate bias 1.
    static LstmPolicy initialised(PolicyShape shape, VectorXd u_min, VectorXd u_max, std::uint64_t seed) {
        LstmPolicy p(shape, std::move(u_min), std::move(u_max));
        std::mt19937_64 rng(seed);
        const double a = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
        std::uniform_real_distribution<double> u(-a, a);
        for (auto& m : p.params_)
            for (Eigen::Index k = 0; k < m.size(); ++k) m.reshaped()(k) = u(rng);
        const auto H = static_cast<Eigen::Index>(shape.hidden);
        for (std::size_t l = 0; l < shape.layers; ++l) {
            auto& b = p.params_[3 * l + 2];
            b.setZero();
            b.block(H, 0, H, 1).setOnes();
        }
        return p;
    }

    const PolicyShape& shape() const noexcept { return shape_; }
    const VectorXd& u_min() const noexcept { return u_min_; }
    const VectorXd& u_max() const noexcept { return u_max_; }
    std::vector<MatrixXd>& params() noexcept { return params_; }
    const std::vector<MatrixXd>& params() const noexcept { return params_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& m : params_) n += static_cast<std::size_t>(m.size());
        return n;
    }

    struct State {
        std::vector<VectorXd> h;
        std::vector<VectorXd> c;
    };

    State zero_state() const {
        const auto H = static_cast<Eigen::Index>(shape_.hidden);
        return {std::vector<VectorXd>(shape_.layers, VectorXd::Zero(H)),
                std::vector<VectorXd>(shape_.layers, VectorXd::Zero(H))};
    }

    /// Advances `state` on input s and returns u.
    VectorXd step(State& state, const VectorXd& s) const {
        check_input(static_cast<std::size_t>(s.size()));
        const auto H = static_cast<Eigen::Index>(shape_.hidden);
        VectorXd in = s;
        for (std::size_t l = 0; l < shape_.layers; ++l) {
            const VectorXd g = params_[3 * l] * in + params_[3 * l + 1] * state.h[l] + params_[3 * l + 2];
            const auto sig = [](const auto& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix().eval(); };
            const VectorXd i = sig(g.segment(0, H));
            const VectorXd f = sig(g.segment(H, H));
            const VectorXd cand = g.segment(2 * H, H).array().tanh().matrix();
            const VectorXd o = sig(g.segment(3 * H, H));
            state.c[l] = (f.array() * state.c[l].array() + i.array() * cand.array()).matrix();
            state.h[l] = (o.array() * state.c[l].array().tanh()).matrix();
            in = state.h[l];
        }
        const VectorXd a = params_.back() * in;
        const VectorXd half = (u_max_ - u_min_) / 2.0;
        const VectorXd mid = u_min_ + half;
        return (half.array() * a.array().tanh() + mid.array()).matrix();
    }

    struct TapeState {
        std::vector<ad::Var> h;
        std::vector<ad::Var> c;
    };

    TapeState zero_state(ad::Tape& tape) const {
        const ad::Var z = tape.constant(VectorXd::Zero(static_cast<Eigen::Index>(shape_.hidden)));
        return {std::vector<ad::Var>(shape_.layers, z), std::vector<ad::Var>(shape_.layers, z)};
    }

    /// Same step on tape nodes; `w` are the parameter leaves in block order.
    ad::Var step(ad::Tape& tape, std::span<const ad::Var> w, TapeState& state, ad::Var s) const {
        check_input(static_cast<std::size_t>(tape.value(s).rows()));
        if (w.size() != params_.size()) throw DimensionError("policy: wrong number of parameter nodes");
        const auto H = static_cast<Eigen::Index>(shape_.hidden);
        ad::Var in = s;
        for (std::size_t l = 0; l < shape_.layers; ++l) {
            const ad::Var g = ad::matmul(w[3 * l], in) + ad::matmul(w[3 * l + 1], state.h[l]) + w[3 * l + 2];
            const ad::Var i = ad::sigmoid(ad::segment(g, 0, H));
            const ad::Var f = ad::sigmoid(ad::segment(g, H, H));
            const ad::Var cand = ad::tanh(ad::segment(g, 2 * H, H));
            const ad::Var o = ad::sigmoid(ad::segment(g, 3 * H, H));
            state.c[l] = f * state.c[l] + i * cand;
            state.h[l] = o * ad::tanh(state.c[l]);
            in = state.h[l];
        }
        const ad::Var a = ad::matmul(w.back(), in);
        const VectorXd half = (u_max_ - u_min_) / 2.0;
        return tape.constant(half) * ad::tanh(a) + tape.constant(VectorXd(u_min_ + half));
    }

private:
    void check_input(std::size_t got) const {
        if (got != shape_.input_dim()) {
            throw DimensionError("policy input of length " + std::to_string(got) + ", expected " +
                                 std::to_string(shape_.input_dim()));
        }
    }

    PolicyShape shape_;
    VectorXd u_min_;
    VectorXd u_max_;
    std::vector<MatrixXd> params_;
};

struct Rollout {
    std::vector<VectorXd> states;    // x_0 .. x_T
    std::vector<VectorXd> controls;  // u_0 .. u_{T-1}
};

inline void check_compatible(const LstmPolicy& p, const trajopt::DynamicsModel& dyn, std::size_t enc_dim) {
    if (p.shape().state_dim != dyn.state_dim() || p.shape().output_dim != dyn.input_dim()) {
        throw DimensionError("policy and dynamics dimensions differ");
    }
    if (p.shape().encoding_dim != enc_dim) throw DimensionError("encoding length does not match the policy");
}

/// Closed loop from x0 with s_t = [x_t; z] and a zero initial hidden state.
inline Rollout rollout(const LstmPolicy& p, const trajopt::DynamicsModel& dyn, const VectorXd& x0, const VectorXd& z,
                       std::size_t T) {
    check_compatible(p, dyn, static_cast<std::size_t>(z.size()));
    dyn.check_state(x0);
    Rollout r;
    r.states.reserve(T + 1);
    r.states.push_back(x0);
    auto state = p.zero_state();
    VectorXd s(static_cast<Eigen::Index>(p.shape().input_dim()));
    for (std::size_t t = 0; t < T; ++t) {
        s << r.states.back(), z;
        r.controls.push_back(p.step(state, s));
        r.states.push_back(dyn.step(r.states.back(), r.controls.back()));
    }
    return r;
}

/// Tape version; returns the state nodes x_0 .. x_T.
inline std::vector<ad::Var> rollout(ad::Tape& tape, const LstmPolicy& p, std::span<const ad::Var> w,
                                    const trajopt::DynamicsModel& dyn, const VectorXd& x0, const VectorXd& z,
                                    std::size_t T) {
    check_compatible(p, dyn, static_cast<std::size_t>(z.size()));
    dyn.check_state(x0);
    std::vector<ad::Var> xs{tape.constant(x0)};
    xs.reserve(T + 1);
    auto state = p.zero_state(tape);
    const bool has_z = z.size() > 0;
    const ad::Var zc = has_z ? tape.constant(z) : ad::Var{};
    for (std::size_t t = 0; t < T; ++t) {
        const ad::Var s = has_z ? ad::concat({xs.back(), zc}) : xs.back();
        const ad::Var u = p.step(tape, w, state, s);
        xs.push_back(dyn.step(tape, xs.back(), u));
    }
    return xs;
}

}  // namespace stl2vec::policy
