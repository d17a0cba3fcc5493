#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "stl2vec/error.hpp"

namespace stl2vec::ad {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam moments for a list of parameter blocks. The moment
/// buffers are shaped on the first step.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(AdamConfig config) : config_(config) {}

    const AdamConfig& config() const noexcept { return config_; }
    AdamConfig& config() noexcept { return config_; }
    std::int64_t step_count() const noexcept { return steps_; }
    const std::vector<Eigen::MatrixXd>& first_moment() const noexcept { return m_; }
    const std::vector<Eigen::MatrixXd>& second_moment() const noexcept { return v_; }

    void step(std::span<Eigen::MatrixXd> params, std::span<const Eigen::MatrixXd> grads) {
        if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient count mismatch");
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (const auto& p : params) {
                m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
                v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
            }
        }
        if (m_.size() != params.size()) throw DimensionError("adam: parameter count changed between steps");
        for (std::size_t k = 0; k < params.size(); ++k) {
            if (params[k].rows() != grads[k].rows() || params[k].cols() != grads[k].cols() ||
                params[k].rows() != m_[k].rows() || params[k].cols() != m_[k].cols()) {
                throw DimensionError("adam: shape mismatch in parameter block " + std::to_string(k));
            }
        }

        ++steps_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * grads[k];
            v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * grads[k].cwiseAbs2();
            params[k].array() -= config_.learning_rate * (m_[k].array() / c1) /
                                 ((v_[k].array() / c2).sqrt() + config_.epsilon);
        }
    }

private:
    AdamConfig config_;
    std::int64_t steps_ = 0;
    std::vector<Eigen::MatrixXd> m_;
    std::vector<Eigen::MatrixXd> v_;
};

inline void adam_step(AdamState& state, std::span<Eigen::MatrixXd> params, std::span<const Eigen::MatrixXd> grads) {
    state.step(params, grads);
}

}  // namespace stl2vec::ad
