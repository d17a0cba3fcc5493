#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "stl2vec/trajopt/dynamics.hpp"

namespace stl2vec::bench {

/// State (qx, qy, theta), input (v, omega):
///   qx' = qx + v sin(theta), qy' = qy + v cos(theta), theta' = theta + omega.
class Unicycle final : public trajopt::DynamicsModel {
public:
    Unicycle(Eigen::Vector2d u_min = {0.0, -0.5}, Eigen::Vector2d u_max = {1.0, 0.5})
        : DynamicsModel(3, u_min, u_max) {}

    Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
        check_state(x);
        return Eigen::Vector3d(x(0) + u(0) * std::sin(x(2)), x(1) + u(0) * std::cos(x(2)), x(2) + u(1));
    }

    ad::Var step(ad::Tape&, ad::Var x, ad::Var u) const override {
        const ad::Var th = ad::element(x, 2);
        const ad::Var v = ad::element(u, 0);
        return ad::stack({ad::element(x, 0) + v * ad::sin(th), ad::element(x, 1) + v * ad::cos(th),
                          th + ad::element(u, 1)});
    }
};

}  // namespace stl2vec::bench
