#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "stl2vec/ad/tape.hpp"

namespace stl2vec::ad {

/// Builds a scalar output from parameter leaves on a fresh tape.
using GraphBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// (parameter block, flat column-major entry)
using ParamEntry = std::pair<std::size_t, Eigen::Index>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t entries_checked = 0;
    /// False when the base point sits on (or within tie_tolerance of) a hard
    /// extremum kink; max_relative_error is then not meaningful.
    bool checkable = true;
};

namespace detail {

inline Var build_on(Tape& tape, const GraphBuilder& build, const std::vector<Matrix>& params) {
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.variable(p));
    return build(tape, leaves);
}

}  // namespace detail

/// Compares reverse-mode gradients against central differences with step h.
/// Relative error per entry is |ad - fd| / (|fd| + 1e-12). If `entries` is
/// empty every parameter entry is checked.
inline GradCheckResult grad_check(const GraphBuilder& build, const std::vector<Matrix>& params, double h = 1e-5,
                                  std::span<const ParamEntry> entries = {}, double tie_tolerance = -1.0) {
    if (tie_tolerance < 0.0) tie_tolerance = 100.0 * h;

    Tape tape;
    const Var out = detail::build_on(tape, build, params);
    tape.backward(out);
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (std::uint32_t k = 0; k < params.size(); ++k) analytic.push_back(tape.grad(Var{&tape, k}));

    GradCheckResult result;
    result.checkable = !(tape.min_extremum_gap() <= tie_tolerance);

    std::vector<ParamEntry> all;
    if (entries.empty()) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            for (Eigen::Index e = 0; e < params[k].size(); ++e) all.emplace_back(k, e);
        }
        entries = all;
    }

    std::vector<Matrix> probe = params;
    for (const auto& [block, entry] : entries) {
        double& slot = probe.at(block).reshaped()(entry);
        const double saved = slot;

        slot = saved + h;
        Tape plus;
        const double f_plus = plus.scalar(detail::build_on(plus, build, probe));
        slot = saved - h;
        Tape minus;
        const double f_minus = minus.scalar(detail::build_on(minus, build, probe));
        slot = saved;

        const double fd = (f_plus - f_minus) / (2.0 * h);
        const double ad = analytic[block].reshaped()(entry);
        const double rel = std::abs(ad - fd) / (std::abs(fd) + 1e-12);
        result.max_relative_error = std::max(result.max_relative_error, rel);
        ++result.entries_checked;
    }
    return result;
}

}  // namespace stl2vec::ad
