#pragma once

// Scalar log-sum-exp extrema. These are the value kernels shared by the tape
// and by the plain (non-differentiated) robustness evaluators; they are
// templated so a test oracle can run them in extended precision.

#include <algorithm>
#include <cmath>
#include <span>

#include "stl2vec/error.hpp"

namespace stl2vec::ad {

/// (1/beta) ln sum exp(beta a_i), evaluated as max + (1/beta) ln sum exp(beta (a_i - max)).
template <typename T>
T smooth_max_value(std::span<const T> args, T beta) {
    if (args.empty()) throw InvalidArgument("smooth_max of an empty argument list");
    if (!(beta > T(0))) throw InvalidArgument("smooth_max requires beta > 0");
    if (args.size() == 1) return args[0];
    const T top = *std::max_element(args.begin(), args.end());
    T sum = T(0);
    for (const T& a : args) sum += std::exp(beta * (a - top));
    return top + std::log(sum) / beta;
}

/// -(1/beta) ln sum exp(-beta a_i); always <= min(a).
template <typename T>
T smooth_min_value(std::span<const T> args, T beta) {
    if (args.empty()) throw InvalidArgument("smooth_min of an empty argument list");
    if (!(beta > T(0))) throw InvalidArgument("smooth_min requires beta > 0");
    if (args.size() == 1) return args[0];
    const T bottom = *std::min_element(args.begin(), args.end());
    T sum = T(0);
    for (const T& a : args) sum += std::exp(-beta * (a - bottom));
    return bottom - std::log(sum) / beta;
}

}  // namespace stl2vec::ad
