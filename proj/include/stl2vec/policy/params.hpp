#pragma once

// Parameter counts for the controller set-ups.
//
// The formula mode counts input-to-gate weights of every layer as if each
// took the full input, plus the output map where the reference count
// includes it:
//   proposed  M N + 4 H L (n + N) + 4 H L m
//   A1        4 H L n + 4 H L m                (integer encoding)
//   A2        4 H L (n + M)                    (one-hot encoding)
//   A3        M (4 H L n + 4 H L m)            (one policy per spec)
// The true mode counts every weight and bias the LSTM actually holds.

#include <cstdint>
#include <string>

#include "stl2vec/error.hpp"

namespace stl2vec::policy {

enum class Method { Proposed, A1, A2, A3 };

inline Method method_from(const std::string& s) {
    if (s == "proposed") return Method::Proposed;
    if (s == "A1" || s == "a1") return Method::A1;
    if (s == "A2" || s == "a2") return Method::A2;
    if (s == "A3" || s == "a3") return Method::A3;
    throw InvalidArgument("unknown method '" + s + "'");
}

struct CountInputs {
    std::uint64_t M = 194, N = 20, n = 3, m = 2, hidden = 32, layers = 2;

    void validate() const {
        if (!M || !N || !n || !m || !hidden || !layers) throw InvalidArgument("parameter-count inputs must be positive");
    }
};

inline std::uint64_t count_params(const CountInputs& c, Method method) {
    c.validate();
    const std::uint64_t g = 4 * c.hidden * c.layers;
    switch (method) {
        case Method::Proposed: return c.M * c.N + g * (c.n + c.N) + g * c.m;
        case Method::A1: return g * c.n + g * c.m;
        case Method::A2: return g * (c.n + c.M);
        case Method::A3: return c.M * (g * c.n + g * c.m);
    }
    return 0;
}

/// Weights and biases of an LSTM stack with input `in` and output map to m.
inline std::uint64_t lstm_true_count(std::uint64_t in, std::uint64_t hidden, std::uint64_t layers, std::uint64_t m) {
    std::uint64_t total = 0;
    for (std::uint64_t l = 0; l < layers; ++l) {
        const std::uint64_t x = l == 0 ? in : hidden;
        total += 4 * hidden * (x + hidden) + 4 * hidden;
    }
    return total + m * hidden;
}

inline std::uint64_t count_params_true(const CountInputs& c, Method method) {
    c.validate();
    switch (method) {
        case Method::Proposed: return c.M * c.N + lstm_true_count(c.n + c.N, c.hidden, c.layers, c.m);
        case Method::A1: return lstm_true_count(c.n + 1, c.hidden, c.layers, c.m);
        case Method::A2: return lstm_true_count(c.n + c.M, c.hidden, c.layers, c.m);
        case Method::A3: return c.M * lstm_true_count(c.n, c.hidden, c.layers, c.m);
    }
    return 0;
}

}  // namespace stl2vec::policy
