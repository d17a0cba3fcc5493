#pragma once

#include <Eigen/Dense>

#include <string>

#include "stl2vec/embed/skipgram.hpp"
#include "stl2vec/error.hpp"

namespace stl2vec::policy {

enum class EncodingKind { Stl2vec, Integer, OneHot, None };

inline const char* to_string(EncodingKind k) {
    switch (k) {
        case EncodingKind::Stl2vec: return "stl2vec";
        case EncodingKind::Integer: return "integer";
        case EncodingKind::OneHot: return "onehot";
        case EncodingKind::None: return "none";
    }
    return "?";
}

inline EncodingKind encoding_kind(const std::string& s) {
    if (s == "stl2vec") return EncodingKind::Stl2vec;
    if (s == "integer") return EncodingKind::Integer;
    if (s == "onehot" || s == "one-hot") return EncodingKind::OneHot;
    if (s == "none") return EncodingKind::None;
    throw InvalidArgument("unknown encoding '" + s + "'");
}

/// Spec index -> vector fed to the policy with the state. Row i of `table`.
struct SpecEncoding {
    EncodingKind kind = EncodingKind::None;
    Eigen::MatrixXd table;  // M x enc_dim

    std::size_t size() const noexcept { return static_cast<std::size_t>(table.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(table.cols()); }

    Eigen::VectorXd operator()(std::size_t i) const {
        if (i >= size()) throw InvalidArgument("spec index out of range for the encoding");
        return table.row(static_cast<Eigen::Index>(i)).transpose();
    }

    static SpecEncoding stl2vec(const embed::EmbeddingModel& model) { return {EncodingKind::Stl2vec, model.w_in}; }
    /// Raw index i + 1, unnormalised.
    static SpecEncoding integer(std::size_t m) {
        return {EncodingKind::Integer, Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(m), 1.0, static_cast<double>(m))};
    }
    static SpecEncoding one_hot(std::size_t m) {
        return {EncodingKind::OneHot, Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))};
    }
    static SpecEncoding none(std::size_t m) { return {EncodingKind::None, Eigen::MatrixXd(static_cast<Eigen::Index>(m), 0)}; }
};

}  // namespace stl2vec::policy
