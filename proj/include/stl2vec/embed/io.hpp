#pragma once

// Text formats.
//   dataset:   center \t k1,k2,.. \t rho_center \t rho_k1,rho_k2,..   ('#' lines are comments)
//   embedding: "M N" then M rows of N numbers

#include <Eigen/Dense>

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <limits>
#include <string>
#include <vector>

#include "stl2vec/embed/dataset.hpp"
#include "stl2vec/embed/skipgram.hpp"
#include "stl2vec/error.hpp"

namespace stl2vec::embed {

namespace detail {

inline std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

template <typename T>
T parse_field(const std::string& s, std::size_t line) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("bad field '" + s + "'", line, 1);
    }
    return v;
}

}  // namespace detail

inline void write_dataset(std::ostream& os, std::span<const SkipGramRecord> records) {
    for (const auto& r : records) {
        os << r.center << '\t';
        for (std::size_t k = 0; k < r.context.size(); ++k) os << (k ? "," : "") << r.context[k];
        os << '\t' << detail::shortest(r.rho_center) << '\t';
        for (std::size_t k = 0; k < r.rho_context.size(); ++k) os << (k ? "," : "") << detail::shortest(r.rho_context[k]);
        os << '\n';
    }
}

inline std::vector<SkipGramRecord> read_dataset(std::istream& is) {
    std::vector<SkipGramRecord> out;
    std::string line;
    for (std::size_t no = 1; std::getline(is, line); ++no) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = detail::split(line, '\t');
        if (f.size() != 4) throw ParseError("expected 4 tab-separated fields", no, 1);
        SkipGramRecord r;
        r.center = detail::parse_field<std::size_t>(f[0], no);
        for (const auto& k : detail::split(f[1], ',')) r.context.push_back(detail::parse_field<std::size_t>(k, no));
        r.rho_center = detail::parse_field<double>(f[2], no);
        for (const auto& k : detail::split(f[3], ',')) r.rho_context.push_back(detail::parse_field<double>(k, no));
        if (r.context.empty() || r.context.size() != r.rho_context.size()) {
            throw ParseError("context and robustness lists differ in length", no, 1);
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& w) {
    os << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) os << (j ? " " : "") << detail::shortest(w(i, j));
        os << '\n';
    }
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
    while (is >> std::ws && is.peek() == '#') is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    long rows = -1, cols = -1;
    if (!(is >> rows >> cols) || rows < 0 || cols < 0) throw ParseError("bad matrix header", 1, 1);
    Eigen::MatrixXd w(rows, cols);
    std::string tok;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (!(is >> tok)) throw ParseError("matrix ends early", static_cast<std::size_t>(i) + 2, 1);
            w(i, j) = detail::parse_field<double>(tok, static_cast<std::size_t>(i) + 2);
        }
    }
    return w;
}

/// Embedding file: the spec vectors (W_in).
inline void write_embedding(std::ostream& os, const EmbeddingModel& model) { write_matrix(os, model.w_in); }

}  // namespace stl2vec::embed
