#pragma once

// Policy checkpoint, text:
//
//   stl2vec-policy 1
//   state_dim <n>  encoding_dim <k>  hidden <H>  layers <L>  output_dim <m>   (one key per line)
//   u_min <m numbers>
//   u_max <m numbers>
//   encoding <kind> <rows> <cols>
//   <rows lines of the encoding table>
//   params <count>
//   <rows> <cols>            then the entries, row-major, one row per line
//   ...

#include <charconv>
#include <istream>
#include <ostream>
#include <string>

#include "stl2vec/embed/io.hpp"
#include "stl2vec/error.hpp"
#include "stl2vec/policy/encoding.hpp"
#include "stl2vec/policy/lstm.hpp"

namespace stl2vec::policy {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    LstmPolicy policy;
    SpecEncoding encoding;
};

namespace detail {

inline void write_vector(std::ostream& os, const char* key, const Eigen::VectorXd& v) {
    os << key;
    for (Eigen::Index k = 0; k < v.size(); ++k) os << ' ' << embed::detail::shortest(v(k));
    os << '\n';
}

inline std::size_t read_key(std::istream& is, const char* key) {
    std::string got;
    std::size_t v = 0;
    if (!(is >> got) || got != key || !(is >> v)) throw ParseError(std::string("checkpoint: expected '") + key + "'", 0, 0);
    return v;
}

inline Eigen::VectorXd read_vector(std::istream& is, const char* key, std::size_t n) {
    std::string got;
    if (!(is >> got) || got != key) throw ParseError(std::string("checkpoint: expected '") + key + "'", 0, 0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    std::string tok;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(is >> tok)) throw ParseError("checkpoint: truncated vector", 0, 0);
        v(static_cast<Eigen::Index>(k)) = embed::detail::parse_field<double>(tok, 0);
    }
    return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const LstmPolicy& p, const SpecEncoding& enc) {
    const auto& s = p.shape();
    os << "stl2vec-policy " << kCheckpointVersion << '\n'
       << "state_dim " << s.state_dim << '\n'
       << "encoding_dim " << s.encoding_dim << '\n'
       << "hidden " << s.hidden << '\n'
       << "layers " << s.layers << '\n'
       << "output_dim " << s.output_dim << '\n';
    detail::write_vector(os, "u_min", p.u_min());
    detail::write_vector(os, "u_max", p.u_max());
    os << "encoding " << to_string(enc.kind) << ' ';
    embed::write_matrix(os, enc.table);
    os << "params " << p.params().size() << '\n';
    for (const auto& m : p.params()) embed::write_matrix(os, m);
}

inline Checkpoint read_checkpoint(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "stl2vec-policy") throw ParseError("not a policy checkpoint", 1, 1);
    if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 1, 1);
    PolicyShape s;
    s.state_dim = detail::read_key(is, "state_dim");
    s.encoding_dim = detail::read_key(is, "encoding_dim");
    s.hidden = detail::read_key(is, "hidden");
    s.layers = detail::read_key(is, "layers");
    s.output_dim = detail::read_key(is, "output_dim");
    const Eigen::VectorXd lo = detail::read_vector(is, "u_min", s.output_dim);
    const Eigen::VectorXd hi = detail::read_vector(is, "u_max", s.output_dim);
    std::string key, kind;
    if (!(is >> key >> kind) || key != "encoding") throw ParseError("checkpoint: expected 'encoding'", 0, 0);
    SpecEncoding enc{encoding_kind(kind), embed::read_matrix(is)};
    if (enc.dim() != s.encoding_dim) throw ParseError("checkpoint: encoding width differs from encoding_dim", 0, 0);

    Checkpoint cp{LstmPolicy(s, lo, hi), std::move(enc)};
    const std::size_t count = detail::read_key(is, "params");
    if (count != cp.policy.params().size()) throw ParseError("checkpoint: wrong number of parameter blocks", 0, 0);
    for (auto& m : cp.policy.params()) {
        Eigen::MatrixXd got = embed::read_matrix(is);
        if (got.rows() != m.rows() || got.cols() != m.cols()) throw ParseError("checkpoint: parameter block shape", 0, 0);
        m = std::move(got);
    }
    return cp;
}

}  // namespace stl2vec::policy
