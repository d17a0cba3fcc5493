#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "stl2vec/ad/adam.hpp"
#include "stl2vec/embed/dataset.hpp"
#include "stl2vec/error.hpp"

namespace stl2vec::embed {

/// W_in is M x N (row i is the vector of spec i); W_out is N x M.
struct EmbeddingModel {
    Eigen::MatrixXd w_in;
    Eigen::MatrixXd w_out;

    std::size_t vocabulary() const noexcept { return static_cast<std::size_t>(w_in.rows()); }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(w_in.cols()); }
};

struct SkipGramConfig {
    std::size_t dimension = 20;
    std::size_t epochs = 100;
    double learning_rate = 0.05;
    double adam_epsilon = 1e-8;
    /// 0 trains on the full dataset each step.
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
};

/// Entries uniform in [-0.5/N, 0.5/N].
inline EmbeddingModel init_model(std::size_t m, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("embedding dimension must be >= 1");
    if (m < 1) throw InvalidArgument("empty vocabulary");
    std::mt19937_64 rng(seed);
    const double a = 0.5 / static_cast<double>(n);
    std::uniform_real_distribution<double> u(-a, a);
    EmbeddingModel model{Eigen::MatrixXd(m, n), Eigen::MatrixXd(n, m)};
    for (Eigen::Index k = 0; k < model.w_in.size(); ++k) model.w_in.reshaped()(k) = u(rng);
    for (Eigen::Index k = 0; k < model.w_out.size(); ++k) model.w_out.reshaped()(k) = u(rng);
    return model;
}

struct LossAndGrad {
    double loss = 0.0;
    Eigen::MatrixXd d_in;
    Eigen::MatrixXd d_out;
};

/// Summed cross-entropy over every (record, context target) pair and its
/// gradient. For logits s = W_out^T z and p = softmax(s), a record with P
/// targets contributes P * lse(s) - sum_k s_k, whose logit gradient is P p - sum_k e_k.
inline LossAndGrad skipgram_loss(const EmbeddingModel& model, std::span<const SkipGramRecord> records) {
    const auto M = static_cast<Eigen::Index>(model.vocabulary());
    LossAndGrad out{0.0, Eigen::MatrixXd::Zero(model.w_in.rows(), model.w_in.cols()),
                    Eigen::MatrixXd::Zero(model.w_out.rows(), model.w_out.cols())};
    for (const auto& r : records) {
        if (static_cast<Eigen::Index>(r.center) >= M) throw InvalidArgument("record center out of range");
        const Eigen::VectorXd z = model.w_in.row(static_cast<Eigen::Index>(r.center)).transpose();
        const Eigen::VectorXd s = model.w_out.transpose() * z;
        const double mx = s.maxCoeff();
        const Eigen::VectorXd e = (s.array() - mx).exp();
        const double total = e.sum();
        const double lse = mx + std::log(total);
        Eigen::VectorXd ds = (static_cast<double>(r.context.size()) / total) * e;
        for (std::size_t k : r.context) {
            if (static_cast<Eigen::Index>(k) >= M) throw InvalidArgument("record context out of range");
            out.loss += lse - s(static_cast<Eigen::Index>(k));
            ds(static_cast<Eigen::Index>(k)) -= 1.0;
        }
        out.d_out.noalias() += z * ds.transpose();
        out.d_in.row(static_cast<Eigen::Index>(r.center)) += (model.w_out * ds).transpose();
    }
    return out;
}

struct TrainedEmbedding {
    EmbeddingModel model;
    std::vector<double> epoch_loss;  // loss over the whole dataset before each epoch, then after the last
};

inline TrainedEmbedding train_skipgram(std::span<const SkipGramRecord> records, std::size_t vocabulary,
                                       const SkipGramConfig& cfg) {
    if (records.empty()) throw InvalidArgument("empty skip-gram dataset");
    TrainedEmbedding out{init_model(vocabulary, cfg.dimension, cfg.seed), {}};
    ad::AdamState adam(ad::AdamConfig{cfg.learning_rate, 0.9, 0.999, cfg.adam_epsilon});
    std::vector<Eigen::MatrixXd> params{out.model.w_in, out.model.w_out};

    const std::size_t batch = cfg.batch_size == 0 ? records.size() : std::min(cfg.batch_size, records.size());
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(util::derive_seed(cfg.seed, {1}));
    std::vector<SkipGramRecord> chunk;

    auto check = [](double loss) {
        if (!std::isfinite(loss)) throw NumericalError("skip-gram loss diverged");
    };
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        out.model = {params[0], params[1]};
        if (batch == records.size()) {
            auto lg = skipgram_loss(out.model, records);
            check(lg.loss);
            out.epoch_loss.push_back(lg.loss);
            const std::vector<Eigen::MatrixXd> grads{std::move(lg.d_in), std::move(lg.d_out)};
            adam.step(params, grads);
            continue;
        }
        out.epoch_loss.push_back(skipgram_loss(out.model, records).loss);
        check(out.epoch_loss.back());
        util::shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            chunk.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) chunk.push_back(records[order[k]]);
            auto lg = skipgram_loss(EmbeddingModel{params[0], params[1]}, chunk);
            check(lg.loss);
            const std::vector<Eigen::MatrixXd> grads{std::move(lg.d_in), std::move(lg.d_out)};
            adam.step(params, grads);
        }
    }
    out.model = {params[0], params[1]};
    out.epoch_loss.push_back(skipgram_loss(out.model, records).loss);
    check(out.epoch_loss.back());
    return out;
}

/// Vector of spec i: row i of W_in.
inline Eigen::VectorXd embed(const EmbeddingModel& model, std::size_t i) {
    if (i >= model.vocabulary()) throw InvalidArgument("spec index out of range");
    return model.w_in.row(static_cast<Eigen::Index>(i)).transpose();
}

inline double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DimensionError("cosine of vectors with different lengths");
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine similarity of a zero vector");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

struct Neighbour {
    std::size_t index;
    double similarity;
};

/// The k specs most similar to spec i, descending, ties to the lower index.
inline std::vector<Neighbour> nearest(const EmbeddingModel& model, std::size_t i, std::size_t k) {
    const std::size_t M = model.vocabulary();
    if (i >= M) throw InvalidArgument("spec index out of range");
    if (k < 1 || k > M - 1) throw InvalidArgument("k must be in [1, M-1]");
    const Eigen::VectorXd zi = embed(model, i);
    std::vector<Neighbour> all;
    for (std::size_t j = 0; j < M; ++j) {
        if (j != i) all.push_back({j, cosine_similarity(zi, embed(model, j))});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const Neighbour& a, const Neighbour& b) { return a.similarity > b.similarity; });
    all.resize(k);
    return all;
}

}  // namespace stl2vec::embed
