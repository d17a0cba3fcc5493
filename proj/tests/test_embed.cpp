#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "stl2vec/ad/tape.hpp"
#include "stl2vec/embed/dataset.hpp"
#include "stl2vec/embed/io.hpp"
#include "stl2vec/embed/skipgram.hpp"
#include "stl2vec/stl/parser.hpp"

using namespace stl2vec;
using embed::SkipGramRecord;

namespace {

using Contexts = std::vector<std::vector<std::size_t>>;

Contexts contexts(std::size_t center, std::vector<double> rho, std::size_t P, std::size_t cap = 20) {
    return embed::select_contexts(center, rho, embed::ContextOptions{P, cap, 0.0});
}

// Skip-gram loss on a tape: -log softmax = lse(s) - s_k, with lse written as smooth_max at beta = 1.
double tape_loss(const embed::EmbeddingModel& m, const std::vector<SkipGramRecord>& records, Eigen::MatrixXd* d_in,
                 Eigen::MatrixXd* d_out) {
    ad::Tape t;
    const ad::Var win = t.variable(m.w_in);
    const ad::Var wout = t.variable(m.w_out);
    std::vector<ad::Var> terms;
    const auto M = static_cast<Eigen::Index>(m.vocabulary());
    for (const auto& r : records) {
        const ad::Var z = ad::matmul(t.constant(embed::encode(r.center, m.vocabulary()).transpose()), win);
        const ad::Var s = ad::matmul(z, wout);
        std::vector<ad::Var> logits;
        for (Eigen::Index k = 0; k < M; ++k) logits.push_back(ad::element(s, k));
        const ad::Var lse = ad::smooth_max(logits, 1.0);
        for (std::size_t k : r.context) terms.push_back(lse - logits[k]);
    }
    const ad::Var loss = ad::add_all(terms);
    t.backward(loss);
    *d_in = t.grad(win);
    *d_out = t.grad(wout);
    return t.scalar(loss);
}

std::vector<SkipGramRecord> random_records(std::size_t M, std::size_t count, std::size_t P, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<SkipGramRecord> out;
    for (std::size_t n = 0; n < count; ++n) {
        SkipGramRecord r;
        r.center = rng() % M;
        while (r.context.size() < P) {
            const std::size_t k = rng() % M;
            if (k != r.center && std::find(r.context.begin(), r.context.end(), k) == r.context.end()) {
                r.context.push_back(k);
                r.rho_context.push_back(0.0);
            }
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST(SelectContexts, ClosestTwo) {
    EXPECT_EQ(contexts(0, {0.3, 0.2, -0.5, 0.1, 0.25}, 2), (Contexts{{4, 1}}));
}

TEST(SelectContexts, TiedValuesGiveOneRecordPerCombination) {
    EXPECT_EQ(contexts(0, {0.3, 0.2, -0.5, 0.2, 0.1}, 2), (Contexts{{1, 4}, {3, 4}}));
}

TEST(SelectContexts, AllOthersSortedByCloseness) {
    EXPECT_EQ(contexts(0, {0.3, 0.2, -0.5, 0.1, 0.25}, 4), (Contexts{{4, 1, 3, 2}}));
    EXPECT_EQ(contexts(2, {0.3, 0.2, -0.5, 0.2, 0.1}, 4), (Contexts{{4, 1, 3, 0}}));
}

TEST(SelectContexts, FewerGroupsThanSlotsAndCap) {
    // two groups: {1,2,3} at distance 1 and {4} at distance 2
    EXPECT_EQ(contexts(0, {0, 1, 1, 1, 2}, 3), (Contexts{{1, 2, 4}, {1, 3, 4}, {2, 3, 4}}));
    EXPECT_EQ(contexts(0, {0, 1, 1, 1, 2}, 3, 2), (Contexts{{1, 2, 4}, {1, 3, 4}}));
    std::vector<double> flat(30, 1.0);
    flat[0] = 0.0;
    EXPECT_EQ(contexts(0, flat, 2).size(), 20u);
    EXPECT_THROW(contexts(0, {0, 1}, 2), InvalidArgument);
}

TEST(SelectContexts, ToleranceMergesNearlyEqualValues) {
    const std::vector<double> rho{0.3, 0.2, -0.5, 0.2 + 1e-12, 0.1};
    EXPECT_EQ(embed::select_contexts(0, rho, {2, 20, 0.0}), (Contexts{{3, 1}}));
    EXPECT_EQ(embed::select_contexts(0, rho, {2, 20, 1e-9}), (Contexts{{1, 4}, {3, 4}}));
}

// Property: the context uses the closest groups, one slot each while slots last.
TEST(SelectContexts, RankingPropertyOnRandomValues) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t M = 3 + rng() % 8;
        std::vector<double> rho(M);
        for (auto& v : rho) v = static_cast<double>(static_cast<int>(rng() % 5)) * 0.25;  // many ties
        const std::size_t center = rng() % M;
        const std::size_t P = 1 + rng() % (M - 1);
        for (const auto& ctx : contexts(center, rho, P)) {
            ASSERT_EQ(ctx.size(), P);
            std::set<std::size_t> uniq(ctx.begin(), ctx.end());
            EXPECT_EQ(uniq.size(), P);
            EXPECT_EQ(uniq.count(center), 0u);
            std::map<double, std::size_t> used;  // value -> slots
            for (std::size_t j : ctx) ++used[rho[j]];
            std::map<double, std::size_t> avail;
            for (std::size_t j = 0; j < M; ++j)
                if (j != center) ++avail[rho[j]];
            // a group left out entirely must be no closer than every used group
            for (const auto& [v, n] : avail) {
                if (used.count(v)) continue;
                for (const auto& [u, c] : used) {
                    EXPECT_GE(std::abs(v - rho[center]), std::abs(u - rho[center]));
                    EXPECT_EQ(c, 1u);  // a second slot is taken only once every group has one
                }
            }
            // distances along the context never decrease
            for (std::size_t k = 1; k < ctx.size(); ++k) {
                if (used.size() == avail.size()) break;
                EXPECT_LE(std::abs(rho[ctx[k - 1]] - rho[center]), std::abs(rho[ctx[k]] - rho[center]));
            }
        }
    }
}

TEST(Encode, OneHot) {
    for (std::size_t i = 0; i < 6; ++i) {
        const auto e = embed::encode(i, 6);
        EXPECT_EQ((e.array() != 0.0).count(), 1);
        EXPECT_EQ(e(static_cast<Eigen::Index>(i)), 1.0);
    }
    EXPECT_THROW(embed::encode(6, 6), InvalidArgument);
}

TEST(SkipGram, ClosedFormGradientMatchesTape) {
    const auto model = embed::init_model(7, 4, 3);
    embed::EmbeddingModel scaled{model.w_in * 40.0, model.w_out * 40.0};
    const auto records = random_records(7, 25, 3, 5);
    const auto lg = embed::skipgram_loss(scaled, records);
    Eigen::MatrixXd d_in, d_out;
    const double loss = tape_loss(scaled, records, &d_in, &d_out);
    EXPECT_NEAR(lg.loss, loss, 1e-10 * loss);
    EXPECT_LT((lg.d_in - d_in).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((lg.d_out - d_out).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SkipGram, SingleRecordConverges) {
    const std::vector<SkipGramRecord> records{{0, {1}, 0.0, {0.0}}};
    embed::SkipGramConfig cfg;
    cfg.dimension = 4;
    cfg.epochs = 1000;
    const auto trained = embed::train_skipgram(records, 2, cfg);
    const Eigen::VectorXd s = trained.model.w_out.transpose() * embed::embed(trained.model, 0);
    const double p1 = 1.0 / (1.0 + std::exp(s(0) - s(1)));
    EXPECT_GT(p1, 0.99);
}

TEST(SkipGram, ZeroEpochsReturnsInit) {
    const auto records = random_records(5, 4, 2, 1);
    embed::SkipGramConfig cfg;
    cfg.dimension = 3;
    cfg.epochs = 0;
    cfg.seed = 12;
    const auto trained = embed::train_skipgram(records, 5, cfg);
    const auto init = embed::init_model(5, 3, 12);
    EXPECT_EQ(trained.model.w_in, init.w_in);
    EXPECT_EQ(trained.model.w_out, init.w_out);
    EXPECT_LE(init.w_in.cwiseAbs().maxCoeff(), 0.5 / 3);
}

TEST(SkipGram, DuplicatedDatasetFollowsSameUpdates) {
    const auto records = random_records(6, 10, 2, 2);
    std::vector<SkipGramRecord> twice;
    for (const auto& r : records) {
        twice.push_back(r);
        twice.push_back(r);
    }
    embed::SkipGramConfig cfg;
    cfg.dimension = 5;
    for (std::size_t epochs : {1u, 10u, 50u}) {
        cfg.epochs = epochs;
        cfg.adam_epsilon = 1e-8;
        const auto a = embed::train_skipgram(records, 6, cfg);
        // doubling the gradient and the stabiliser leaves each Adam update unchanged
        cfg.adam_epsilon = 2e-8;
        const auto b = embed::train_skipgram(twice, 6, cfg);
        EXPECT_LT((a.model.w_in - b.model.w_in).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((a.model.w_out - b.model.w_out).cwiseAbs().maxCoeff(), 1e-12);
        for (std::size_t k = 0; k < a.epoch_loss.size(); ++k) {
            EXPECT_NEAR(2.0 * a.epoch_loss[k], b.epoch_loss[k], 1e-12 * b.epoch_loss[k]);
        }
    }
}

TEST(SkipGram, LossDecreasesAndStaysFinite) {
    const auto records = random_records(12, 60, 2, 9);
    embed::SkipGramConfig cfg;
    cfg.epochs = 100;
    const auto trained = embed::train_skipgram(records, 12, cfg);
    EXPECT_LT(trained.epoch_loss.back(), trained.epoch_loss.front());
    EXPECT_TRUE(trained.model.w_in.allFinite());
    cfg.batch_size = 16;
    const auto mini = embed::train_skipgram(records, 12, cfg);
    EXPECT_LT(mini.epoch_loss.back(), mini.epoch_loss.front());
    EXPECT_THROW(embed::train_skipgram(std::vector<SkipGramRecord>{}, 3, cfg), InvalidArgument);
}

TEST(Similarity, CosineExamples) {
    const Eigen::Vector2d a(1, 0), b(0, 1), c(-1, 0);
    EXPECT_EQ(embed::cosine_similarity(a, a), 1.0);
    EXPECT_EQ(embed::cosine_similarity(a, b), 0.0);
    EXPECT_EQ(embed::cosine_similarity(a, c), -1.0);
    const Eigen::Vector3d z(0.3, -1.2, 2.0);
    EXPECT_NEAR(embed::cosine_similarity(z, z), 1.0, 1e-15);
    EXPECT_THROW(embed::cosine_similarity(a, Eigen::Vector2d::Zero()), InvalidArgument);
}

TEST(Similarity, EmbedAndNearest) {
    embed::EmbeddingModel id{Eigen::MatrixXd::Identity(6, 6), Eigen::MatrixXd::Identity(6, 6)};
    EXPECT_EQ(embed::embed(id, 2), embed::encode(2, 6));
    EXPECT_THROW(embed::embed(id, 6), InvalidArgument);

    id.w_in.row(5) = id.w_in.row(0);
    const auto nn = embed::nearest(id, 0, 1);
    ASSERT_EQ(nn.size(), 1u);
    EXPECT_EQ(nn[0].index, 5u);
    EXPECT_EQ(nn[0].similarity, 1.0);
    EXPECT_THROW(embed::nearest(id, 0, 6), InvalidArgument);

    const auto model = embed::init_model(9, 4, 77);
    for (std::size_t i = 0; i < 9; ++i) {
        const auto all = embed::nearest(model, i, 8);
        std::set<std::size_t> seen;
        for (const auto& n : all) seen.insert(n.index);
        EXPECT_EQ(seen.size(), 8u);
        EXPECT_EQ(seen.count(i), 0u);
        // brute force: sort every pair by similarity, then index
        std::vector<std::pair<double, std::size_t>> ref;
        for (std::size_t j = 0; j < 9; ++j) {
            if (j == i) continue;
            const Eigen::VectorXd zi = model.w_in.row(i), zj = model.w_in.row(j);
            ref.emplace_back(-zi.dot(zj) / (zi.norm() * zj.norm()), j);
        }
        std::sort(ref.begin(), ref.end());
        for (std::size_t k = 0; k < 8; ++k) {
            EXPECT_EQ(all[k].index, ref[k].second);
            EXPECT_EQ(all[k].similarity, embed::cosine_similarity(embed::embed(model, i), embed::embed(model, all[k].index)));
        }
    }
}

TEST(Io, DatasetAndEmbeddingRoundTrip) {
    std::vector<SkipGramRecord> records{{0, {4, 1}, 0.3, {0.25, 0.2}}, {2, {3}, -1.0 / 3.0, {1e-17}}};
    std::stringstream ss;
    ss << "# seed 4\n";
    embed::write_dataset(ss, records);
    EXPECT_EQ(embed::read_dataset(ss), records);

    std::stringstream bad("0\t1,2\t0.5\t0.1\n");
    EXPECT_THROW(embed::read_dataset(bad), ParseError);

    const auto model = embed::init_model(4, 3, 1);
    std::stringstream es;
    embed::write_embedding(es, model);
    EXPECT_EQ(embed::read_matrix(es), model.w_in);
}

TEST(GenerateDataset, IntegratorSpecsAreDeterministic) {
    embed::SpecSet specs;
    for (const char* s : {"F[0,4] x1 > 1", "F[0,4] x1 > 2", "G[0,4] x1 < 0.5", "F[0,4] x1 < -1", "F[0,4] x1 > 1 or F[0,4] x1 < -1"})
        specs.specs.push_back(stl::parse(s, 1));
    trajopt::Integrator dyn(-1.0, 1.0);
    const auto sampler = embed::uniform_box_sampler({Eigen::VectorXd::Constant(1, -0.2), Eigen::VectorXd::Constant(1, 0.2)});
    embed::DatasetConfig cfg;
    cfg.iterations = 2;
    cfg.opt.T = 4;
    cfg.opt.iterations = 60;
    cfg.opt.restarts = 2;
    cfg.seed = 3;
    cfg.threads = 3;
    const auto a = embed::generate_dataset(specs, dyn, sampler, cfg);
    cfg.threads = 1;
    const auto b = embed::generate_dataset(specs, dyn, sampler, cfg);
    EXPECT_EQ(a.records, b.records);
    ASSERT_EQ(a.tasks.size(), 10u);
    for (std::size_t k = 0; k < a.tasks.size(); ++k) {
        const auto& t = a.tasks[k];
        EXPECT_EQ(t.spec, k / 2);
        EXPECT_EQ(t.iteration, k % 2);
        EXPECT_TRUE(t.success) << t.spec;
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(t.rho[j], stl::robustness(specs.specs[j], t.trajectory));
    }
    // each record's stored robustness values come from one of its center's tasks
    for (const auto& r : a.records) {
        bool found = false;
        for (const auto& t : a.tasks) {
            if (t.spec != r.center || t.rho[r.center] != r.rho_center) continue;
            bool same = true;
            for (std::size_t k = 0; k < r.context.size(); ++k) same = same && t.rho[r.context[k]] == r.rho_context[k];
            found = found || same;
        }
        EXPECT_TRUE(found);
        EXPECT_EQ(r.context.size(), 2u);
    }
    cfg.context.P = 5;
    EXPECT_THROW(embed::generate_dataset(specs, dyn, sampler, cfg), InvalidArgument);
}
