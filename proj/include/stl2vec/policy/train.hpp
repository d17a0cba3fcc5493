#pragma once

// Specification-conditioned controller training.
//
// Each epoch shuffles the specs into batches. For a batch B, L initial states
// are drawn and every (spec, state) pair is rolled out on its own tape; the
// loss is -(1/(|B| L)) sum rho and the per-rollout gradients are summed in
// (spec, state) order before one Adam step.

#include <Eigen/Dense>

#include <charconv>
#include <chrono>
#include <optional>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stl2vec/ad/adam.hpp"
#include "stl2vec/ad/tape.hpp"
#include "stl2vec/embed/dataset.hpp"
#include "stl2vec/error.hpp"
#include "stl2vec/policy/encoding.hpp"
#include "stl2vec/policy/lstm.hpp"
#include "stl2vec/stl/robustness.hpp"
#include "stl2vec/util/parallel.hpp"
#include "stl2vec/util/random.hpp"

namespace stl2vec::policy {

/// Random permutation of 0..M-1 cut into floor(M / batch) batches; the
/// remainder joins the last batch.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t M, std::size_t batch, std::uint64_t seed) {
    if (batch < 1 || batch > M) throw InvalidArgument("batch size must be in [1, M]");
    std::vector<std::size_t> perm(M);
    for (std::size_t i = 0; i < M; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    util::shuffle(perm, rng);
    const std::size_t count = M / batch;
    std::vector<std::vector<std::size_t>> out(count);
    for (std::size_t k = 0; k < M; ++k) out[std::min(k / batch, count - 1)].push_back(perm[k]);
    return out;
}

inline std::vector<Eigen::VectorXd> sample_initial_states(const embed::InitialSampler& sampler, std::size_t count,
                                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) out.push_back(sampler(rng));
    return out;
}

inline void check_horizons(const embed::SpecSet& specs, std::size_t T) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (stl::horizon(specs.specs[i]) > T) {
            throw HorizonError("spec " + std::to_string(i) + " has horizon " +
                               std::to_string(stl::horizon(specs.specs[i])) + " > T = " + std::to_string(T));
        }
    }
}

struct Evaluation {
    std::vector<double> per_spec;  // mean exact robustness per spec
    double mean = 0.0;             // mean of per_spec
};

/// Mean exact robustness of closed-loop rollouts from `initial_states`.
/// `policies` holds one shared policy or one policy per spec.
inline Evaluation evaluate(std::span<const LstmPolicy> policies, const embed::SpecSet& specs, const SpecEncoding& enc,
                           const trajopt::DynamicsModel& dyn, std::span<const Eigen::VectorXd> initial_states,
                           std::size_t T, std::size_t threads = 1) {
    if (initial_states.empty()) throw InvalidArgument("evaluation needs at least one initial state");
    if (policies.size() != 1 && policies.size() != specs.size()) {
        throw InvalidArgument("evaluate: expected one policy or one per spec");
    }
    check_horizons(specs, T);
    Evaluation ev;
    ev.per_spec.assign(specs.size(), 0.0);
    util::parallel_for(specs.size(), threads, [&](std::size_t i) {
        const LstmPolicy& p = policies.size() == 1 ? policies[0] : policies[i];
        const Eigen::VectorXd z = enc.dim() > 0 ? enc(i) : Eigen::VectorXd();
        double total = 0.0;
        for (const auto& x0 : initial_states) total += stl::robustness(specs.specs[i], rollout(p, dyn, x0, z, T).states);
        ev.per_spec[i] = total / static_cast<double>(initial_states.size());
    });
    double sum = 0.0;
    for (double v : ev.per_spec) sum += v;
    ev.mean = sum / static_cast<double>(specs.size());
    return ev;
}

inline Evaluation evaluate(const LstmPolicy& policy, const embed::SpecSet& specs, const SpecEncoding& enc,
                           const trajopt::DynamicsModel& dyn, std::span<const Eigen::VectorXd> initial_states,
                           std::size_t T, std::size_t threads = 1) {
    return evaluate(std::span<const LstmPolicy>(&policy, 1), specs, enc, dyn, initial_states, T, threads);
}

/// One rollout-and-score unit of a batch.
struct RolloutTask {
    std::size_t spec;
    Eigen::VectorXd x0;
};

/// Loss -(1/|tasks|) sum rho built on `tape` from parameter leaves `w`.
inline ad::Var batch_loss_graph(ad::Tape& tape, std::span<const ad::Var> w, const LstmPolicy& p,
                                const embed::SpecSet& specs, const SpecEncoding& enc, const trajopt::DynamicsModel& dyn,
                                std::span<const RolloutTask> tasks, std::size_t T, stl::SmoothConfig mode) {
    std::vector<ad::Var> rho;
    for (const auto& task : tasks) {
        const Eigen::VectorXd z = enc.dim() > 0 ? enc(task.spec) : Eigen::VectorXd();
        const auto xs = rollout(tape, p, w, dyn, task.x0, z, T);
        rho.push_back(stl::robustness(tape, specs.specs[task.spec], xs, mode));
    }
    return (-1.0 / static_cast<double>(tasks.size())) * ad::add_all(rho);
}

struct BatchGradient {
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> grads;
};

/// Same loss and gradient with one tape per task, reduced in task order.
inline BatchGradient batch_gradient(const LstmPolicy& p, const embed::SpecSet& specs, const SpecEncoding& enc,
                                    const trajopt::DynamicsModel& dyn, std::span<const RolloutTask> tasks,
                                    std::size_t T, stl::SmoothConfig mode, std::size_t threads) {
    if (tasks.empty()) throw InvalidArgument("empty batch");
    std::vector<double> rho(tasks.size());
    std::vector<std::vector<Eigen::MatrixXd>> per(tasks.size());
    util::parallel_for(tasks.size(), threads, [&](std::size_t k) {
        ad::Tape tape;
        std::vector<ad::Var> w;
        for (const auto& m : p.params()) w.push_back(tape.variable(m));
        const Eigen::VectorXd z = enc.dim() > 0 ? enc(tasks[k].spec) : Eigen::VectorXd();
        const auto xs = rollout(tape, p, w, dyn, tasks[k].x0, z, T);
        const ad::Var r = stl::robustness(tape, specs.specs[tasks[k].spec], xs, mode);
        tape.backward(r);
        rho[k] = tape.scalar(r);
        for (const auto& v : w) per[k].push_back(tape.grad(v));
    });
    const double scale = -1.0 / static_cast<double>(tasks.size());
    BatchGradient out;
    for (const auto& m : p.params()) out.grads.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        out.loss += rho[k];
        for (std::size_t b = 0; b < out.grads.size(); ++b) out.grads[b] += per[k][b];
    }
    out.loss *= scale;
    for (auto& g : out.grads) g *= scale;
    return out;
}

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 4;      // specs per batch
    std::size_t initial_states = 3;  // per batch
    std::size_t T = 20;
    std::size_t hidden = 16;
    std::size_t layers = 1;
    double learning_rate = 0.01;
    stl::SmoothConfig mode = stl::SmoothConfig::exact();
    std::uint64_t seed = 0;
    std::size_t eval_every = 10;
    std::size_t eval_samples = 30;
    std::uint64_t eval_seed = 12345;
    std::size_t threads = 0;

    void validate(std::size_t M) const {
        if (batch_size < 1 || batch_size > M) throw InvalidArgument("batch size must be in [1, M]");
        if (initial_states < 1) throw InvalidArgument("initial states per batch must be >= 1");
        if (!(learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
        if (eval_every < 1 || eval_samples < 1) throw InvalidArgument("evaluation cadence and sample count must be >= 1");
        mode.validate();
    }
};

struct LogRow {
    std::size_t epoch = 0;
    double wall_seconds = 0.0;
    Evaluation eval;
};

struct TrainingLog {
    std::vector<LogRow> rows;
    std::vector<double> epoch_loss;  // mean batch loss of epochs 1..E

    /// First logged epoch whose mean robustness is > 0, if any.
    std::optional<std::size_t> first_positive_epoch() const {
        for (const auto& r : rows)
            if (r.eval.mean > 0.0) return r.epoch;
        return std::nullopt;
    }

    void write_csv(std::ostream& os, bool with_time = true) const {
        os << "epoch";
        if (with_time) os << ",wall_seconds";
        os << ",mean_robustness";
        const std::size_t M = rows.empty() ? 0 : rows.front().eval.per_spec.size();
        for (std::size_t i = 0; i < M; ++i) os << ",spec_" << i;
        os << '\n';
        char buf[32];
        auto num = [&](double v) {
            const auto r = std::to_chars(buf, buf + sizeof buf, v);
            return std::string(buf, r.ptr);
        };
        for (const auto& r : rows) {
            os << r.epoch;
            if (with_time) os << ',' << num(r.wall_seconds);
            os << ',' << num(r.eval.mean);
            for (double v : r.eval.per_spec) os << ',' << num(v);
            os << '\n';
        }
    }
};

struct TrainResult {
    LstmPolicy policy;
    TrainingLog log;
};

inline TrainResult train(const embed::SpecSet& specs, const SpecEncoding& enc, const trajopt::DynamicsModel& dyn,
                         const embed::InitialSampler& sampler, const TrainConfig& cfg) {
    if (specs.specs.empty()) throw InvalidArgument("no specifications");
    cfg.validate(specs.size());
    check_horizons(specs, cfg.T);
    if (enc.size() != specs.size()) throw DimensionError("encoding rows do not match the spec count");

    const PolicyShape shape{dyn.state_dim(), enc.dim(), cfg.hidden, cfg.layers, dyn.input_dim()};
    TrainResult out{LstmPolicy::initialised(shape, dyn.u_min(), dyn.u_max(), util::derive_seed(cfg.seed, {0})), {}};
    const auto eval_states = sample_initial_states(sampler, cfg.eval_samples, cfg.eval_seed);
    ad::AdamState adam(ad::AdamConfig{cfg.learning_rate});
    const std::size_t threads = cfg.threads == 0 ? util::default_threads() : cfg.threads;

    const auto start = std::chrono::steady_clock::now();
    auto log_eval = [&](std::size_t epoch) {
        LogRow row;
        row.epoch = epoch;
        row.eval = evaluate(out.policy, specs, enc, dyn, eval_states, cfg.T, threads);
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.log.rows.push_back(std::move(row));
    };
    log_eval(0);

    std::vector<RolloutTask> tasks;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto batches = make_batches(specs.size(), cfg.batch_size, util::derive_seed(cfg.seed, {1, epoch}));
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto x0s =
                sample_initial_states(sampler, cfg.initial_states, util::derive_seed(cfg.seed, {2, epoch, b}));
            tasks.clear();
            for (std::size_t i : batches[b])
                for (const auto& x0 : x0s) tasks.push_back({i, x0});
            auto g = batch_gradient(out.policy, specs, enc, dyn, tasks, cfg.T, cfg.mode, threads);
            if (!std::isfinite(g.loss)) {
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b));
            }
            loss_sum += g.loss;
            adam.step(out.policy.params(), g.grads);
        }
        out.log.epoch_loss.push_back(loss_sum / static_cast<double>(batches.size()));
        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) log_eval(epoch);
    }
    return out;
}

/// One policy per spec, trained on that spec alone with no encoding input.
inline std::vector<TrainResult> train_one_by_one(const embed::SpecSet& specs, const trajopt::DynamicsModel& dyn,
                                                 const embed::InitialSampler& sampler, const TrainConfig& cfg) {
    check_horizons(specs, cfg.T);
    std::vector<std::optional<TrainResult>> slots(specs.size());
    const std::size_t outer = cfg.threads == 0 ? util::default_threads() : cfg.threads;
    util::parallel_for(specs.size(), outer, [&](std::size_t i) {
        embed::SpecSet one{{specs.specs[i]}, {}};
        TrainConfig c = cfg;
        c.batch_size = 1;
        c.seed = util::derive_seed(cfg.seed, {3, i});
        c.threads = 1;
        slots[i] = train(one, SpecEncoding::none(1), dyn, sampler, c);
    });
    std::vector<TrainResult> out;
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Per-epoch log for a set of one-by-one policies: spec i's column comes from policy i.
inline TrainingLog merge_logs(const std::vector<TrainResult>& runs) {
    TrainingLog log;
    if (runs.empty()) return log;
    for (std::size_t r = 0; r < runs.front().log.rows.size(); ++r) {
        LogRow row;
        row.epoch = runs.front().log.rows[r].epoch;
        double sum = 0.0;
        for (const auto& run : runs) {
            const auto& src = run.log.rows.at(r);
            row.wall_seconds = std::max(row.wall_seconds, src.wall_seconds);
            row.eval.per_spec.push_back(src.eval.per_spec.at(0));
            sum += src.eval.per_spec[0];
        }
        row.eval.mean = sum / static_cast<double>(runs.size());
        log.rows.push_back(std::move(row));
    }
    return log;
}

}  // namespace stl2vec::policy
