#pragma once

// Skip-gram training data from robustness closeness.
//
// For a center spec i with robustness rho_i on its optimised trajectory, the
// other specs are grouped by equal robustness value and the groups are ranked
// by |rho_i - rho_g|. Context slots are handed out one per group in rank order
// (further passes if there are fewer groups than slots), and every choice of
// members inside the partially used groups becomes its own record.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stl2vec/error.hpp"
#include "stl2vec/stl/formula.hpp"
#include "stl2vec/stl/robustness.hpp"
#include "stl2vec/trajopt/optimize.hpp"
#include "stl2vec/util/parallel.hpp"
#include "stl2vec/util/random.hpp"

namespace stl2vec::embed {

struct SpecSet {
    std::vector<stl::Formula> specs;
    std::vector<std::string> names;

    std::size_t size() const noexcept { return specs.size(); }
    void validate() const {
        if (specs.size() < 2) throw InvalidArgument("a spec set needs at least two specifications");
        if (!names.empty() && names.size() != specs.size()) throw DimensionError("spec names do not match specs");
    }
};

/// One-hot vector e_i of length m.
inline Eigen::VectorXd encode(std::size_t i, std::size_t m) {
    if (i >= m) throw InvalidArgument("one-hot index out of range");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    e(static_cast<Eigen::Index>(i)) = 1.0;
    return e;
}

struct SkipGramRecord {
    std::size_t center = 0;
    std::vector<std::size_t> context;
    double rho_center = 0.0;
    std::vector<double> rho_context;

    bool operator==(const SkipGramRecord&) const = default;
};

struct ContextOptions {
    std::size_t P = 2;
    /// Records emitted per center at most.
    std::size_t cap = 20;
    /// Robustness values closer than this are treated as tied.
    double tie_tolerance = 0.0;
};

/// A run of equal-robustness candidates.
struct TieGroup {
    std::vector<std::size_t> members;  // ascending
    double distance = 0.0;
};

/// Candidates j != center grouped by robustness value and ranked by closeness.
inline std::vector<TieGroup> closeness_groups(std::size_t center, std::span<const double> rho, double tie_tolerance) {
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < rho.size(); ++j)
        if (j != center) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rho[a] < rho[b]; });

    std::vector<TieGroup> groups;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t j = order[k];
        if (k == 0 || !(std::abs(rho[j] - rho[order[k - 1]]) <= tie_tolerance)) groups.emplace_back();
        groups.back().members.push_back(j);
    }
    for (auto& g : groups) {
        std::sort(g.members.begin(), g.members.end());
        g.distance = INFINITY;
        for (std::size_t j : g.members) g.distance = std::min(g.distance, std::abs(rho[center] - rho[j]));
    }
    std::stable_sort(groups.begin(), groups.end(), [](const TieGroup& a, const TieGroup& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.members.front() < b.members.front();
    });
    return groups;
}

/// Every context selection for one center, in emission order.
inline std::vector<std::vector<std::size_t>> select_contexts(std::size_t center, std::span<const double> rho,
                                                             const ContextOptions& opt) {
    if (center >= rho.size()) throw InvalidArgument("center index out of range");
    if (opt.P < 1 || opt.P > rho.size() - 1) throw InvalidArgument("P must be in [1, M-1]");
    if (opt.cap < 1) throw InvalidArgument("record cap must be >= 1");

    const auto groups = closeness_groups(center, rho, opt.tie_tolerance);
    std::vector<std::size_t> quota(groups.size(), 0);
    for (std::size_t left = opt.P; left > 0;) {
        for (std::size_t g = 0; g < groups.size() && left > 0; ++g) {
            if (quota[g] < groups[g].members.size()) {
                ++quota[g];
                --left;
            }
        }
    }

    // Lexicographic q-subsets of each used group.
    std::vector<std::vector<std::vector<std::size_t>>> choices;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (quota[g] == 0) continue;
        const auto& mem = groups[g].members;
        std::vector<std::vector<std::size_t>> subsets;
        std::vector<std::size_t> idx(quota[g]);
        std::iota(idx.begin(), idx.end(), 0);
        for (;;) {
            std::vector<std::size_t> s;
            for (std::size_t i : idx) s.push_back(mem[i]);
            subsets.push_back(std::move(s));
            if (subsets.size() >= opt.cap) break;
            std::size_t k = idx.size();
            while (k > 0 && idx[k - 1] == mem.size() - idx.size() + k - 1) --k;
            if (k == 0) break;
            ++idx[k - 1];
            for (std::size_t r = k; r < idx.size(); ++r) idx[r] = idx[r - 1] + 1;
        }
        choices.push_back(std::move(subsets));
    }

    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> odometer(choices.size(), 0);
    while (out.size() < opt.cap) {
        std::vector<std::size_t> ctx;
        for (std::size_t g = 0; g < choices.size(); ++g) {
            const auto& s = choices[g][odometer[g]];
            ctx.insert(ctx.end(), s.begin(), s.end());
        }
        out.push_back(std::move(ctx));
        std::size_t g = choices.size();
        while (g > 0 && ++odometer[g - 1] == choices[g - 1].size()) odometer[--g] = 0;
        if (g == 0) break;
    }
    return out;
}

inline std::vector<SkipGramRecord> make_records(std::size_t center, std::span<const double> rho,
                                                const ContextOptions& opt) {
    std::vector<SkipGramRecord> out;
    for (auto& ctx : select_contexts(center, rho, opt)) {
        SkipGramRecord r;
        r.center = center;
        r.rho_center = rho[center];
        for (std::size_t j : ctx) r.rho_context.push_back(rho[j]);
        r.context = std::move(ctx);
        out.push_back(std::move(r));
    }
    return out;
}

/// Draws an initial state from the initial-state distribution.
using InitialSampler = std::function<Eigen::VectorXd(std::mt19937_64&)>;

inline InitialSampler uniform_box_sampler(trajopt::Box box) {
    return [box = std::move(box)](std::mt19937_64& rng) {
        Eigen::VectorXd x(box.lo.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            x(k) = box.lo(k) == box.hi(k) ? box.lo(k) : std::uniform_real_distribution<double>(box.lo(k), box.hi(k))(rng);
        }
        return x;
    };
}

struct DatasetConfig {
    ContextOptions context;
    std::size_t iterations = 1;  // optimisation runs per spec
    trajopt::OptConfig opt;
    /// Keep records whose optimised trajectory violates its own spec.
    bool keep_failures = true;
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0: default_threads()
};

/// Outcome of one (spec, iteration) optimisation.
struct TaskOutcome {
    std::size_t spec = 0;
    std::size_t iteration = 0;
    Eigen::VectorXd x0;
    std::vector<double> rho;  // every spec on the optimised trajectory
    std::vector<Eigen::VectorXd> trajectory;
    bool success = false;
    bool skipped = false;
};

struct Dataset {
    std::vector<SkipGramRecord> records;
    std::vector<TaskOutcome> tasks;  // ordered by (spec, iteration)
};

inline Dataset generate_dataset(const SpecSet& specs, const trajopt::DynamicsModel& dyn, const InitialSampler& sampler,
                                const DatasetConfig& cfg) {
    specs.validate();
    if (cfg.iterations < 1) throw InvalidArgument("iterations per spec must be >= 1");
    if (cfg.context.P < 1 || cfg.context.P > specs.size() - 1) throw InvalidArgument("P must be in [1, M-1]");

    const std::size_t M = specs.size();
    std::vector<TaskOutcome> tasks(M * cfg.iterations);
    util::parallel_for(tasks.size(), cfg.threads, [&](std::size_t k) {
        TaskOutcome& out = tasks[k];
        out.spec = k / cfg.iterations;
        out.iteration = k % cfg.iterations;
        std::mt19937_64 rng(util::derive_seed(cfg.seed, {out.spec, out.iteration, 0}));
        out.x0 = sampler(rng);
        trajopt::OptConfig oc = cfg.opt;
        oc.seed = util::derive_seed(cfg.seed, {out.spec, out.iteration, 1});
        try {
            const auto res = trajopt::optimize(specs.specs[out.spec], out.x0, dyn, oc);
            out.trajectory = res.trajectory;
            out.rho.resize(M);
            for (std::size_t j = 0; j < M; ++j) out.rho[j] = stl::robustness(specs.specs[j], res.trajectory);
            out.success = res.success();
        } catch (const NumericalError& e) {
            out.skipped = true;
            std::clog << "warning: spec " << out.spec << " iteration " << out.iteration << " skipped: " << e.what()
                      << "\n";
        }
    });

    Dataset ds;
    for (const auto& t : tasks) {
        if (t.skipped || (!t.success && !cfg.keep_failures)) continue;
        for (auto& r : make_records(t.spec, t.rho, cfg.context)) ds.records.push_back(std::move(r));
    }
    ds.tasks = std::move(tasks);
    return ds;
}

}  // namespace stl2vec::embed
