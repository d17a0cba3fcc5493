#pragma once

// End-to-end experiment: specs -> optimised trajectories -> skip-gram dataset
// -> embedding -> controllers for each requested encoding, with artifacts.

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stl2vec/bench/svg.hpp"
#include "stl2vec/bench/unicycle.hpp"
#include "stl2vec/bench/world.hpp"
#include "stl2vec/embed/dataset.hpp"
#include "stl2vec/embed/io.hpp"
#include "stl2vec/embed/skipgram.hpp"
#include "stl2vec/policy/checkpoint.hpp"
#include "stl2vec/policy/train.hpp"
#include "stl2vec/util/random.hpp"

namespace stl2vec::bench {

using json = nlohmann::json;

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

struct ExperimentConfig {
    RegionMap map;
    Eigen::Vector2d u_min{0.0, -0.5};
    Eigen::Vector2d u_max{1.0, 0.5};
    SpecSelection selection = SpecSelection::training();

    embed::ContextOptions context;
    std::size_t iterations_per_spec = 1;
    bool keep_failures = true;
    trajopt::OptConfig opt;
    embed::SkipGramConfig skipgram;

    std::vector<std::string> encodings{"stl2vec"};
    policy::TrainConfig controller;

    std::vector<std::size_t> similarity_queries;  // empty: every spec
    std::size_t similarity_k = 4;

    std::uint64_t master_seed = 1;
    std::uint64_t eval_seed = 12345;
    std::size_t threads = 0;

    ExperimentConfig() {
        opt.T = 20;
        opt.iterations = 200;
        opt.learning_rate = 0.1;
        opt.restarts = 3;
        opt.epsilon = 0.1;
        opt.beta = 10.0;
    }

    json to_json() const {
        json j;
        j["system"] = {{"u_min", {u_min(0), u_min(1)}},
                       {"u_max", {u_max(0), u_max(1)}},
                       {"initial", {map.initial.xlo, map.initial.xhi, map.initial.ylo, map.initial.yhi}},
                       {"theta0", map.theta0}};
        json regs = json::array();
        for (const auto& r : map.regions) regs.push_back({r.xlo, r.xhi, r.ylo, r.yhi});
        j["regions"] = regs;
        json cp = json::array();
        for (const auto& [a, b] : selection.c_pairs) cp.push_back({a, b});
        json ei = json::array();
        for (const auto& e : selection.e_instances) ei.push_back({e[0], e[1], e[2], e[3]});
        j["specs"] = {{"set", "custom"},
                      {"templates", selection.templates},
                      {"regions", selection.regions},
                      {"subregions", selection.subregions},
                      {"matched_subregions", selection.matched_subregions},
                      {"c_pairs", cp},
                      {"e_instances", ei}};
        j["embedding"] = {{"dimension", skipgram.dimension},
                          {"P", context.P},
                          {"record_cap", context.cap},
                          {"tie_tolerance", context.tie_tolerance},
                          {"iterations_per_spec", iterations_per_spec},
                          {"keep_failures", keep_failures},
                          {"epochs", skipgram.epochs},
                          {"learning_rate", skipgram.learning_rate},
                          {"batch_size", skipgram.batch_size},
                          {"similarity_k", similarity_k},
                          {"similarity_queries", similarity_queries},
                          {"opt",
                           {{"T", opt.T},
                            {"beta", opt.beta},
                            {"iterations", opt.iterations},
                            {"learning_rate", opt.learning_rate},
                            {"restarts", opt.restarts},
                            {"epsilon", opt.epsilon},
                            {"init_sigma", opt.init_sigma}}}};
        j["controller"] = {{"encodings", encodings},
                           {"epochs", controller.epochs},
                           {"batch_size", controller.batch_size},
                           {"initial_states", controller.initial_states},
                           {"T", controller.T},
                           {"hidden", controller.hidden},
                           {"layers", controller.layers},
                           {"learning_rate", controller.learning_rate},
                           {"mode", controller.mode.mode == stl::ExtremumMode::Smooth ? "smooth" : "exact"},
                           {"beta", controller.mode.beta},
                           {"eval_every", controller.eval_every},
                           {"eval_samples", controller.eval_samples}};
        j["seeds"] = {{"master", master_seed}, {"eval", eval_seed}};
        j["threads"] = threads;
        return j;
    }

    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        auto vec2 = [](const json& v) { return Eigen::Vector2d(v.at(0).get<double>(), v.at(1).get<double>()); };
        if (j.contains("system")) {
            const auto& s = j["system"];
            if (s.contains("u_min")) c.u_min = vec2(s["u_min"]);
            if (s.contains("u_max")) c.u_max = vec2(s["u_max"]);
            if (s.contains("initial")) {
                const auto& b = s["initial"];
                c.map.initial = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
            }
            c.map.theta0 = s.value("theta0", c.map.theta0);
        }
        if (j.contains("regions")) {
            const auto& r = j["regions"];
            if (r.size() != 4) throw InvalidArgument("config: exactly four regions expected");
            for (std::size_t k = 0; k < 4; ++k) {
                c.map.regions[k] = {r[k].at(0).get<double>(), r[k].at(1).get<double>(), r[k].at(2).get<double>(),
                                    r[k].at(3).get<double>()};
            }
        }
        if (j.contains("specs")) {
            const auto& s = j["specs"];
            const std::string set = s.value("set", std::string("training"));
            if (set == "full" || set == "custom") {
                c.selection = SpecSelection::full();
            } else if (set == "training") {
                c.selection = SpecSelection::training();
            } else {
                throw InvalidArgument("config: specs.set must be full, training or custom");
            }
            c.selection.templates = s.value("templates", c.selection.templates);
            if (s.contains("regions")) c.selection.regions = s["regions"].get<std::vector<int>>();
            if (s.contains("subregions")) c.selection.subregions = s["subregions"].get<std::vector<int>>();
            c.selection.matched_subregions = s.value("matched_subregions", c.selection.matched_subregions);
            if (s.contains("c_pairs")) {
                c.selection.c_pairs.clear();
                for (const auto& p : s["c_pairs"]) c.selection.c_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
            }
            if (s.contains("e_instances")) {
                c.selection.e_instances.clear();
                for (const auto& p : s["e_instances"])
                    c.selection.e_instances.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>(), p.at(3).get<int>()});
            }
        }
        if (j.contains("embedding")) {
            const auto& e = j["embedding"];
            c.skipgram.dimension = e.value("dimension", c.skipgram.dimension);
            c.context.P = e.value("P", c.context.P);
            c.context.cap = e.value("record_cap", c.context.cap);
            c.context.tie_tolerance = e.value("tie_tolerance", c.context.tie_tolerance);
            c.iterations_per_spec = e.value("iterations_per_spec", c.iterations_per_spec);
            c.keep_failures = e.value("keep_failures", c.keep_failures);
            c.skipgram.epochs = e.value("epochs", c.skipgram.epochs);
            c.skipgram.learning_rate = e.value("learning_rate", c.skipgram.learning_rate);
            c.skipgram.batch_size = e.value("batch_size", c.skipgram.batch_size);
            c.similarity_k = e.value("similarity_k", c.similarity_k);
            if (e.contains("similarity_queries")) c.similarity_queries = e["similarity_queries"].get<std::vector<std::size_t>>();
            if (e.contains("opt")) {
                const auto& o = e["opt"];
                c.opt.T = o.value("T", c.opt.T);
                c.opt.beta = o.value("beta", c.opt.beta);
                c.opt.iterations = o.value("iterations", c.opt.iterations);
                c.opt.learning_rate = o.value("learning_rate", c.opt.learning_rate);
                c.opt.restarts = o.value("restarts", c.opt.restarts);
                c.opt.epsilon = o.value("epsilon", c.opt.epsilon);
                c.opt.init_sigma = o.value("init_sigma", c.opt.init_sigma);
            }
        }
        if (j.contains("controller")) {
            const auto& p = j["controller"];
            if (p.contains("encodings")) c.encodings = p["encodings"].get<std::vector<std::string>>();
            c.controller.epochs = p.value("epochs", c.controller.epochs);
            c.controller.batch_size = p.value("batch_size", c.controller.batch_size);
            c.controller.initial_states = p.value("initial_states", c.controller.initial_states);
            c.controller.T = p.value("T", c.controller.T);
            c.controller.hidden = p.value("hidden", c.controller.hidden);
            c.controller.layers = p.value("layers", c.controller.layers);
            c.controller.learning_rate = p.value("learning_rate", c.controller.learning_rate);
            const std::string mode = p.value("mode", std::string("exact"));
            if (mode != "exact" && mode != "smooth") throw InvalidArgument("config: controller.mode must be exact or smooth");
            c.controller.mode.mode = mode == "smooth" ? stl::ExtremumMode::Smooth : stl::ExtremumMode::ExactSubgradient;
            c.controller.mode.beta = p.value("beta", c.controller.mode.beta);
            c.controller.eval_every = p.value("eval_every", c.controller.eval_every);
            c.controller.eval_samples = p.value("eval_samples", c.controller.eval_samples);
        }
        if (j.contains("seeds")) {
            c.master_seed = j["seeds"].value("master", c.master_seed);
            c.eval_seed = j["seeds"].value("eval", c.eval_seed);
        }
        c.threads = j.value("threads", c.threads);
        for (const auto& e : c.encodings) {
            if (e != "one-by-one") policy::encoding_kind(e);
        }
        return c;
    }

    std::uint64_t hash() const { return fnv1a(to_json().dump()); }

    Unicycle dynamics() const { return Unicycle(u_min, u_max); }
    embed::InitialSampler sampler() const { return embed::uniform_box_sampler(map.initial_box()); }

    embed::DatasetConfig dataset_config() const {
        embed::DatasetConfig d;
        d.context = context;
        d.iterations = iterations_per_spec;
        d.opt = opt;
        d.opt.initial_set = map.initial_box();
        d.keep_failures = keep_failures;
        d.seed = util::derive_seed(master_seed, {10});
        d.threads = threads;
        return d;
    }

    embed::SkipGramConfig skipgram_config() const {
        auto s = skipgram;
        s.seed = util::derive_seed(master_seed, {11});
        return s;
    }

    policy::TrainConfig controller_config() const {
        auto t = controller;
        t.seed = util::derive_seed(master_seed, {12});
        t.eval_seed = eval_seed;
        t.threads = threads;
        return t;
    }
};

struct SimilarityRow {
    std::size_t query;
    std::size_t rank;  // 1-based
    std::size_t neighbour;
    double similarity;
};

inline std::vector<SimilarityRow> report_similarities(const embed::EmbeddingModel& model, std::vector<std::size_t> queries,
                                                      std::size_t k) {
    if (model.vocabulary() < 2 || model.dimension() < 1) throw InvalidArgument("similarity report needs a trained model");
    if (queries.empty())
        for (std::size_t i = 0; i < model.vocabulary(); ++i) queries.push_back(i);
    k = std::min(k, model.vocabulary() - 1);
    std::vector<SimilarityRow> rows;
    for (std::size_t q : queries) {
        const auto nn = embed::nearest(model, q, k);
        for (std::size_t r = 0; r < nn.size(); ++r) rows.push_back({q, r + 1, nn[r].index, nn[r].similarity});
    }
    return rows;
}

inline void write_similarity_csv(std::ostream& os, const std::vector<SimilarityRow>& rows) {
    os << "query,rank,neighbour,similarity\n";
    for (const auto& r : rows) os << r.query << ',' << r.rank << ',' << r.neighbour << ',' << embed::detail::shortest(r.similarity) << '\n';
}

/// Table with one block per query: rank, neighbour name, similarity to 3 decimals.
inline void render_similarity(std::ostream& os, const std::vector<SimilarityRow>& rows, const embed::SpecSet& specs) {
    auto name = [&](std::size_t i) { return i < specs.names.size() ? specs.names[i] : specs.specs.at(i).to_string(); };
    std::size_t last = static_cast<std::size_t>(-1);
    for (const auto& r : rows) {
        if (r.query != last) {
            os << (last == static_cast<std::size_t>(-1) ? "" : "\n") << "query " << r.query << ": " << name(r.query) << '\n';
            last = r.query;
        }
        os << "  " << r.rank << "  " << std::left << std::setw(60) << name(r.neighbour) << std::right << ' '
           << std::fixed << std::setprecision(3) << r.similarity << std::defaultfloat << '\n';
    }
}

struct PipelineResult {
    embed::SpecSet specs;
    embed::Dataset dataset;
    embed::TrainedEmbedding embedding;
    std::map<std::string, policy::TrainingLog> logs;
    std::map<std::string, std::vector<policy::LstmPolicy>> policies;
    std::vector<std::pair<std::string, double>> stage_seconds;
};

namespace detail {

class Artifacts {
public:
    Artifacts(std::filesystem::path dir, std::string stamp) : dir_(std::move(dir)), stamp_(std::move(stamp)) {
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }
    bool enabled() const { return !dir_.empty(); }
    const std::string& stamp() const { return stamp_; }

    template <typename Fn>
    void write(const std::string& name, Fn&& fn) {
        if (!enabled()) return;
        std::ofstream os(dir_ / name);
        if (!os) throw Error("cannot write " + (dir_ / name).string());
        fn(os);
        if (!os) throw Error("write failed for " + (dir_ / name).string());
        files_.push_back(name);
    }
    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::string stamp_;
    std::vector<std::string> files_;
};

template <typename Fn>
auto stage(const std::string& name, std::vector<std::pair<std::string, double>>& times, std::ostream* progress, Fn&& fn) {
    if (progress) *progress << "[" << name << "] start\n" << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        times.emplace_back(name, dt);
        if (progress) *progress << "[" << name << "] done in " << dt << " s\n" << std::flush;
    };
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto r = fn();
            finish();
            return r;
        }
    } catch (const std::exception& e) {
        throw Error("stage " + name + ": " + e.what());
    }
}

inline void write_trajectory_rows(std::ostream& os, const std::string& key, const std::vector<Eigen::VectorXd>& xs) {
    for (std::size_t t = 0; t < xs.size(); ++t) {
        os << key << ',' << t;
        for (Eigen::Index k = 0; k < xs[t].size(); ++k) os << ',' << embed::detail::shortest(xs[t](k));
        os << '\n';
    }
}

}  // namespace detail

/// Runs every stage; writes artifacts under `out` unless it is empty.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out = {},
                                   std::ostream* progress = nullptr) {
    const std::string stamp = "config_hash=" + hex(cfg.hash()) + " seed=" + std::to_string(cfg.master_seed);
    detail::Artifacts art(out, stamp);
    PipelineResult res;
    auto manifest = [&](const std::string& error) {
        if (!art.enabled()) return;
        json m;
        m["config"] = cfg.to_json();
        m["config_hash"] = hex(cfg.hash());
        m["seed"] = cfg.master_seed;
        m["status"] = error.empty() ? "ok" : "failed";
        if (!error.empty()) m["error"] = error;
        m["spec_count"] = res.specs.size();
        m["record_count"] = res.dataset.records.size();
        std::size_t ok = 0;
        for (const auto& t : res.dataset.tasks) ok += t.success ? 1 : 0;
        m["optimization_successes"] = ok;
        m["artifacts"] = art.files();
        json times = json::object();
        for (const auto& [k, v] : res.stage_seconds) times[k] = v;
        m["stage_seconds"] = times;
        std::ofstream os(out / "manifest.json");
        os << m.dump(2) << '\n';
    };
    try {
        const Unicycle dyn = cfg.dynamics();
        const auto sampler = cfg.sampler();

        res.specs = detail::stage("specs", res.stage_seconds, progress, [&] { return build_specs(cfg.map, cfg.selection); });
        res.specs.validate();
        art.write("specs.tsv", [&](std::ostream& os) {
            os << "# " << stamp << '\n';
            for (std::size_t i = 0; i < res.specs.size(); ++i)
                os << i << '\t' << res.specs.names[i] << '\t' << res.specs.specs[i].to_string() << '\n';
        });

        res.dataset = detail::stage("dataset", res.stage_seconds, progress,
                                    [&] { return embed::generate_dataset(res.specs, dyn, sampler, cfg.dataset_config()); });
        art.write("dataset.tsv", [&](std::ostream& os) {
            os << "# " << stamp << '\n';
            embed::write_dataset(os, res.dataset.records);
        });
        art.write("optimized_trajectories.csv", [&](std::ostream& os) {
            os << "# " << stamp << "\nspec,iteration,success,t,qx,qy,theta\n";
            for (const auto& t : res.dataset.tasks) {
                if (t.skipped) continue;
                detail::write_trajectory_rows(
                    os, std::to_string(t.spec) + ',' + std::to_string(t.iteration) + ',' + (t.success ? "1" : "0"), t.trajectory);
            }
        });

        res.embedding = detail::stage("embedding", res.stage_seconds, progress, [&] {
            return embed::train_skipgram(res.dataset.records, res.specs.size(), cfg.skipgram_config());
        });
        art.write("embedding.txt", [&](std::ostream& os) {
            os << "# " << stamp << '\n';
            embed::write_embedding(os, res.embedding.model);
        });
        art.write("skipgram_loss.csv", [&](std::ostream& os) {
            os << "# " << stamp << "\nepoch,loss\n";
            for (std::size_t e = 0; e < res.embedding.epoch_loss.size(); ++e)
                os << e << ',' << embed::detail::shortest(res.embedding.epoch_loss[e]) << '\n';
        });
        const auto sims = report_similarities(res.embedding.model, cfg.similarity_queries, cfg.similarity_k);
        art.write("similarity.csv", [&](std::ostream& os) {
            os << "# " << stamp << '\n';
            write_similarity_csv(os, sims);
        });
        art.write("similarity.txt", [&](std::ostream& os) { render_similarity(os, sims, res.specs); });

        const auto tc = cfg.controller_config();
        const auto eval_states = policy::sample_initial_states(sampler, 1, cfg.eval_seed);
        for (const auto& name : cfg.encodings) {
            detail::stage("controller:" + name, res.stage_seconds, progress, [&] {
                std::vector<policy::LstmPolicy> pols;
                policy::SpecEncoding enc;
                if (name == "one-by-one") {
                    auto runs = policy::train_one_by_one(res.specs, dyn, sampler, tc);
                    res.logs[name] = policy::merge_logs(runs);
                    for (auto& r : runs) pols.push_back(std::move(r.policy));
                    enc = policy::SpecEncoding::none(1);
                } else {
                    const auto kind = policy::encoding_kind(name);
                    enc = kind == policy::EncodingKind::Stl2vec   ? policy::SpecEncoding::stl2vec(res.embedding.model)
                          : kind == policy::EncodingKind::Integer ? policy::SpecEncoding::integer(res.specs.size())
                          : kind == policy::EncodingKind::OneHot  ? policy::SpecEncoding::one_hot(res.specs.size())
                                                                  : policy::SpecEncoding::none(res.specs.size());
                    auto r = policy::train(res.specs, enc, dyn, sampler, tc);
                    res.logs[name] = std::move(r.log);
                    pols.push_back(std::move(r.policy));
                }
                art.write("log_" + name + ".csv", [&](std::ostream& os) {
                    os << "# " << stamp << '\n';
                    res.logs[name].write_csv(os);
                });
                art.write("controller_" + name + ".ckpt", [&](std::ostream& os) {
                    for (const auto& p : pols) policy::write_checkpoint(os, p, enc);
                });
                // closed-loop trajectory per spec from the first held-out initial state
                std::vector<std::vector<Eigen::VectorXd>> paths;
                art.write("trajectories_" + name + ".csv", [&](std::ostream& os) {
                    os << "# " << stamp << "\nspec,t,qx,qy,theta\n";
                    for (std::size_t i = 0; i < res.specs.size(); ++i) {
                        const auto& p = pols.size() == 1 ? pols[0] : pols[i];
                        const Eigen::VectorXd z = enc.dim() > 0 ? enc(i) : Eigen::VectorXd();
                        auto r = policy::rollout(p, dyn, eval_states[0], z, tc.T);
                        detail::write_trajectory_rows(os, std::to_string(i), r.states);
                        if (paths.size() < 6) paths.push_back(std::move(r.states));
                    }
                });
                std::vector<std::string> labels(res.specs.names.begin(),
                                                res.specs.names.begin() + static_cast<std::ptrdiff_t>(paths.size()));
                art.write("world_" + name + ".svg", [&](std::ostream& os) { svg::world_plot(os, cfg.map, paths, labels, stamp); });
                res.policies[name] = std::move(pols);
            });
        }

        if (!cfg.encodings.empty()) {
            std::vector<svg::Series> series;
            for (const auto& name : cfg.encodings) {
                svg::Series s{name, {}, {}};
                for (const auto& r : res.logs[name].rows) {
                    s.x.push_back(static_cast<double>(r.epoch));
                    s.y.push_back(r.eval.mean);
                }
                series.push_back(std::move(s));
            }
            art.write("robustness_curves.svg", [&](std::ostream& os) {
                svg::line_chart(os, series, "mean robustness on held-out initial states", "epoch", "robustness", stamp);
            });
        }
        {
            svg::Series s{"skip-gram loss", {}, {}};
            for (std::size_t e = 0; e < res.embedding.epoch_loss.size(); ++e) {
                s.x.push_back(static_cast<double>(e));
                s.y.push_back(res.embedding.epoch_loss[e]);
            }
            art.write("skipgram_loss.svg", [&](std::ostream& os) { svg::line_chart(os, {s}, "skip-gram loss", "epoch", "loss", stamp); });
        }

    } catch (const std::exception& e) {
        manifest(e.what());  // files written so far stay on disk
        throw;
    }
    manifest("");
    return res;
}

}  // namespace stl2vec::bench
