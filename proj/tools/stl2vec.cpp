// Command-line front end: formula utilities, the individual pipeline stages,
// and the full pipeline driven by a JSON config.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "stl2vec/bench/experiment.hpp"
#include "stl2vec/policy/params.hpp"
#include "stl2vec/stl/parser.hpp"
#include "stl2vec/stl/robustness.hpp"
#include "stl2vec/trajopt/optimize.hpp"

using namespace stl2vec;
namespace fs = std::filesystem;

namespace {

bench::ExperimentConfig load_config(const std::string& path, std::size_t threads) {
    bench::ExperimentConfig cfg;
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) throw Error("cannot open config " + path);
        nlohmann::json j;
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("config: ") + e.what(), 0, 0);
        }
        cfg = bench::ExperimentConfig::from_json(j);
    }
    if (threads) cfg.threads = threads;
    return cfg;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    return is;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    return os;
}

std::string stamp(const bench::ExperimentConfig& cfg) {
    return "# config_hash=" + bench::hex(cfg.hash()) + " seed=" + std::to_string(cfg.master_seed);
}

void dump_ast(std::ostream& os, const stl::Formula& f, int depth) {
    const std::string pad(static_cast<std::size_t>(2 * depth), ' ');
    f.visit(stl::overloaded{
        [&](const stl::op::True&) { os << pad << "true\n"; },
        [&](const stl::op::Pred& n) {
            os << pad << "pred";
            for (Eigen::Index k = 0; k < n.pred.c.size(); ++k) os << ' ' << n.pred.c(k);
            os << " | " << n.pred.d << "  > 0\n";
        },
        [&](const stl::op::Not& n) {
            os << pad << "not\n";
            dump_ast(os, n.arg, depth + 1);
        },
        [&](const stl::op::And& n) {
            os << pad << "and\n";
            dump_ast(os, n.lhs, depth + 1);
            dump_ast(os, n.rhs, depth + 1);
        },
        [&](const stl::op::Or& n) {
            os << pad << "or\n";
            dump_ast(os, n.lhs, depth + 1);
            dump_ast(os, n.rhs, depth + 1);
        },
        [&](const stl::op::Eventually& n) {
            os << pad << "F[" << n.interval.a << "," << n.interval.b << "]\n";
            dump_ast(os, n.arg, depth + 1);
        },
        [&](const stl::op::Always& n) {
            os << pad << "G[" << n.interval.a << "," << n.interval.b << "]\n";
            dump_ast(os, n.arg, depth + 1);
        },
        [&](const stl::op::Until& n) {
            os << pad << "U[" << n.interval.a << "," << n.interval.b << "]\n";
            dump_ast(os, n.lhs, depth + 1);
            dump_ast(os, n.rhs, depth + 1);
        },
    });
}

// one state per line, comma or whitespace separated; '#' lines skipped
stl::Trajectory read_trajectory(std::istream& is) {
    stl::Trajectory out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) v.push_back(embed::detail::parse_field<double>(tok, lineno));
        if (v.empty()) continue;
        if (!out.empty() && static_cast<Eigen::Index>(v.size()) != out.front().size())
            throw ParseError("trajectory rows differ in length", lineno, 1);
        out.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return out;
}

Eigen::VectorXd parse_vector(const std::string& s) {
    std::istringstream is(s);
    auto t = read_trajectory(is);
    if (t.size() != 1) throw ParseError("expected one comma-separated vector", 1, 1);
    return t[0];
}

void write_rows(std::ostream& os, const std::vector<Eigen::VectorXd>& xs) {
    for (const auto& x : xs) {
        for (Eigen::Index k = 0; k < x.size(); ++k) os << (k ? "," : "") << embed::detail::shortest(x(k));
        os << '\n';
    }
}

policy::SpecEncoding encoding_for(const std::string& name, std::size_t M, const std::string& embedding_path) {
    const auto kind = policy::encoding_kind(name);
    switch (kind) {
        case policy::EncodingKind::Stl2vec: {
            if (embedding_path.empty()) throw InvalidArgument("--embedding is required for the stl2vec encoding");
            auto is = open_in(embedding_path);
            embed::EmbeddingModel m;
            m.w_in = embed::read_matrix(is);
            if (m.vocabulary() != M) throw DimensionError("embedding rows do not match the spec count");
            return policy::SpecEncoding::stl2vec(m);
        }
        case policy::EncodingKind::Integer: return policy::SpecEncoding::integer(M);
        case policy::EncodingKind::OneHot: return policy::SpecEncoding::one_hot(M);
        case policy::EncodingKind::None: return policy::SpecEncoding::none(M);
    }
    throw InvalidArgument("unknown encoding");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STL specification embeddings and multi-task recurrent controllers"};
    app.require_subcommand(1);
    std::string config_path;
    std::size_t threads = 0;
    app.add_option("-c,--config", config_path, "experiment config (JSON)");
    app.add_option("--threads", threads, "worker threads (default: STL2VEC_THREADS or hardware)");

    // parse
    auto* parse_cmd = app.add_subcommand("parse", "parse a formula and print its tree");
    std::string formula;
    std::size_t dim = 3;
    parse_cmd->add_option("formula", formula)->required();
    parse_cmd->add_option("--dim", dim, "state dimension");

    // robustness
    auto* rob_cmd = app.add_subcommand("robustness", "robustness of a trajectory file");
    std::string traj_path;
    double beta = 0.0;
    rob_cmd->add_option("formula", formula)->required();
    rob_cmd->add_option("trajectory", traj_path, "one state per line")->required();
    rob_cmd->add_option("--smooth", beta, "also print log-sum-exp robustness at this beta");

    // optimize
    auto* opt_cmd = app.add_subcommand("optimize", "trajectory optimisation on the unicycle");
    std::string x0_text = "0.35,0.35,0";
    std::string out_path;
    opt_cmd->add_option("formula", formula)->required();
    opt_cmd->add_option("--x0", x0_text, "initial state");
    opt_cmd->add_option("-o,--out", out_path, "trajectory CSV");

    // gen-dataset
    auto* gen_cmd = app.add_subcommand("gen-dataset", "optimised trajectories -> skip-gram records");
    gen_cmd->add_option("-o,--out", out_path, "dataset TSV")->required();

    // train-embed
    auto* emb_cmd = app.add_subcommand("train-embed", "train the skip-gram embedding");
    std::string dataset_path, embedding_path;
    emb_cmd->add_option("dataset", dataset_path)->required();
    emb_cmd->add_option("-o,--out", out_path, "embedding matrix")->required();

    // similar
    auto* sim_cmd = app.add_subcommand("similar", "nearest specs by cosine similarity");
    std::vector<std::size_t> queries;
    std::size_t k = 4;
    bool csv = false;
    sim_cmd->add_option("embedding", embedding_path)->required();
    sim_cmd->add_option("-q,--query", queries, "0-based spec indices (default: all)");
    sim_cmd->add_option("-k", k, "neighbours per query");
    sim_cmd->add_flag("--csv", csv);

    // train-controller
    auto* tc_cmd = app.add_subcommand("train-controller", "train a recurrent controller");
    std::string encoding = "stl2vec";
    tc_cmd->add_option("--encoding", encoding)
        ->check(CLI::IsMember({"stl2vec", "integer", "onehot", "one-by-one"}));
    tc_cmd->add_option("--embedding", embedding_path, "embedding matrix for --encoding stl2vec");
    tc_cmd->add_option("-o,--out", out_path, "output directory")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on held-out initial states");
    std::string ckpt_path;
    eval_cmd->add_option("checkpoint", ckpt_path)->required();

    // params
    auto* par_cmd = app.add_subcommand("params", "parameter counts per method");
    policy::CountInputs counts;
    bool true_counts = false;
    par_cmd->add_option("--M", counts.M);
    par_cmd->add_option("--N", counts.N);
    par_cmd->add_option("--n", counts.n);
    par_cmd->add_option("--m", counts.m);
    par_cmd->add_option("--hidden", counts.hidden);
    par_cmd->add_option("--layers", counts.layers);
    par_cmd->add_flag("--true", true_counts, "also print actual weight+bias totals");

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "run every stage and write artifacts");
    pipe_cmd->add_option("-o,--out", out_path, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse_cmd->parsed()) {
            const auto f = stl::parse(formula, dim);
            std::cout << f.to_string() << "\nhorizon " << stl::horizon(f) << '\n';
            dump_ast(std::cout, f, 0);
            return 0;
        }
        if (rob_cmd->parsed()) {
            auto is = open_in(traj_path);
            const auto x = read_trajectory(is);
            if (x.empty()) throw ParseError("empty trajectory", 1, 1);
            const auto f = stl::parse(formula, static_cast<std::size_t>(x.front().size()));
            std::cout << "robustness " << embed::detail::shortest(stl::robustness(f, x)) << '\n';
            if (beta > 0.0) std::cout << "smooth " << embed::detail::shortest(stl::smooth_robustness(f, x, beta)) << '\n';
            return 0;
        }
        if (par_cmd->parsed()) {
            using policy::Method;
            const std::pair<const char*, Method> rows[] = {
                {"proposed", Method::Proposed}, {"A1", Method::A1}, {"A2", Method::A2}, {"A3", Method::A3}};
            std::cout << "method,formula" << (true_counts ? ",true" : "") << '\n';
            for (const auto& [name, m] : rows) {
                std::cout << name << ',' << policy::count_params(counts, m);
                if (true_counts) std::cout << ',' << policy::count_params_true(counts, m);
                std::cout << '\n';
            }
            return 0;
        }

        const auto cfg = load_config(config_path, threads);
        const auto dyn = cfg.dynamics();
        const auto sampler = cfg.sampler();

        if (opt_cmd->parsed()) {
            const auto f = stl::parse(formula, 3);
            auto oc = cfg.opt;
            oc.seed = util::derive_seed(cfg.master_seed, {10});
            const auto r = trajopt::optimize(f, parse_vector(x0_text), dyn, oc);
            std::cout << "robustness " << embed::detail::shortest(r.robustness) << "\nsmooth "
                      << embed::detail::shortest(r.smooth_robustness) << "\nrestart " << r.restart << '\n';
            if (!out_path.empty()) {
                auto os = open_out(out_path);
                os << stamp(cfg) << '\n';
                write_rows(os, r.trajectory);
            }
            return 0;
        }

        const auto specs = bench::build_specs(cfg.map, cfg.selection);

        if (gen_cmd->parsed()) {
            const auto ds = embed::generate_dataset(specs, dyn, sampler, cfg.dataset_config());
            auto os = open_out(out_path);
            os << stamp(cfg) << '\n';
            embed::write_dataset(os, ds.records);
            std::size_t ok = 0;
            for (const auto& t : ds.tasks) ok += t.success ? 1 : 0;
            std::cerr << specs.size() << " specs, " << ok << "/" << ds.tasks.size() << " optimisations satisfied, "
                      << ds.records.size() << " records\n";
            return 0;
        }
        if (emb_cmd->parsed()) {
            auto is = open_in(dataset_path);
            const auto records = embed::read_dataset(is);
            const auto te = embed::train_skipgram(records, specs.size(), cfg.skipgram_config());
            auto os = open_out(out_path);
            os << stamp(cfg) << '\n';
            embed::write_embedding(os, te.model);
            std::cerr << "loss " << te.epoch_loss.front() << " -> " << te.epoch_loss.back() << '\n';
            return 0;
        }
        if (sim_cmd->parsed()) {
            auto is = open_in(embedding_path);
            embed::EmbeddingModel m;
            m.w_in = embed::read_matrix(is);
            if (m.vocabulary() != specs.size()) throw DimensionError("embedding rows do not match the spec count");
            for (auto q : queries)
                if (q >= specs.size()) throw InvalidArgument("query index out of range");
            const auto rows = bench::report_similarities(m, queries, k);
            if (csv) {
                bench::write_similarity_csv(std::cout, rows);
            } else {
                bench::render_similarity(std::cout, rows, specs);
            }
            return 0;
        }
        if (tc_cmd->parsed()) {
            const auto tcfg = cfg.controller_config();
            const fs::path dir(out_path);
            fs::create_directories(dir);
            policy::TrainingLog log;
            auto ck = open_out(dir / ("controller_" + encoding + ".ckpt"));
            if (encoding == "one-by-one") {
                const auto runs = policy::train_one_by_one(specs, dyn, sampler, tcfg);
                log = policy::merge_logs(runs);
                for (const auto& r : runs) policy::write_checkpoint(ck, r.policy, policy::SpecEncoding::none(1));
            } else {
                const auto enc = encoding_for(encoding, specs.size(), embedding_path);
                auto r = policy::train(specs, enc, dyn, sampler, tcfg);
                log = std::move(r.log);
                policy::write_checkpoint(ck, r.policy, enc);
            }
            auto os = open_out(dir / ("log_" + encoding + ".csv"));
            os << stamp(cfg) << '\n';
            log.write_csv(os);
            const auto& last = log.rows.back();
            std::cout << "final mean robustness " << last.eval.mean << " at epoch " << last.epoch << '\n';
            return 0;
        }
        if (eval_cmd->parsed()) {
            auto is = open_in(ckpt_path);
            std::vector<policy::LstmPolicy> pols;
            policy::SpecEncoding enc;
            while ((is >> std::ws) && is.peek() != std::char_traits<char>::eof()) {
                auto cp = policy::read_checkpoint(is);
                pols.push_back(std::move(cp.policy));
                enc = std::move(cp.encoding);
            }
            if (pols.empty()) throw ParseError("no checkpoint in " + ckpt_path, 1, 1);
            if (pols.size() > 1 && pols.size() != specs.size())
                throw DimensionError("one-by-one checkpoint count does not match the spec count");
            if (pols.size() == 1 && enc.size() != specs.size()) throw DimensionError("encoding rows do not match the spec count");
            const auto states = policy::sample_initial_states(sampler, cfg.controller.eval_samples, cfg.eval_seed);
            const std::size_t th = cfg.threads ? cfg.threads : util::default_threads();
            const auto ev = pols.size() == 1
                                ? policy::evaluate(pols[0], specs, enc, dyn, states, cfg.controller.T, th)
                                : policy::evaluate(std::span<const policy::LstmPolicy>(pols), specs,
                                                   policy::SpecEncoding::none(specs.size()), dyn, states, cfg.controller.T, th);
            std::cout << "spec,mean_robustness,name\n";
            for (std::size_t i = 0; i < specs.size(); ++i)
                std::cout << i << ',' << embed::detail::shortest(ev.per_spec[i]) << ",\"" << specs.names[i] << "\"\n";
            std::cout << "mean," << embed::detail::shortest(ev.mean) << '\n';
            return 0;
        }
        if (pipe_cmd->parsed()) {
            const auto res = bench::run_pipeline(cfg, out_path, &std::cerr);
            for (const auto& [name, log] : res.logs)
                std::cout << name << " final mean robustness " << log.rows.back().eval.mean << '\n';
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
