#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stl2vec/bench/experiment.hpp"
#include "stl2vec/bench/world.hpp"
#include "stl2vec/stl/robustness.hpp"

using namespace stl2vec;
namespace fs = std::filesystem;

namespace {

std::size_t count_with(const bench::RegionMap& map, const std::string& templates) {
    auto sel = bench::SpecSelection::full();
    sel.templates = templates;
    return bench::build_specs(map, sel).size();
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// drops '#' lines and the wall_seconds column
std::string numeric_log(const fs::path& p) {
    std::ifstream is(p);
    std::string line, out;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        out += line.substr(0, a) + line.substr(b) + '\n';
    }
    return out;
}

bench::ExperimentConfig smoke_config() {
    bench::ExperimentConfig c;
    c.selection = bench::SpecSelection::full();
    c.selection.templates = "a";
    c.selection.regions = {2};
    c.selection.subregions = {1, 2};
    c.opt.iterations = 40;
    c.opt.restarts = 1;
    c.skipgram.dimension = 2;
    c.skipgram.epochs = 10;
    c.context.P = 1;
    c.encodings = {"stl2vec", "onehot"};
    c.controller.epochs = 5;
    c.controller.batch_size = 2;
    c.controller.initial_states = 2;
    c.controller.hidden = 4;
    c.controller.eval_every = 2;
    c.controller.eval_samples = 4;
    c.threads = 1;
    c.master_seed = 7;
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("stl2vec_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(BuildSpecs, Counts) {
    const bench::RegionMap map;
    EXPECT_EQ(bench::build_specs(map, bench::SpecSelection::full()).size(), 369u);
    EXPECT_EQ(bench::build_specs(map, bench::SpecSelection::training()).size(), 194u);
    EXPECT_EQ(count_with(map, "a"), 16u);
    EXPECT_EQ(count_with(map, "b"), 96u);
    EXPECT_EQ(count_with(map, "c"), 144u);
    EXPECT_EQ(count_with(map, "d"), 16u);
    EXPECT_EQ(count_with(map, "e"), 96u);
    EXPECT_EQ(count_with(map, "f"), 1u);
}

TEST(BuildSpecs, DeskScaleSelection) {
    auto sel = bench::SpecSelection::full();
    sel.templates = "ab";
    sel.regions = {1, 2};
    sel.matched_subregions = true;
    const auto s = bench::build_specs(bench::RegionMap{}, sel);
    ASSERT_EQ(s.size(), 12u);
    EXPECT_EQ(s.names[0], "F[0,20] Reg(1,1)");
    EXPECT_EQ(s.names[8], "F[0,20] Reg(2,1) or F[0,20] Reg(1,1)");
}

TEST(BuildSpecs, OrderAndNames) {
    const auto s = bench::build_specs(bench::RegionMap{}, bench::SpecSelection::full());
    EXPECT_EQ(s.names.front(), "F[0,20] Reg(1,1)");
    EXPECT_EQ(s.names[16], "F[0,20] Reg(2,1) or F[0,20] Reg(1,1)");
    EXPECT_EQ(s.names.back(), "F[0,20] Reg(4,4) and (not Reg(4,4) U[0,20] Reg(2,3))");
    std::set<std::string> unique(s.names.begin(), s.names.end());
    EXPECT_EQ(unique.size(), s.size());
    const auto t = bench::build_specs(bench::RegionMap{}, bench::SpecSelection::training());
    EXPECT_EQ(t.names[193], s.names.back());
    EXPECT_EQ(t.names[192], "F[0,15] G[0,5] Reg(1,1) or F[0,15] G[0,5] Reg(3,2)");
}

TEST(BuildSpecs, UnknownTemplate) {
    auto sel = bench::SpecSelection::full();
    sel.templates = "ag";
    EXPECT_THROW(bench::build_specs(bench::RegionMap{}, sel), InvalidArgument);
}

TEST(RegionMap, SubregionGeometry) {
    const bench::RegionMap map;
    for (int i = 1; i <= 4; ++i) {
        const auto& r = map.region(i);
        double area = 0.0;
        for (int j = 1; j <= 4; ++j) {
            const auto s = map.subregion(i, j);
            EXPECT_DOUBLE_EQ(s.xhi - s.xlo, 1.0);
            EXPECT_DOUBLE_EQ(s.yhi - s.ylo, 1.0);
            EXPECT_TRUE(s.xlo >= r.xlo && s.xhi <= r.xhi && s.ylo >= r.ylo && s.yhi <= r.yhi);
            area += (s.xhi - s.xlo) * (s.yhi - s.ylo);
            const stl::Trajectory x{Eigen::Vector3d((s.xlo + s.xhi) / 2, (s.ylo + s.yhi) / 2, 0.3)};
            EXPECT_DOUBLE_EQ(stl::robustness(map.reg(i, j), x), 0.5);
            for (int k = j + 1; k <= 4; ++k) {
                const auto o = map.subregion(i, k);
                const bool overlap = std::min(s.xhi, o.xhi) > std::max(s.xlo, o.xlo) &&
                                     std::min(s.yhi, o.yhi) > std::max(s.ylo, o.ylo);
                EXPECT_FALSE(overlap);
            }
        }
        EXPECT_DOUBLE_EQ(area, (r.xhi - r.xlo) * (r.yhi - r.ylo));
        EXPECT_TRUE(map.initial.xhi < r.xlo || map.initial.yhi < r.ylo);
    }
    // quadrant convention
    EXPECT_DOUBLE_EQ(map.subregion(1, 1).xlo, 3.0);
    EXPECT_DOUBLE_EQ(map.subregion(1, 1).ylo, 7.0);
    EXPECT_DOUBLE_EQ(map.subregion(1, 4).xlo, 4.0);
    EXPECT_DOUBLE_EQ(map.subregion(1, 4).ylo, 8.0);
    EXPECT_THROW(map.subregion(5, 1), InvalidArgument);
    EXPECT_THROW(map.subregion(1, 0), InvalidArgument);
}

TEST(Config, JsonRoundTripAndHash) {
    auto c = smoke_config();
    const auto j = c.to_json();
    const auto back = bench::ExperimentConfig::from_json(j);
    EXPECT_EQ(back.to_json(), j);
    EXPECT_EQ(back.hash(), c.hash());
    c.master_seed = 8;
    EXPECT_NE(back.hash(), c.hash());

    const auto training = bench::ExperimentConfig::from_json(nlohmann::json::parse(R"({"specs": {"set": "training"}})"));
    EXPECT_EQ(bench::build_specs(training.map, training.selection).size(), 194u);
    const auto full = bench::ExperimentConfig::from_json(nlohmann::json::parse(R"({"specs": {"set": "full"}})"));
    EXPECT_EQ(bench::build_specs(full.map, full.selection).size(), 369u);

    EXPECT_THROW(bench::ExperimentConfig::from_json(nlohmann::json::parse(R"({"controller": {"mode": "fuzzy"}})")),
                 InvalidArgument);
    EXPECT_THROW(bench::ExperimentConfig::from_json(nlohmann::json::parse(R"({"controller": {"encodings": ["bits"]}})")),
                 InvalidArgument);
    EXPECT_THROW(bench::ExperimentConfig::from_json(nlohmann::json::parse(R"({"regions": [[0,1,0,1]]})")),
                 InvalidArgument);
}

TEST(Similarity, ConstructedGeometry) {
    embed::EmbeddingModel m;
    m.w_in.resize(4, 2);
    m.w_in << 1, 0,   //
        1, 1,         //
        0, 1,         //
        -1, 0.1;
    m.w_out = Eigen::MatrixXd::Zero(2, 4);
    const auto rows = bench::report_similarities(m, {0}, 4);
    ASSERT_EQ(rows.size(), 3u);  // self excluded, k capped at M - 1
    // brute force
    std::vector<std::pair<double, std::size_t>> expect;
    for (std::size_t k = 1; k < 4; ++k) {
        const Eigen::VectorXd a = m.w_in.row(0), b = m.w_in.row(static_cast<Eigen::Index>(k));
        expect.emplace_back(-a.dot(b) / (a.norm() * b.norm()), k);
    }
    std::sort(expect.begin(), expect.end());
    for (std::size_t r = 0; r < 3; ++r) {
        EXPECT_EQ(rows[r].neighbour, expect[r].second);
        EXPECT_NEAR(rows[r].similarity, -expect[r].first, 1e-15);
        EXPECT_EQ(rows[r].rank, r + 1);
    }
    EXPECT_NEAR(rows[0].similarity, std::sqrt(0.5), 1e-15);

    const auto one = bench::report_similarities(m, {2}, 1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].neighbour, 1u);

    embed::SpecSet specs;
    for (int i = 0; i < 4; ++i) {
        specs.specs.push_back(stl::Formula::top());
        specs.names.push_back("spec" + std::to_string(i));
    }
    std::ostringstream txt, csv;
    bench::render_similarity(txt, rows, specs);
    bench::write_similarity_csv(csv, rows);
    EXPECT_NE(txt.str().find("query 0: spec0"), std::string::npos);
    EXPECT_NE(txt.str().find("0.707"), std::string::npos);
    EXPECT_EQ(csv.str().substr(0, 31), "query,rank,neighbour,similarity");

    EXPECT_THROW(bench::report_similarities(embed::EmbeddingModel{}, {}, 4), InvalidArgument);
}

TEST(Pipeline, SmokeArtifactsAndDeterminism) {
    const auto cfg = smoke_config();
    const fs::path a = scratch("smoke_a"), b = scratch("smoke_b");
    const auto res = bench::run_pipeline(cfg, a);
    bench::run_pipeline(cfg, b);
    ASSERT_EQ(res.specs.size(), 2u);

    for (const char* f : {"specs.tsv", "dataset.tsv", "optimized_trajectories.csv", "embedding.txt", "skipgram_loss.csv",
                          "similarity.csv", "similarity.txt", "log_stl2vec.csv", "log_onehot.csv",
                          "controller_stl2vec.ckpt", "controller_onehot.ckpt", "trajectories_stl2vec.csv",
                          "world_stl2vec.svg", "robustness_curves.svg", "skipgram_loss.svg", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(a / f)) << f;
    }

    const std::string stamp = "config_hash=" + bench::hex(cfg.hash());
    EXPECT_NE(slurp(a / "dataset.tsv").find(stamp), std::string::npos);
    EXPECT_NE(slurp(a / "log_stl2vec.csv").find(stamp), std::string::npos);
    EXPECT_NE(slurp(a / "world_stl2vec.svg").find(stamp), std::string::npos);

    {
        std::ifstream is(a / "dataset.tsv");
        EXPECT_EQ(embed::read_dataset(is), res.dataset.records);
    }
    {
        std::ifstream is(a / "embedding.txt");
        EXPECT_EQ(embed::read_matrix(is), res.embedding.model.w_in);
    }
    {
        std::ifstream is(a / "controller_stl2vec.ckpt");
        const auto ck = policy::read_checkpoint(is);
        EXPECT_EQ(ck.policy.params(), res.policies.at("stl2vec")[0].params());
    }
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], bench::hex(cfg.hash()));
    EXPECT_EQ(manifest["status"], "ok");
    EXPECT_EQ(res.logs.at("stl2vec").rows.size(), 4u);  // epochs 0, 2, 4, 5

    for (const char* f : {"dataset.tsv", "embedding.txt", "similarity.csv", "optimized_trajectories.csv",
                          "trajectories_stl2vec.csv", "controller_onehot.ckpt"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_EQ(numeric_log(a / "log_stl2vec.csv"), numeric_log(b / "log_stl2vec.csv"));
    EXPECT_EQ(numeric_log(a / "log_onehot.csv"), numeric_log(b / "log_onehot.csv"));

    // every optimised trajectory starts in X0 and has T + 1 states
    for (const auto& t : res.dataset.tasks) {
        ASSERT_EQ(t.trajectory.size(), cfg.opt.T + 1);
        EXPECT_TRUE(cfg.map.initial_box().contains(t.trajectory[0]));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Pipeline, StageTaggedFailureKeepsArtifacts) {
    auto cfg = smoke_config();
    cfg.controller.T = 10;  // shorter than the F[0,20] horizon
    const fs::path dir = scratch("fail");
    try {
        bench::run_pipeline(cfg, dir);
        FAIL() << "expected a failure";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("stage controller:stl2vec"), std::string::npos) << e.what();
    }
    EXPECT_TRUE(fs::exists(dir / "dataset.tsv"));
    EXPECT_TRUE(fs::exists(dir / "embedding.txt"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["status"], "failed");
    fs::remove_all(dir);
}
