#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cellgraph/ablation.hpp"
#include "cellgraph/checkpoint.hpp"
#include "cellgraph/config.hpp"
#include "cellgraph/manifest.hpp"
#include "cellgraph/model.hpp"
#include "cellgraph/rng.hpp"

using namespace cellgraph;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "cellgraph_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("checkpoints round-trip bit-exactly with config echo", "[formats]") {
    gnn::HyperParams hp;
    hp.embed_dim = 6;
    hp.pool_sizes = {4, 2, 1};
    auto params = gnn::init_params(8, hp, 99);

    PipelineConfig cfg;
    cfg.hp = hp;
    cfg.feature_dim = 8;
    auto path = temp_file("model.ckpt");
    ad::save_checkpoint(path.string(), params.named(), cfg.to_string());

    auto ck = ad::load_checkpoint(path.string());
    REQUIRE(ck.config == cfg.to_string());
    auto named = params.named();
    REQUIRE(ck.tensors.size() == named.size());
    for (const auto& [name, tensor] : named) {
        const auto& loaded = ck.find(name);
        REQUIRE(loaded->shape == tensor->shape);
        REQUIRE(loaded->values == tensor->values);
    }
    REQUIRE_THROWS_AS(ck.find("does.not.exist"), FormatError);
}

TEST_CASE("truncated checkpoints are rejected", "[formats]") {
    auto path = temp_file("trunc.ckpt");
    {
        gnn::HyperParams hp;
        hp.embed_dim = 4;
        hp.pool_sizes = {3, 2, 1};
        auto params = gnn::init_params(4, hp, 1);
        ad::save_checkpoint(path.string(), params.named(), "x");
    }
    auto full = std::filesystem::file_size(path);
    std::vector<char> bytes(full / 2);
    {
        std::ifstream is(path, std::ios::binary);
        is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    auto half = temp_file("half.ckpt");
    {
        std::ofstream os(half, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    REQUIRE_THROWS_AS(ad::load_checkpoint(half.string()), FormatError);
}

TEST_CASE("config files parse, override and echo", "[formats]") {
    auto path = temp_file("run.cfg");
    {
        std::ofstream os(path);
        os << "# base configuration\n";
        os << "alpha = 0.25\n";
        os << "nodes=150\n";
        os << "pool_sizes = 8,4,1\n";
        os << "lr0 = 0.0002   # tuned\n";
        os << "patched = true\n";
    }
    PipelineConfig cfg;
    cfg.load_file(path.string());
    REQUIRE(cfg.aug.alpha == 0.25);
    REQUIRE(cfg.aug.nodes == 150);
    REQUIRE(cfg.hp.pool_sizes == std::vector<int>{8, 4, 1});
    REQUIRE(cfg.train.lr0 == 0.0002);
    REQUIRE(cfg.patched);

    // CLI-style override on top of the file
    cfg.apply("nodes", "300");
    REQUIRE(cfg.aug.nodes == 300);

    // echo and reparse reproduces every field
    auto echoed = PipelineConfig::from_string(cfg.to_string());
    REQUIRE(echoed.to_string() == cfg.to_string());
}

TEST_CASE("unknown keys and bad values fail loudly", "[formats]") {
    PipelineConfig cfg;
    REQUIRE_THROWS_AS(cfg.apply("learning_rate", "0.1"), FormatError);
    REQUIRE_THROWS_AS(cfg.apply("epochs", "ten"), FormatError);
    auto path = temp_file("bad.cfg");
    {
        std::ofstream os(path);
        os << "alpha 0.5\n";
    }
    REQUIRE_THROWS_AS(cfg.load_file(path.string()), FormatError);
}

TEST_CASE("manifest ids depend only on declared inputs", "[formats]") {
    auto input = temp_file("input.dat");
    {
        std::ofstream os(input);
        os << "payload";
    }
    RunManifest a;
    a.command_line = "cellgraph train --dataset d";
    a.resolved_config = "alpha=0.5";
    a.add_input(input.string());
    a.finalize_run_id();

    RunManifest b = a;
    b.finalize_run_id();
    REQUIRE(a.run_id == b.run_id);

    RunManifest c = a;
    c.command_line = "cellgraph train --dataset other";
    c.finalize_run_id();
    REQUIRE(c.run_id != a.run_id);

    auto out = temp_file("manifest.json");
    a.artifacts.push_back("metrics.csv");
    a.timings_sec["train"] = 1.25;
    // artifact paths must exist when the manifest is finalized
    REQUIRE_THROWS_AS(a.save(out.string()), FormatError);
    auto artifact = temp_file("metrics.csv");
    {
        std::ofstream os(artifact);
        os << "run_id,kind\n";
    }
    a.artifacts = {artifact.string()};
    a.save(out.string());
    std::ifstream is(out);
    std::stringstream buf;
    buf << is.rdbuf();
    REQUIRE(buf.str().find("\"run_id\"") != std::string::npos);
    REQUIRE(buf.str().find("metrics.csv") != std::string::npos);
}

TEST_CASE("ablation CSV carries data, summary and failure rows", "[formats]") {
    using namespace cellgraph::train;
    std::vector<CellOutcome> outcomes(2);
    outcomes[0].point = {"dim8", true, 100, 8};
    outcomes[0].reports.resize(1);
    outcomes[0].reports[0].fold_id = 0;
    outcomes[0].reports[0].epochs = {{0.5, 0.75, 1e-4}, {0.25, 1.0, 1e-4}};
    outcomes[0].reports[0].final_accuracy = 1.0;
    outcomes[0].summary = {{98.5, 1.2}};
    outcomes[1].point = {"dim12", true, 100, 12};
    outcomes[1].error = "boom, with a comma";

    std::ostringstream os;
    write_ablation_csv(os, "run42", AblationKind::feature_dim, outcomes);
    auto text = os.str();
    REQUIRE(text.find("run_id,kind,grid_point,fold,epoch,train_loss,val_acc,lr\n") == 0);
    REQUIRE(text.find("run42,feature-dim,dim8,0,2,0.25,1,1e-04") != std::string::npos);
    // sweeps record only each fold's final epoch
    REQUIRE(text.find(",1,0.5,") == std::string::npos);
    REQUIRE(text.find("run42,feature-dim,dim8,SUMMARY,98.5,1.2") != std::string::npos);
    REQUIRE(text.find("run42,feature-dim,dim12,FAILED,boom; with a comma") !=
            std::string::npos);
}

TEST_CASE("fnv content hashes are order-stable and content-sensitive", "[formats]") {
    auto p1 = temp_file("h1.bin"), p2 = temp_file("h2.bin");
    {
        std::ofstream a(p1, std::ios::binary), b(p2, std::ios::binary);
        a << "identical";
        b << "identical";
    }
    REQUIRE(fnv1a_file(p1.string()) == fnv1a_file(p2.string()));
    {
        std::ofstream b(p2, std::ios::binary);
        b << "different!";
    }
    REQUIRE(fnv1a_file(p1.string()) != fnv1a_file(p2.string()));
}
