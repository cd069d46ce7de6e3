#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "cellgraph/rng.hpp"
#include "cellgraph/trainer.hpp"

using namespace cellgraph;
using namespace cellgraph::train;

namespace {

// tiny fully-synthetic dataset: per-class densities far apart, graphs built
// directly without the image pipeline
Dataset tiny_dataset(int per_class, std::uint64_t seed, int f = 4) {
    Rng rng(seed);
    Dataset ds;
    for (int g = 0; g < 3; ++g)
        for (int i = 0; i < per_class; ++i) {
            CellFeatureSet set;
            set.width = set.height = 64;
            set.dim = f;
            set.label = g;
            int cells = 6 + g * 8;
            for (int c = 0; c < cells; ++c) {
                CellFeatureSet::Cell cell;
                cell.cx = rng.next_in(1, 63);
                cell.cy = rng.next_in(1, 63);
                cell.features.resize(f);
                for (double& v : cell.features) v = rng.next_in(0, 1) + g;
                set.cells.push_back(std::move(cell));
            }
            AugmentParams aug;
            aug.grid_d = 4;
            aug.nodes = 12;
            GraphSample sample;
            sample.graph = augment_to_graph(set, aug, substream(seed, "sel", ds.samples.size()));
            sample.patched = split_patches(sample.graph, 64, 64);
            sample.label = g;
            ds.samples.push_back(std::move(sample));
        }
    return ds;
}

}  // namespace

TEST_CASE("smooth L1 follows both branches", "[trainer]") {
    REQUIRE(smooth_l1(2.0, 2.0, 1.0) == 0.0);
    REQUIRE(smooth_l1(2.5, 2.0, 1.0) == 0.125);  // quadratic branch
    REQUIRE(smooth_l1(4.0, 2.0, 1.0) == 1.5);    // linear branch
    // continuity at |r| == delta: both branches give delta/2
    double delta = 0.37;
    REQUIRE(std::fabs(smooth_l1(delta, 0.0, delta) - 0.5 * delta) < 1e-15);
    // loss is never negative
    Rng rng(1);
    for (int i = 0; i < 200; ++i)
        REQUIRE(smooth_l1(rng.next_in(-5, 5), rng.next_in(-5, 5), rng.next_in(0.1, 2)) >= 0.0);
}

TEST_CASE("classification rounds with ties up and clamps", "[trainer]") {
    REQUIRE(classify(0.49) == 0);
    REQUIRE(classify(1.5) == 2);
    REQUIRE(classify(-3.0) == 0);
    REQUIRE(classify(0.5) == 1);
    REQUIRE(classify(2.51) == 2);
    REQUIRE(classify(7.0) == 2);
    REQUIRE(classify(1.49) == 1);
}

TEST_CASE("nine samples in three classes split one each per fold", "[trainer]") {
    std::vector<int> labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
    auto folds = make_folds(labels, 3, 5);
    for (const auto& fold : folds) {
        REQUIRE(fold.val_ids.size() == 3);
        REQUIRE(fold.train_ids.size() == 6);
        std::set<int> classes;
        for (int id : fold.val_ids) classes.insert(labels[id]);
        REQUIRE(classes == std::set<int>{0, 1, 2});
    }
}

TEST_CASE("a 71-31-35 label split folds into sizes 45-46-46", "[trainer]") {
    std::vector<int> labels;
    labels.insert(labels.end(), 71, 0);
    labels.insert(labels.end(), 31, 1);
    labels.insert(labels.end(), 35, 2);
    auto folds = make_folds(labels, 3, 17);
    std::multiset<std::size_t> sizes;
    for (const auto& fold : folds) sizes.insert(fold.val_ids.size());
    REQUIRE(sizes == std::multiset<std::size_t>{45, 46, 46});
}

TEST_CASE("folds partition the dataset for random seeds", "[trainer]") {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        int n0 = 3 + static_cast<int>(rng.next_below(40));
        int n1 = 3 + static_cast<int>(rng.next_below(40));
        int n2 = 3 + static_cast<int>(rng.next_below(40));
        std::vector<int> labels;
        labels.insert(labels.end(), n0, 0);
        labels.insert(labels.end(), n1, 1);
        labels.insert(labels.end(), n2, 2);
        Rng shuffle_rng(rep);
        shuffle_rng.shuffle(labels);
        auto folds = make_folds(labels, 3, rng.next_u64());

        std::set<int> seen;
        std::size_t total = 0;
        for (const auto& fold : folds) {
            total += fold.val_ids.size();
            for (int id : fold.val_ids) {
                REQUIRE(seen.insert(id).second);  // validates exactly once
            }
            // no train/val leakage
            std::set<int> train(fold.train_ids.begin(), fold.train_ids.end());
            for (int id : fold.val_ids) REQUIRE(train.count(id) == 0);
            REQUIRE(fold.train_ids.size() + fold.val_ids.size() == labels.size());
        }
        REQUIRE(total == labels.size());
    }
}

TEST_CASE("folds need every class at least k times", "[trainer]") {
    std::vector<int> labels = {0, 0, 0, 1, 1, 2, 2, 2};  // class 1 has two samples
    REQUIRE_THROWS_AS(make_folds(labels, 3, 1), DegenerateDatasetError);
}

TEST_CASE("rising accuracy never decays the rate", "[trainer]") {
    PlateauScheduler sched(1e-3, 0.5, 3, 1e-7);
    double acc = 0.1;
    for (int e = 0; e < 30; ++e) {
        acc += 0.01;
        REQUIRE(sched.step(acc) == 1e-3);
    }
}

TEST_CASE("flat accuracy decays after patience epochs", "[trainer]") {
    PlateauScheduler sched(4e-5, 0.5, 10, 1e-7);
    double lr = sched.step(0.5);  // epoch 1: improvement over -inf
    REQUIRE(lr == 4e-5);
    for (int e = 2; e <= 10; ++e) {
        lr = sched.step(0.5);
        REQUIRE(lr == 4e-5);  // stale for 9 epochs, still within patience
    }
    lr = sched.step(0.5);  // the (patience+1)-th epoch triggers the decay
    REQUIRE(lr == 2e-5);
}

TEST_CASE("the rate never drops below min_lr", "[trainer]") {
    PlateauScheduler sched(4e-5, 0.5, 2, 1e-7);
    double lr = 4e-5;
    for (int e = 0; e < 100; ++e) {
        double next = sched.step(0.25);
        REQUIRE(next <= lr);  // non-increasing
        lr = next;
        REQUIRE(lr >= 1e-7);
    }
    REQUIRE(lr == 1e-7);
}

TEST_CASE("evaluate_cv reproduces the reported mean and deviation arithmetic", "[trainer]") {
    auto make_reports = [](std::array<double, 3> finals) {
        std::vector<FoldReport> reports(3);
        for (int i = 0; i < 3; ++i) {
            reports[i].fold_id = i;
            reports[i].final_accuracy = finals[i];
        }
        return reports;
    };

    auto [m1, s1] = evaluate_cv(make_reports({1.0, 1.0, 1.0}));
    REQUIRE(m1 == 100.0);
    REQUIRE(s1 == 0.0);

    auto [m2, s2] = evaluate_cv(make_reports({0.98, 1.00, 1.00}));
    REQUIRE(std::fabs(m2 - 99.33333333333333) < 1e-10);
    REQUIRE(std::fabs(s2 - 0.9428090415820642) < 1e-10);

    auto [m3, s3] = evaluate_cv(make_reports({1.0, 1.0, 0.9778}));
    REQUIRE(std::fabs(m3 - 99.26) < 1e-10);
    REQUIRE(std::fabs(s3 - 1.0465180361560902) < 1e-10);

    REQUIRE_THROWS_AS(evaluate_cv(std::vector<FoldReport>(2)), DegenerateDatasetError);
}

TEST_CASE("a single sample is memorized", "[trainer]") {
    auto ds = tiny_dataset(1, 3);
    Fold fold;
    fold.train_ids = {0};
    fold.val_ids = {0};
    TrainConfig cfg;
    cfg.lr0 = 5e-3;
    cfg.epochs = 400;
    cfg.seed = 1;
    gnn::HyperParams hp;
    hp.embed_dim = 6;
    hp.pool_sizes = {4, 2, 1};
    auto report = train_fold(ds, fold, /*patched=*/true, 42, cfg, hp);
    REQUIRE(report.epochs.back().train_loss < 1e-3);
}

TEST_CASE("training is bit-reproducible", "[trainer]") {
    auto ds = tiny_dataset(3, 5);
    auto folds = make_folds(ds.labels(), 3, 7);
    TrainConfig cfg;
    cfg.lr0 = 1e-3;
    cfg.epochs = 5;
    cfg.seed = 9;
    gnn::HyperParams hp;
    hp.embed_dim = 6;
    hp.pool_sizes = {4, 2, 1};
    auto r1 = train_fold(ds, folds[0], true, 11, cfg, hp);
    auto r2 = train_fold(ds, folds[0], true, 11, cfg, hp);
    REQUIRE(r1.epochs.size() == r2.epochs.size());
    for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
        REQUIRE(r1.epochs[e].train_loss == r2.epochs[e].train_loss);
        REQUIRE(r1.epochs[e].val_accuracy == r2.epochs[e].val_accuracy);
        REQUIRE(r1.epochs[e].lr == r2.epochs[e].lr);
    }
}

TEST_CASE("separable synthetic data trains to full accuracy", "[trainer]") {
    auto ds = tiny_dataset(10, 21);
    TrainConfig cfg;
    cfg.lr0 = 5e-3;
    cfg.epochs = 150;
    cfg.seed = 13;
    cfg.plateau_patience = 25;
    gnn::HyperParams hp;
    hp.embed_dim = 8;
    hp.pool_sizes = {8, 4, 1};
    auto reports = train_cv(ds, /*patched=*/true, cfg, hp);
    auto [mean, stddev] = evaluate_cv(reports);
    REQUIRE(mean >= 95.0);
    (void)stddev;
}
