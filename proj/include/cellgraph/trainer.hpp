#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cellgraph/errors.hpp"
#include "cellgraph/features.hpp"
#include "cellgraph/graph.hpp"
#include "cellgraph/model.hpp"
#include "cellgraph/rng.hpp"

namespace cellgraph::train {

struct TrainConfig {
    double lr0 = 5e-5;
    int epochs = 100;
    int folds = 3;
    std::uint64_t seed = 0;
    double plateau_factor = 0.5;  // lr multiplier on plateau
    int plateau_patience = 10;    // epochs without improvement before decay
    double min_lr = 1e-7;
    double huber_delta = 1.0;

    void validate() const {
        if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
            throw FormatError("config: plateau_factor must lie in (0, 1)");
        if (plateau_patience < 1) throw FormatError("config: plateau_patience must be >= 1");
        if (lr0 <= min_lr) throw FormatError("config: lr0 must exceed min_lr");
        if (huber_delta <= 0.0) throw FormatError("config: huber_delta must be positive");
    }
};

// Smooth L1 of the residual pred - target.
inline double smooth_l1(double pred, double target, double delta) {
    double r = pred - target;
    return std::fabs(r) < delta ? 0.5 * r * r / delta : std::fabs(r) - 0.5 * delta;
}

// Scalar regression output to grade: nearest integer, ties at .5 round up,
// clamped to the valid grade range.
inline int classify(double pred) {
    int g = static_cast<int>(std::floor(pred + 0.5));
    return g < 0 ? 0 : (g > 2 ? 2 : g);
}

struct Fold {
    std::vector<int> train_ids;
    std::vector<int> val_ids;
};

// Stratified k-fold split. Every class is dealt base = n_c / k samples per
// fold; the n_c % k leftovers go to the folds with the smallest running
// totals (ties to the lowest fold id), which keeps overall fold sizes
// within one of each other. Deterministic per seed.
inline std::vector<Fold> make_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (static_cast<int>(labels.size()) < k)
        throw DegenerateDatasetError("make_folds: fewer samples than folds");
    int max_label = *std::max_element(labels.begin(), labels.end());
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(static_cast<int>(i));
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (static_cast<int>(by_class[c].size()) < k)
            throw DegenerateDatasetError("make_folds: class " + std::to_string(c) + " has " +
                                         std::to_string(by_class[c].size()) +
                                         " samples, need at least " + std::to_string(k));

    std::vector<std::vector<int>> fold_members(static_cast<std::size_t>(k));
    std::vector<int> totals(static_cast<std::size_t>(k), 0);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto ids = by_class[c];
        Rng rng(substream(seed, "fold-class", c));
        rng.shuffle(ids);
        int base = static_cast<int>(ids.size()) / k;
        int extras = static_cast<int>(ids.size()) % k;
        std::vector<int> share(static_cast<std::size_t>(k), base);
        for (int e = 0; e < extras; ++e) {
            int pick = 0;
            for (int f = 1; f < k; ++f)
                if (totals[f] + share[f] < totals[pick] + share[pick]) pick = f;
            share[pick] += 1;
        }
        std::size_t pos = 0;
        for (int f = 0; f < k; ++f) {
            for (int s = 0; s < share[f]; ++s) fold_members[f].push_back(ids[pos++]);
            totals[f] += share[f];
        }
    }

    std::vector<Fold> folds(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        folds[f].val_ids = fold_members[f];
        for (int g = 0; g < k; ++g)
            if (g != f)
                folds[f].train_ids.insert(folds[f].train_ids.end(), fold_members[g].begin(),
                                          fold_members[g].end());
        std::sort(folds[f].val_ids.begin(), folds[f].val_ids.end());
        std::sort(folds[f].train_ids.begin(), folds[f].train_ids.end());
    }
    return folds;
}

// Plateau scheduler on validation accuracy (mode max): a strict improvement
// resets the counter; `patience` stale epochs in a row halve the rate (by
// `factor`), floored at min_lr.
struct PlateauScheduler {
    double factor;
    int patience;
    double min_lr;
    double lr;
    double best = -std::numeric_limits<double>::infinity();
    int since_improvement = 0;

    PlateauScheduler(double lr0, double factor_, int patience_, double min_lr_)
        : factor(factor_), patience(patience_), min_lr(min_lr_), lr(lr0) {}

    double step(double accuracy) {
        if (accuracy > best) {
            best = accuracy;
            since_improvement = 0;
        } else {
            ++since_improvement;
            if (since_improvement >= patience) {
                lr = std::max(lr * factor, min_lr);
                since_improvement = 0;
            }
        }
        return lr;
    }
};

// One image's graphs, in both shapes the model can consume.
struct GraphSample {
    CellGraph graph;
    PatchedGraph patched;
    int label = 0;
};

struct Dataset {
    std::vector<GraphSample> samples;

    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.label);
        return out;
    }
};

// Feature sets to graphs: per-sample selection substreams keep the result
// independent of build order.
inline Dataset build_dataset(const std::vector<CellFeatureSet>& sets, const AugmentParams& aug,
                             int dim, std::uint64_t seed) {
    Dataset ds;
    ds.samples.reserve(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto& set = sets[i];
        if (!set.label)
            throw DegenerateDatasetError("dataset: sample " + std::to_string(i) +
                                         " carries no grade label");
        GraphSample s;
        auto narrowed = dim == set.dim ? set : prefix_features(set, dim);
        s.graph = augment_to_graph(narrowed, aug, substream(seed, "selection", i));
        s.patched = split_patches(s.graph, set.width, set.height);
        s.label = *set.label;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

struct EpochStats {
    double train_loss = 0;
    double val_accuracy = 0;
    double lr = 0;
};

struct FoldReport {
    int fold_id = 0;
    std::vector<EpochStats> epochs;
    double final_accuracy = 0;
};

// Batch-size-1 gradient descent with the plateau schedule. Deterministic in
// (model_seed, config seed): shuffles, init and selection all flow from
// named substreams.
inline FoldReport train_fold(const Dataset& data, const Fold& fold, bool patched_mode,
                             std::uint64_t model_seed, const TrainConfig& cfg,
                             const gnn::HyperParams& hp,
                             gnn::ModelParams* trained = nullptr) {
    cfg.validate();
    int feature_dim = data.samples.at(0).graph.f;
    auto params = gnn::init_params(feature_dim, hp, model_seed);
    PlateauScheduler sched(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);

    FoldReport report;
    auto ids = fold.train_ids;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(substream(model_seed, "epoch-shuffle", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(ids);

        double loss_sum = 0;
        for (int id : ids) {
            const GraphSample& sample = data.samples[id];
            ad::Tape tape;
            auto pred = patched_mode ? gnn::forward(tape, sample.patched, params, hp)
                                     : gnn::forward_single(tape, sample.graph, params, hp);
            auto target = ad::make_tensor({1, 1}, {static_cast<double>(sample.label)});
            auto loss = tape.huber(tape.sub(pred, target), cfg.huber_delta);
            double lv = loss->values[0];
            if (!std::isfinite(lv))
                throw DivergenceError("train_fold: non-finite loss at epoch " +
                                      std::to_string(epoch));
            loss_sum += lv;
            tape.backward(loss);
            for (const auto& t : params.all()) {
                t->ensure_grad();
                for (std::size_t i = 0; i < t->values.size(); ++i)
                    t->values[i] -= sched.lr * t->grad[i];
                t->zero_grad();
            }
        }

        int correct = 0;
        for (int id : fold.val_ids) {
            const GraphSample& sample = data.samples[id];
            double pred = patched_mode ? gnn::predict(sample.patched, params, hp)
                                       : gnn::predict_single(sample.graph, params, hp);
            if (classify(pred) == sample.label) ++correct;
        }
        double val_acc = fold.val_ids.empty()
                             ? 0.0
                             : static_cast<double>(correct) / fold.val_ids.size();
        double lr_after = sched.step(val_acc);
        report.epochs.push_back(
            {loss_sum / static_cast<double>(ids.size()), val_acc, lr_after});
    }
    report.final_accuracy = report.epochs.empty() ? 0.0 : report.epochs.back().val_accuracy;
    if (trained) *trained = std::move(params);
    return report;
}

// Mean and population standard deviation of the three fold finals, in
// percent.
inline std::pair<double, double> evaluate_cv(const std::vector<FoldReport>& reports) {
    if (reports.size() != 3)
        throw DegenerateDatasetError("evaluate_cv: expected exactly 3 fold reports");
    double mean = 0;
    for (const auto& r : reports) mean += r.final_accuracy;
    mean /= 3.0;
    double var = 0;
    for (const auto& r : reports) var += (r.final_accuracy - mean) * (r.final_accuracy - mean);
    var /= 3.0;
    return {mean * 100.0, std::sqrt(var) * 100.0};
}

// Full 3-fold cross-validation over an already-built dataset.
inline std::vector<FoldReport> train_cv(const Dataset& data, bool patched_mode,
                                        const TrainConfig& cfg, const gnn::HyperParams& hp,
                                        std::vector<gnn::ModelParams>* trained = nullptr) {
    auto folds = make_folds(data.labels(), cfg.folds, substream(cfg.seed, "folds"));
    std::vector<FoldReport> reports;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        gnn::ModelParams params;
        auto report = train_fold(data, folds[f], patched_mode,
                                 substream(cfg.seed, "model", f), cfg, hp,
                                 trained ? &params : nullptr);
        report.fold_id = static_cast<int>(f);
        if (trained) trained->push_back(std::move(params));
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace cellgraph::train
