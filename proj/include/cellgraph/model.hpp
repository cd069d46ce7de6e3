#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cellgraph/autodiff.hpp"
#include "cellgraph/errors.hpp"
#include "cellgraph/graph.hpp"
#include "cellgraph/rng.hpp"

namespace cellgraph::gnn {

using ad::Tape;
using ad::TensorPtr;

struct HyperParams {
    int embed_dim = 100;
    double renorm_p = 0.4;
    std::vector<int> pool_sizes = {64, 16, 1};  // cluster counts per block
    // Renormalization as printed assigns the constant p / rowsum to every
    // off-diagonal entry; the default weighted form distributes p
    // proportionally to the entries instead.
    bool literal_renorm = false;

    void validate() const {
        if (renorm_p <= 0.0 || renorm_p >= 1.0)
            throw ShapeMismatchError("hyperparams: renorm_p must lie in (0, 1)");
        if (pool_sizes.size() != 3 || pool_sizes.back() != 1)
            throw ShapeMismatchError("hyperparams: need 3 pool sizes ending in 1");
        for (std::size_t i = 1; i < pool_sizes.size(); ++i)
            if (pool_sizes[i] >= pool_sizes[i - 1])
                throw ShapeMismatchError("hyperparams: pool sizes must decrease strictly");
    }
};

struct GraphState {
    TensorPtr x;    // n x e node features
    TensorPtr adj;  // n x n adjacency
};

struct BlockParams {
    TensorPtr conv1, conv2, conv3;       // in x e
    TensorPtr reembed_w, reembed_b;      // 3e x e, e
    TensorPtr norm_scale, norm_shift;    // e
    TensorPtr pool_w;                    // e x k_b
};

struct ModelParams {
    int feature_dim = 16;
    int embed_dim = 100;
    std::vector<BlockParams> blocks;                     // 3 entries
    TensorPtr head1_w, head1_b;                          // e x 50
    TensorPtr head2_w, head2_b;                          // 50 x 25
    TensorPtr head3_w, head3_b;                          // 25 x 3
    TensorPtr merge1_w, merge1_b;                        // 3 x 3
    TensorPtr merge2_w, merge2_b;                        // 3 x 1

    std::vector<std::pair<std::string, TensorPtr>> named() const {
        std::vector<std::pair<std::string, TensorPtr>> out;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            std::string p = "block" + std::to_string(b + 1) + ".";
            out.emplace_back(p + "conv1", blocks[b].conv1);
            out.emplace_back(p + "conv2", blocks[b].conv2);
            out.emplace_back(p + "conv3", blocks[b].conv3);
            out.emplace_back(p + "reembed.weight", blocks[b].reembed_w);
            out.emplace_back(p + "reembed.bias", blocks[b].reembed_b);
            out.emplace_back(p + "norm.scale", blocks[b].norm_scale);
            out.emplace_back(p + "norm.shift", blocks[b].norm_shift);
            out.emplace_back(p + "pool", blocks[b].pool_w);
        }
        out.emplace_back("head.fc1.weight", head1_w);
        out.emplace_back("head.fc1.bias", head1_b);
        out.emplace_back("head.fc2.weight", head2_w);
        out.emplace_back("head.fc2.bias", head2_b);
        out.emplace_back("head.fc3.weight", head3_w);
        out.emplace_back("head.fc3.bias", head3_b);
        out.emplace_back("merge.fc1.weight", merge1_w);
        out.emplace_back("merge.fc1.bias", merge1_b);
        out.emplace_back("merge.fc2.weight", merge2_w);
        out.emplace_back("merge.fc2.bias", merge2_b);
        return out;
    }

    std::vector<TensorPtr> all() const {
        std::vector<TensorPtr> out;
        for (const auto& [name, t] : named()) out.push_back(t);
        return out;
    }

    void zero_grads() const {
        for (const auto& t : all()) t->zero_grad();
    }
};

namespace detail {

inline TensorPtr glorot(std::size_t in, std::size_t out, std::uint64_t seed,
                        double gain = 1.0) {
    double limit = gain * std::sqrt(6.0 / static_cast<double>(in + out));
    Rng rng(seed);
    std::vector<double> v(in * out);
    for (double& x : v) x = rng.next_in(-limit, limit);
    return ad::make_tensor({in, out}, std::move(v), true);
}

inline TensorPtr fill(std::vector<std::size_t> shape, double value) {
    std::size_t n = ad::Tensor::element_count(shape);
    return ad::make_tensor(std::move(shape), std::vector<double>(n, value), true);
}

}  // namespace detail

// Uniform +-sqrt(6 / (fan_in + fan_out)) weights from the run seed, zero
// biases, identity normalization. One substream per tensor, so the layout
// of one block never shifts another block's draws.
inline ModelParams init_params(int feature_dim, const HyperParams& hp, std::uint64_t seed) {
    hp.validate();
    ModelParams p;
    p.feature_dim = feature_dim;
    p.embed_dim = hp.embed_dim;
    std::uint64_t idx = 0;
    auto stream = [&]() { return substream(seed, "params", idx++); };

    std::size_t e = static_cast<std::size_t>(hp.embed_dim);
    for (int b = 0; b < 3; ++b) {
        std::size_t in = b == 0 ? static_cast<std::size_t>(feature_dim) : e;
        BlockParams bp;
        bp.conv1 = detail::glorot(in, e, stream());
        bp.conv2 = detail::glorot(in, e, stream());
        bp.conv3 = detail::glorot(in, e, stream());
        bp.reembed_w = detail::glorot(3 * e, e, stream());
        bp.reembed_b = detail::fill({e}, 0.0);
        bp.norm_scale = detail::fill({e}, 1.0);
        bp.norm_shift = detail::fill({e}, 0.0);
        // damped so the initial assignments stay soft; full-scale weights
        // saturate the softmax and freeze the clustering where it started
        bp.pool_w = detail::glorot(e, static_cast<std::size_t>(hp.pool_sizes[b]), stream(),
                                   0.3);
        p.blocks.push_back(std::move(bp));
    }
    // ReLU-followed biases start slightly positive: the merge layer is only
    // three units wide, and a dead unit there silences the whole trunk. The
    // output bias starts at the middle grade so early steps differentiate
    // classes instead of chasing the target mean.
    p.head1_w = detail::glorot(e, 50, stream());
    p.head1_b = detail::fill({50}, 0.05);
    p.head2_w = detail::glorot(50, 25, stream());
    p.head2_b = detail::fill({25}, 0.05);
    p.head3_w = detail::glorot(25, 3, stream());
    p.head3_b = detail::fill({3}, 0.0);
    p.merge1_w = detail::glorot(3, 3, stream());
    p.merge1_b = detail::fill({3}, 0.3);
    p.merge2_w = detail::glorot(3, 1, stream());
    p.merge2_b = detail::fill({1}, 1.0);
    return p;
}

// One GraphSAGE convolution: weighted neighborhood mean, linear map, ReLU.
// The pooling assignment reuses it with the activation off.
inline TensorPtr sage_conv(Tape& tape, const TensorPtr& x, const TensorPtr& adj,
                           const TensorPtr& w, bool activate = true) {
    auto h = tape.matmul(tape.sage_aggregate(x, adj), w);
    return activate ? tape.relu(h) : h;
}

struct PoolResult {
    TensorPtr assignment;  // n x k, rows sum to 1
    TensorPtr x;           // k x e
    TensorPtr adj;         // k x k
};

// Applies a given soft assignment: X' = S^T X, A' = S^T A S.
inline PoolResult diffpool_with(Tape& tape, const TensorPtr& x, const TensorPtr& adj,
                                const TensorPtr& assignment) {
    auto st = tape.transpose(assignment);
    PoolResult r;
    r.assignment = assignment;
    r.x = tape.matmul(st, x);
    r.adj = tape.matmul(tape.matmul(st, adj), assignment);
    return r;
}

// Learns the assignment with a convolution (no activation before the
// softmax) and coarsens features and adjacency with it.
inline PoolResult diffpool(Tape& tape, const TensorPtr& x, const TensorPtr& adj,
                           const TensorPtr& pool_w) {
    auto logits = sage_conv(tape, x, adj, pool_w, /*activate=*/false);
    return diffpool_with(tape, x, adj, tape.row_softmax(logits));
}

// One convolutional block: three concatenated convolutions, linear
// re-embedding, pooling, patch norm, adjacency renormalization.
//
// The norm runs after the pooling step. Applied the other way around, the
// final single-cluster pool would sum zero-mean columns and hand the head
// an input-independent embedding. For the same reason a pooled graph of
// one node (the readout of the last block) skips the norm: standardizing a
// single row erases it.
inline GraphState conv_block(Tape& tape, const GraphState& state, const BlockParams& bp,
                             const HyperParams& hp) {
    auto c1 = sage_conv(tape, state.x, state.adj, bp.conv1);
    auto c2 = sage_conv(tape, state.x, state.adj, bp.conv2);
    auto c3 = sage_conv(tape, state.x, state.adj, bp.conv3);
    auto y = tape.concat_cols({c1, c2, c3});
    auto embedded = tape.add_rowvec(tape.matmul(y, bp.reembed_w), bp.reembed_b);
    auto pooled = diffpool(tape, embedded, state.adj, bp.pool_w);
    auto normed = pooled.x->shape[0] > 1
                      ? tape.patch_norm(pooled.x, bp.norm_scale, bp.norm_shift)
                      : pooled.x;
    auto renormed = tape.renormalize_adjacency(pooled.adj, hp.renorm_p, !hp.literal_renorm);
    return {normed, renormed};
}

namespace detail {

inline TensorPtr graph_features(const CellGraph& g) {
    return ad::make_tensor({static_cast<std::size_t>(g.n), static_cast<std::size_t>(g.f)},
                           g.features);
}

inline TensorPtr graph_adjacency(const CellGraph& g) {
    return ad::make_tensor({static_cast<std::size_t>(g.n), static_cast<std::size_t>(g.n)},
                           g.adjacency);
}

// Per-patch pipeline: three blocks, then the 50-25-3 head.
inline TensorPtr patch_logits(Tape& tape, const CellGraph& patch, const ModelParams& params,
                              const HyperParams& hp, int feature_dim) {
    GraphState state;
    if (patch.n == 0) {
        // empty quadrant: padded with one zero node
        state.x = ad::zeros({1, static_cast<std::size_t>(feature_dim)});
        state.adj = ad::zeros({1, 1});
    } else {
        CellGraph ordered = patch;
        canonicalize_order(ordered);
        state.x = graph_features(ordered);
        state.adj = graph_adjacency(ordered);
    }
    for (int b = 0; b < 3; ++b) state = conv_block(tape, state, params.blocks[b], hp);
    auto h1 = tape.relu(tape.add_rowvec(tape.matmul(state.x, params.head1_w), params.head1_b));
    auto h2 = tape.relu(tape.add_rowvec(tape.matmul(h1, params.head2_w), params.head2_b));
    return tape.add_rowvec(tape.matmul(h2, params.head3_w), params.head3_b);
}

inline TensorPtr merge_scalar(Tape& tape, const TensorPtr& logits, const ModelParams& params) {
    auto m = tape.relu(tape.add_rowvec(tape.matmul(logits, params.merge1_w), params.merge1_b));
    return tape.add_rowvec(tape.matmul(m, params.merge2_w), params.merge2_b);
}

inline TensorPtr run_model(Tape& tape, const std::vector<const CellGraph*>& patches,
                           const ModelParams& params, const HyperParams& hp, bool pad_empty) {
    hp.validate();
    std::vector<TensorPtr> scalars;
    for (const CellGraph* patch : patches) {
        if (patch->n == 0 && !pad_empty) continue;
        auto z = patch_logits(tape, *patch, params, hp, params.feature_dim);
        scalars.push_back(merge_scalar(tape, z, params));
    }
    if (scalars.empty()) throw EmptyGraphError("forward: every patch is empty");
    // fixed pairwise tree keeps the summation order canonical
    while (scalars.size() > 1) {
        std::vector<TensorPtr> next;
        for (std::size_t i = 0; i + 1 < scalars.size(); i += 2)
            next.push_back(tape.add(scalars[i], scalars[i + 1]));
        if (scalars.size() % 2 == 1) next.push_back(scalars.back());
        scalars.swap(next);
    }
    std::size_t count = 0;
    for (const CellGraph* patch : patches)
        if (patch->n > 0 || pad_empty) ++count;
    return count == 1 ? scalars[0] : tape.scale(scalars[0], 1.0 / static_cast<double>(count));
}

}  // namespace detail

// Patched forward pass: each quadrant runs the blocks and head
// independently; the merge layers reduce the four patch outputs to one
// scalar prediction. Empty quadrants enter as a single zero node.
inline TensorPtr forward(Tape& tape, const PatchedGraph& pg, const ModelParams& params,
                         const HyperParams& hp) {
    std::vector<const CellGraph*> patches;
    for (const auto& p : pg.patches) patches.push_back(&p);
    return detail::run_model(tape, patches, params, hp, /*pad_empty=*/true);
}

// Same pipeline over a list of patches; the patched model requires
// exactly four.
inline TensorPtr forward_patch_vector(Tape& tape, const std::vector<CellGraph>& patches,
                                      const ModelParams& params, const HyperParams& hp,
                                      bool pad_empty = true) {
    if (patches.size() != 4)
        throw PatchCountError("forward: expected 4 patches, got " +
                              std::to_string(patches.size()));
    std::vector<const CellGraph*> ptrs;
    for (const auto& p : patches) ptrs.push_back(&p);
    return detail::run_model(tape, ptrs, params, hp, pad_empty);
}

// Whole-image variant: one graph per image, merge mean over one scalar.
inline TensorPtr forward_single(Tape& tape, const CellGraph& g, const ModelParams& params,
                                const HyperParams& hp) {
    if (g.n == 0) throw EmptyGraphError("forward_single: graph has no nodes");
    return detail::run_model(tape, {&g}, params, hp, /*pad_empty=*/false);
}

inline double predict(const PatchedGraph& pg, const ModelParams& params, const HyperParams& hp) {
    Tape tape;
    tape.grad_enabled = false;
    return forward(tape, pg, params, hp)->values[0];
}

inline double predict_single(const CellGraph& g, const ModelParams& params,
                             const HyperParams& hp) {
    Tape tape;
    tape.grad_enabled = false;
    return forward_single(tape, g, params, hp)->values[0];
}

}  // namespace cellgraph::gnn
