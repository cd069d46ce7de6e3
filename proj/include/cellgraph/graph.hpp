#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "cellgraph/errors.hpp"
#include "cellgraph/features.hpp"
#include "cellgraph/sampler.hpp"

namespace cellgraph {

struct AugmentParams {
    double alpha = 0.5;  // weight of the density-sum term, in [0, 1]
    double beta = 0.5;   // weight of the density-contrast term, in [0, 1]
    int grid_d = 32;
    int nodes = 200;  // node budget M
};

// Edge value between two feature points from their box densities:
// alpha * (dk + dm) + beta * |dk - dm|. Symmetric by construction.
inline double edge_weight(double dk, double dm, double alpha, double beta) {
    return alpha * (dk + dm) + beta * std::fabs(dk - dm);
}

// Dense cell graph of one image: every node is connected to every other
// node, edges weighted by local density. The diagonal carries the formula
// applied at k == m (the contrast term vanishes).
struct CellGraph {
    int n = 0;
    int f = 0;
    std::vector<double> features;   // n*f row-major
    std::vector<double> coords;     // n*2, (cx, cy) pairs
    std::vector<double> adjacency;  // n*n symmetric, non-negative
    std::optional<int> label;

    double adj(int k, int m) const { return adjacency[static_cast<std::size_t>(k) * n + m]; }
};

// Quadrant split of one image's graph, ordered top-left, top-right,
// bottom-left, bottom-right.
struct PatchedGraph {
    std::array<CellGraph, 4> patches;
    std::optional<int> label;
    int width = 0;
    int height = 0;
};

inline CellGraph build_graph(const CellFeatureSet& set, const DistributionMap& density,
                             const AugmentParams& params) {
    if (set.cells.empty()) throw EmptyGraphError("build_graph: feature set has no cells");
    CellGraph g;
    g.n = static_cast<int>(set.cells.size());
    g.f = set.dim;
    g.label = set.label;
    g.features.reserve(static_cast<std::size_t>(g.n) * g.f);
    g.coords.reserve(static_cast<std::size_t>(g.n) * 2);

    std::vector<double> dens(g.n);
    for (int k = 0; k < g.n; ++k) {
        const auto& cell = set.cells[k];
        g.features.insert(g.features.end(), cell.features.begin(), cell.features.end());
        g.coords.push_back(cell.cx);
        g.coords.push_back(cell.cy);
        dens[k] = density.counts[box_index(cell.cx, cell.cy, set.width, set.height, density.d)];
    }

    g.adjacency.resize(static_cast<std::size_t>(g.n) * g.n);
    for (int k = 0; k < g.n; ++k)
        for (int m = 0; m < g.n; ++m)
            g.adjacency[static_cast<std::size_t>(k) * g.n + m] =
                edge_weight(dens[k], dens[m], params.alpha, params.beta);
    return g;
}

// Feature set -> downsampled set -> dense graph, in one call.
inline CellGraph augment_to_graph(const CellFeatureSet& set, const AugmentParams& params,
                                  std::uint64_t selection_seed) {
    auto raw = build_distribution_map(centroids_of(set), set.width, set.height, params.grid_d);
    auto scaled = scale_distribution(raw, params.nodes);
    auto budget = allocate_counts(scaled, raw);
    auto selected = select_features(set, budget, selection_seed);
    return build_graph(selected, scaled, params);
}

// Nodes go to the quadrant holding their centroid (x == w/2 belongs right,
// y == h/2 belongs bottom); each patch adjacency is the principal submatrix
// of the original and cross-quadrant edges are dropped.
inline PatchedGraph split_patches(const CellGraph& g, int width, int height) {
    PatchedGraph pg;
    pg.label = g.label;
    pg.width = width;
    pg.height = height;

    std::array<std::vector<int>, 4> quadrant_nodes;
    for (int k = 0; k < g.n; ++k) {
        double x = g.coords[2 * k], y = g.coords[2 * k + 1];
        int q = (y < height / 2.0 ? 0 : 2) + (x < width / 2.0 ? 0 : 1);
        quadrant_nodes[q].push_back(k);
    }
    for (int q = 0; q < 4; ++q) {
        const auto& nodes = quadrant_nodes[q];
        CellGraph& p = pg.patches[q];
        p.n = static_cast<int>(nodes.size());
        p.f = g.f;
        p.label = g.label;
        p.features.reserve(static_cast<std::size_t>(p.n) * p.f);
        p.coords.reserve(static_cast<std::size_t>(p.n) * 2);
        p.adjacency.resize(static_cast<std::size_t>(p.n) * p.n);
        for (int a = 0; a < p.n; ++a) {
            int k = nodes[a];
            p.features.insert(p.features.end(), g.features.begin() + static_cast<long>(k) * g.f,
                              g.features.begin() + static_cast<long>(k + 1) * g.f);
            p.coords.push_back(g.coords[2 * k]);
            p.coords.push_back(g.coords[2 * k + 1]);
            for (int b = 0; b < p.n; ++b)
                p.adjacency[static_cast<std::size_t>(a) * p.n + b] = g.adj(k, nodes[b]);
        }
    }
    return pg;
}

// Reorders nodes into a canonical order (coordinates, then features,
// lexicographically). The forward pass sorts each patch this way so that
// any within-patch node permutation produces a bit-identical prediction.
inline void canonicalize_order(CellGraph& g) {
    std::vector<int> order(g.n);
    std::iota(order.begin(), order.end(), 0);
    auto key_less = [&](int a, int b) {
        double ax = g.coords[2 * a], ay = g.coords[2 * a + 1];
        double bx = g.coords[2 * b], by = g.coords[2 * b + 1];
        if (ax != bx) return ax < bx;
        if (ay != by) return ay < by;
        return std::lexicographical_compare(
            g.features.begin() + static_cast<long>(a) * g.f,
            g.features.begin() + static_cast<long>(a + 1) * g.f,
            g.features.begin() + static_cast<long>(b) * g.f,
            g.features.begin() + static_cast<long>(b + 1) * g.f);
    };
    std::sort(order.begin(), order.end(), key_less);

    CellGraph out;
    out.n = g.n;
    out.f = g.f;
    out.label = g.label;
    out.features.resize(g.features.size());
    out.coords.resize(g.coords.size());
    out.adjacency.resize(g.adjacency.size());
    for (int a = 0; a < g.n; ++a) {
        int k = order[a];
        std::copy(g.features.begin() + static_cast<long>(k) * g.f,
                  g.features.begin() + static_cast<long>(k + 1) * g.f,
                  out.features.begin() + static_cast<long>(a) * g.f);
        out.coords[2 * a] = g.coords[2 * k];
        out.coords[2 * a + 1] = g.coords[2 * k + 1];
        for (int b = 0; b < g.n; ++b)
            out.adjacency[static_cast<std::size_t>(a) * g.n + b] = g.adj(k, order[b]);
    }
    g = std::move(out);
}

}  // namespace cellgraph
