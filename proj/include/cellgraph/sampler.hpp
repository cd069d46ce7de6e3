#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cellgraph/errors.hpp"
#include "cellgraph/features.hpp"
#include "cellgraph/rng.hpp"

namespace cellgraph {

// d x d grid of per-box point counts over an image. Raw maps hold integer
// counts; scaled maps hold the same proportions rescaled to a node budget.
struct DistributionMap {
    int d = 0;
    int width = 0;
    int height = 0;
    std::vector<double> counts;  // row-major d*d, counts[row*d + col]
    double total = 0;

    double at(int row, int col) const { return counts[static_cast<std::size_t>(row) * d + col]; }
    double& at(int row, int col) { return counts[static_cast<std::size_t>(row) * d + col]; }
};

struct SampleBudget {
    int M = 0;
    int d = 0;
    std::vector<int> allocation;  // row-major d*d

    int total() const {
        int s = 0;
        for (int a : allocation) s += a;
        return s;
    }
};

// Boxes partition the image as half-open intervals; a point exactly on an
// interior boundary belongs to the higher-index box and the far image edge
// closes the last box.
inline int box_coordinate(double v, double extent, int d) {
    int idx = static_cast<int>(std::floor(v * d / extent));
    if (idx >= d) idx = d - 1;
    return idx;
}

inline int box_index(double x, double y, int width, int height, int d) {
    return box_coordinate(y, height, d) * d + box_coordinate(x, width, d);
}

inline DistributionMap build_distribution_map(const std::vector<std::pair<double, double>>& points,
                                              int width, int height, int d) {
    if (d < 1) throw OutOfBoundsError("build_distribution_map: grid dimension must be >= 1");
    DistributionMap map;
    map.d = d;
    map.width = width;
    map.height = height;
    map.counts.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (const auto& [x, y] : points) {
        if (x < 0 || y < 0 || x > width || y > height)
            throw OutOfBoundsError("build_distribution_map: point (" + std::to_string(x) + ", " +
                                   std::to_string(y) + ") outside image bounds");
        map.counts[box_index(x, y, width, height, d)] += 1.0;
    }
    map.total = static_cast<double>(points.size());
    return map;
}

// Rescales every entry by M / total so the map describes M feature points.
inline DistributionMap scale_distribution(const DistributionMap& map, int M) {
    if (map.total <= 0)
        throw EmptyDistributionError("scale_distribution: distribution map is empty");
    DistributionMap out = map;
    double factor = static_cast<double>(M) / map.total;
    double sum = 0;
    for (double& c : out.counts) {
        c *= factor;
        sum += c;
    }
    out.total = sum;
    return out;
}

// Integerizes the scaled map by largest remainder, capped per box by the raw
// counts. Capping deficits go to the most under-allocated boxes that still
// have capacity; ties break row-major. The result sums to min(M, points).
inline SampleBudget allocate_counts(const DistributionMap& scaled, const DistributionMap& raw) {
    SampleBudget budget;
    budget.d = scaled.d;
    budget.M = static_cast<int>(std::llround(scaled.total));
    std::size_t n = scaled.counts.size();
    budget.allocation.assign(n, 0);

    long target = std::min(static_cast<long>(budget.M),
                           static_cast<long>(std::llround(raw.total)));
    long assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int base = static_cast<int>(std::floor(scaled.counts[i]));
        int cap = static_cast<int>(std::llround(raw.counts[i]));
        budget.allocation[i] = std::min(base, cap);
        assigned += budget.allocation[i];
    }
    while (assigned < target) {
        // the box whose allocation trails its scaled share the most; the
        // first pass reduces to classic largest-remainder
        std::size_t pick = n;
        double best = -1e300;
        for (std::size_t i = 0; i < n; ++i) {
            int cap = static_cast<int>(std::llround(raw.counts[i]));
            if (budget.allocation[i] >= cap) continue;
            double deficit = scaled.counts[i] - budget.allocation[i];
            if (deficit > best) {
                best = deficit;
                pick = i;
            }
        }
        if (pick == n) break;  // no capacity anywhere
        budget.allocation[pick] += 1;
        ++assigned;
    }
    return budget;
}

// Uniform without-replacement pick of allocation[i][j] cells inside every
// box. Each box draws from its own substream, so results do not depend on
// any thread schedule; the output preserves the input order of the
// surviving cells.
inline CellFeatureSet select_features(const CellFeatureSet& set, const SampleBudget& budget,
                                      std::uint64_t seed) {
    int d = budget.d;
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(d) * d);
    for (std::size_t i = 0; i < set.cells.size(); ++i)
        members[box_index(set.cells[i].cx, set.cells[i].cy, set.width, set.height, d)].push_back(i);

    std::vector<bool> chosen(set.cells.size(), false);
    for (std::size_t b = 0; b < members.size(); ++b) {
        int want = budget.allocation[b];
        if (want == 0) continue;
        auto& pool = members[b];
        if (static_cast<std::size_t>(want) > pool.size())
            throw BudgetMismatchError("select_features: allocation " + std::to_string(want) +
                                      " exceeds population " + std::to_string(pool.size()) +
                                      " in box " + std::to_string(b));
        Rng rng(substream(seed, b));
        // partial Fisher-Yates: the first `want` slots end up uniform
        for (int k = 0; k < want; ++k) {
            std::size_t j = k + rng.next_below(pool.size() - k);
            std::swap(pool[k], pool[j]);
        }
        for (int k = 0; k < want; ++k) chosen[pool[k]] = true;
    }

    CellFeatureSet out;
    out.width = set.width;
    out.height = set.height;
    out.dim = set.dim;
    out.label = set.label;
    for (std::size_t i = 0; i < set.cells.size(); ++i)
        if (chosen[i]) out.cells.push_back(set.cells[i]);
    return out;
}

inline std::vector<std::pair<double, double>> centroids_of(const CellFeatureSet& set) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(set.cells.size());
    for (const auto& c : set.cells) pts.emplace_back(c.cx, c.cy);
    return pts;
}

}  // namespace cellgraph
