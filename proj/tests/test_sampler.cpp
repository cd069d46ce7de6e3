#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "cellgraph/rng.hpp"
#include "cellgraph/sampler.hpp"

using namespace cellgraph;

namespace {

CellFeatureSet toy_set(const std::vector<std::pair<double, double>>& pts, int w, int h,
                       int dim = 8) {
    CellFeatureSet set;
    set.width = w;
    set.height = h;
    set.dim = dim;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CellFeatureSet::Cell c;
        c.cx = pts[i].first;
        c.cy = pts[i].second;
        c.features.assign(dim, static_cast<double>(i));
        set.cells.push_back(std::move(c));
    }
    return set;
}

std::vector<std::pair<double, double>> random_points(Rng& rng, int n, double w, double h) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.emplace_back(rng.next_in(0, w), rng.next_in(0, h));
    return pts;
}

}  // namespace

TEST_CASE("empty point set gives an all-zero map", "[sampler]") {
    auto map = build_distribution_map({}, 64, 64, 4);
    REQUIRE(map.total == 0.0);
    for (double c : map.counts) REQUIRE(c == 0.0);
}

TEST_CASE("four box centers on a d=2 grid count one each", "[sampler]") {
    std::vector<std::pair<double, double>> pts = {{16, 16}, {48, 16}, {16, 48}, {48, 48}};
    auto map = build_distribution_map(pts, 64, 64, 2);
    REQUIRE(map.total == 4.0);
    for (double c : map.counts) REQUIRE(c == 1.0);
}

TEST_CASE("distribution map equals a brute-force assignment loop", "[sampler]") {
    Rng rng(17);
    auto pts = random_points(rng, 100, 200, 120);
    int d = 4;
    auto map = build_distribution_map(pts, 200, 120, d);

    std::vector<double> brute(static_cast<std::size_t>(d) * d, 0.0);
    for (auto [x, y] : pts) {
        int col = -1, row = -1;
        for (int j = 0; j < d; ++j)
            if (x >= j * 200.0 / d && (x < (j + 1) * 200.0 / d || j == d - 1)) {
                col = j;
                break;
            }
        for (int i = 0; i < d; ++i)
            if (y >= i * 120.0 / d && (y < (i + 1) * 120.0 / d || i == d - 1)) {
                row = i;
                break;
            }
        brute[static_cast<std::size_t>(row) * d + col] += 1.0;
    }
    REQUIRE(map.counts == brute);
}

TEST_CASE("out-of-bounds points are reported", "[sampler]") {
    REQUIRE_THROWS_AS(build_distribution_map({{-1.0, 5.0}}, 10, 10, 2), OutOfBoundsError);
    REQUIRE_THROWS_AS(build_distribution_map({{3.0, 11.0}}, 10, 10, 2), OutOfBoundsError);
}

TEST_CASE("boundary points belong to the higher-index box", "[sampler]") {
    // x = w/d exactly is the first coordinate of box 1
    auto map = build_distribution_map({{32.0, 0.0}}, 64, 64, 2);
    REQUIRE(map.at(0, 1) == 1.0);
    // the far image edge closes the last box
    auto edge = build_distribution_map({{64.0, 64.0}}, 64, 64, 2);
    REQUIRE(edge.at(1, 1) == 1.0);
}

TEST_CASE("scaling with M equal to the total is the identity", "[sampler]") {
    auto map = build_distribution_map({{1, 1}, {2, 2}, {40, 40}, {50, 50}}, 64, 64, 2);
    auto scaled = scale_distribution(map, 4);
    REQUIRE(scaled.counts == map.counts);
}

TEST_CASE("uniform halving", "[sampler]") {
    DistributionMap map;
    map.d = 2;
    map.width = map.height = 64;
    map.counts = {2, 2, 2, 2};
    map.total = 8;
    auto scaled = scale_distribution(map, 4);
    REQUIRE(scaled.counts == std::vector<double>{1, 1, 1, 1});
    REQUIRE(scaled.total == 4.0);
}

TEST_CASE("scaled totals hit M within 1e-9 relative on random maps", "[sampler]") {
    Rng rng(23);
    for (int rep = 0; rep < 20; ++rep) {
        auto pts = random_points(rng, 50 + static_cast<int>(rng.next_below(200)), 300, 300);
        auto map = build_distribution_map(pts, 300, 300, 8);
        int M = 1 + static_cast<int>(rng.next_below(5000));
        auto scaled = scale_distribution(map, M);
        double sum = 0;
        for (double c : scaled.counts) sum += c;
        REQUIRE(std::fabs(sum - M) <= 1e-9 * M);
        REQUIRE(std::fabs(scaled.total - M) <= 1e-9 * M);

        // conservation of proportions
        for (std::size_t i = 0; i < map.counts.size(); ++i)
            REQUIRE(std::fabs(scaled.counts[i] / M - map.counts[i] / map.total) < 1e-12);
    }
}

TEST_CASE("scaling an empty distribution fails", "[sampler]") {
    auto map = build_distribution_map({}, 10, 10, 2);
    REQUIRE_THROWS_AS(scale_distribution(map, 5), EmptyDistributionError);
}

TEST_CASE("integer-valued scaled map allocates exactly", "[sampler]") {
    DistributionMap raw;
    raw.d = 2;
    raw.width = raw.height = 64;
    raw.counts = {4, 2, 2, 8};
    raw.total = 16;
    auto scaled = scale_distribution(raw, 8);  // {2,1,1,4}
    auto budget = allocate_counts(scaled, raw);
    REQUIRE(budget.allocation == std::vector<int>{2, 1, 1, 4});
    REQUIRE(budget.total() == 8);
}

TEST_CASE("remainder ties break row-major", "[sampler]") {
    DistributionMap raw;
    raw.d = 2;
    raw.width = raw.height = 64;
    raw.counts = {1, 1, 1, 1};
    raw.total = 4;
    DistributionMap scaled = raw;
    scaled.counts = {0.5, 0.5, 0.5, 0.5};
    scaled.total = 2;
    auto budget = allocate_counts(scaled, raw);
    REQUIRE(budget.allocation == std::vector<int>{1, 1, 0, 0});
}

TEST_CASE("allocation caps at availability", "[sampler]") {
    DistributionMap raw;
    raw.d = 2;
    raw.width = raw.height = 64;
    raw.counts = {3, 1, 2, 0};
    raw.total = 6;
    auto scaled = scale_distribution(raw, 10);
    auto budget = allocate_counts(scaled, raw);
    REQUIRE(budget.total() == 6);
    for (std::size_t i = 0; i < raw.counts.size(); ++i)
        REQUIRE(budget.allocation[i] <= static_cast<int>(raw.counts[i]));
}

TEST_CASE("allocations respect caps and hit min(M, N) on random inputs", "[sampler]") {
    Rng rng(37);
    for (int rep = 0; rep < 50; ++rep) {
        int n = 1 + static_cast<int>(rng.next_below(300));
        auto pts = random_points(rng, n, 128, 128);
        auto raw = build_distribution_map(pts, 128, 128, 4);
        int M = 1 + static_cast<int>(rng.next_below(400));
        auto scaled = scale_distribution(raw, M);
        auto budget = allocate_counts(scaled, raw);
        REQUIRE(budget.total() == std::min(M, n));
        for (std::size_t i = 0; i < raw.counts.size(); ++i) {
            REQUIRE(budget.allocation[i] >= 0);
            REQUIRE(budget.allocation[i] <= static_cast<int>(raw.counts[i]));
        }
    }
}

TEST_CASE("select-all returns a permutation of the input", "[sampler]") {
    Rng rng(3);
    auto pts = random_points(rng, 40, 64, 64);
    auto set = toy_set(pts, 64, 64);
    auto raw = build_distribution_map(pts, 64, 64, 4);
    SampleBudget budget;
    budget.d = 4;
    budget.M = 40;
    budget.allocation.assign(16, 0);
    for (std::size_t i = 0; i < raw.counts.size(); ++i)
        budget.allocation[i] = static_cast<int>(raw.counts[i]);
    auto out = select_features(set, budget, 1);
    REQUIRE(out.cells.size() == set.cells.size());
    std::multiset<double> a, b;
    for (const auto& c : set.cells) a.insert(c.features[0]);
    for (const auto& c : out.cells) b.insert(c.features[0]);
    REQUIRE(a == b);
}

TEST_CASE("selection is deterministic per seed", "[sampler]") {
    Rng rng(4);
    auto pts = random_points(rng, 200, 100, 100);
    auto set = toy_set(pts, 100, 100);
    auto raw = build_distribution_map(pts, 100, 100, 4);
    auto scaled = scale_distribution(raw, 60);
    auto budget = allocate_counts(scaled, raw);
    auto a = select_features(set, budget, 99);
    auto b = select_features(set, budget, 99);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i)
        REQUIRE(a.cells[i].features[0] == b.cells[i].features[0]);
    auto c = select_features(set, budget, 100);
    bool same = a.cells.size() == c.cells.size();
    if (same)
        for (std::size_t i = 0; i < a.cells.size(); ++i)
            same = same && a.cells[i].features[0] == c.cells[i].features[0];
    REQUIRE_FALSE(same);
}

TEST_CASE("per-box selection frequency is uniform", "[sampler]") {
    // one box with 5 cells and allocation 2: every cell should appear with
    // frequency 0.4 across seeds
    std::vector<std::pair<double, double>> pts = {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}};
    auto set = toy_set(pts, 8, 8);
    SampleBudget budget;
    budget.d = 1;
    budget.M = 2;
    budget.allocation = {2};
    std::map<double, int> hits;
    const int trials = 10000;
    for (int seed = 0; seed < trials; ++seed) {
        auto out = select_features(set, budget, static_cast<std::uint64_t>(seed));
        REQUIRE(out.cells.size() == 2);
        for (const auto& c : out.cells) hits[c.features[0]] += 1;
    }
    REQUIRE(hits.size() == 5);
    for (const auto& [cell, count] : hits) {
        double freq = static_cast<double>(count) / trials;
        REQUIRE(std::fabs(freq - 0.4) <= 0.02);
    }
}

TEST_CASE("allocation exceeding box population fails", "[sampler]") {
    auto set = toy_set({{1, 1}}, 8, 8);
    SampleBudget budget;
    budget.d = 1;
    budget.M = 2;
    budget.allocation = {2};
    REQUIRE_THROWS_AS(select_features(set, budget, 0), BudgetMismatchError);
}

TEST_CASE("selected cells sit in the boxes that funded them", "[sampler]") {
    Rng rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        auto pts = random_points(rng, 150, 96, 96);
        auto set = toy_set(pts, 96, 96);
        auto raw = build_distribution_map(pts, 96, 96, 3);
        auto scaled = scale_distribution(raw, 50);
        auto budget = allocate_counts(scaled, raw);
        auto out = select_features(set, budget, rep);
        REQUIRE(static_cast<int>(out.cells.size()) == budget.total());

        std::vector<int> per_box(9, 0);
        for (const auto& c : out.cells) per_box[box_index(c.cx, c.cy, 96, 96, 3)] += 1;
        for (int b = 0; b < 9; ++b) REQUIRE(per_box[b] == budget.allocation[b]);
    }
}

TEST_CASE("column translation with wraparound permutes map and allocation", "[sampler]") {
    // one box per count 0..15 keeps every largest-remainder deficit distinct,
    // so the allocation must follow the same column permutation as the map
    Rng rng(12);
    int d = 4, w = 512, h = 512;
    double box = static_cast<double>(w) / d;
    std::vector<std::pair<double, double>> pts;
    for (int row = 0; row < d; ++row)
        for (int col = 0; col < d; ++col) {
            int count = row * d + col;
            for (int k = 0; k < count; ++k)
                pts.emplace_back(col * box + rng.next_in(1, box - 1),
                                 row * box + rng.next_in(1, box - 1));
        }
    auto shifted = pts;
    for (auto& [x, y] : shifted) {
        x += box;
        if (x >= w) x -= w;
    }
    auto map_a = build_distribution_map(pts, w, h, d);
    auto map_b = build_distribution_map(shifted, w, h, d);
    // M = 41 is coprime to the 120-point total: remainders stay distinct
    auto budget_a = allocate_counts(scale_distribution(map_a, 41), map_a);
    auto budget_b = allocate_counts(scale_distribution(map_b, 41), map_b);
    for (int row = 0; row < d; ++row)
        for (int col = 0; col < d; ++col) {
            int shifted_col = (col + 1) % d;
            REQUIRE(map_a.at(row, col) == map_b.at(row, shifted_col));
            REQUIRE(budget_a.allocation[row * d + col] ==
                    budget_b.allocation[row * d + shifted_col]);
        }
}
