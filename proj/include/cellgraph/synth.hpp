#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cellgraph/errors.hpp"
#include "cellgraph/mask.hpp"
#include "cellgraph/rng.hpp"

namespace cellgraph {

// Synthetic tissue for desk-scale runs. Grades differ the way tumor foci
// differ from normal tissue: higher grades form more and tighter dense
// clusters, and nuclei in crowded neighborhoods stain darker. Total cell
// counts overlap across grades on purpose, so the class is carried by the
// local density structure rather than by a global count, and the
// crowding-tone coupling puts that signal into within-image feature
// variation, which survives the model's per-patch normalization. Cells are
// non-overlapping ellipse stamps.
struct SynthSpec {
    int width = 512;
    int height = 512;
    // inclusive cell-count range per grade; means rise with grade but the
    // ranges overlap
    std::array<std::pair<int, int>, 3> cells_per_grade = {
        {{135, 165}, {155, 185}, {175, 205}}};
    // dense focus seeds per grade; grade 0 scatters uniformly
    std::array<int, 3> clusters_per_grade = {0, 2, 5};
    std::array<double, 3> cluster_fraction = {0.0, 0.45, 0.65};  // cells placed near a seed
    double cluster_sigma = 20.0;  // gaussian spread around a focus seed
    double min_semi_axis = 2.5;
    double max_semi_axis = 6.0;
    std::array<int, 3> nucleus_gray = {165, 150, 135};  // base tone per grade
    double crowd_radius = 45.0;  // neighborhood for the crowding count
    double crowd_gain = 5.0;     // gray levels each crowded neighbor darkens
    int crowd_cap = 20;
    double color_noise = 10.0;
    int max_attempts_per_cell = 80;
    std::optional<int> forced_grade;
};

namespace detail {

struct Stamp {
    double cx, cy, a, b, cos_t, sin_t;
    bool contains(double x, double y) const {
        double dx = x - cx, dy = y - cy;
        double u = dx * cos_t + dy * sin_t;
        double v = -dx * sin_t + dy * cos_t;
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

}  // namespace detail

// Deterministic in (spec, seed): the same pair always yields byte-identical
// masks. Higher grades place more, darker, more clustered cells.
inline std::pair<LabeledMask, int> generate_synthetic_tissue(const SynthSpec& spec,
                                                             std::uint64_t seed) {
    Rng grade_rng(substream(seed, "grade"));
    int grade = spec.forced_grade ? *spec.forced_grade
                                  : static_cast<int>(grade_rng.next_below(3));

    Rng rng(substream(seed, "placement"));
    auto [lo, hi] = spec.cells_per_grade[grade];
    int target = static_cast<int>(rng.next_int_in(lo, hi));

    LabeledMask mask;
    mask.width = spec.width;
    mask.height = spec.height;
    mask.labels.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);
    mask.rgb.assign(static_cast<std::size_t>(spec.width) * spec.height * 3, 0);

    // background: light eosin-like tone with mild noise
    Rng bg_rng(substream(seed, "background"));
    for (std::size_t i = 0; i < mask.labels.size(); ++i) {
        double n = bg_rng.next_normal() * 4.0;
        auto clamp8 = [](double v) {
            return static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
        };
        mask.rgb[3 * i + 0] = clamp8(232 + n);
        mask.rgb[3 * i + 1] = clamp8(222 + n);
        mask.rgb[3 * i + 2] = clamp8(228 + n);
    }
    if (target == 0) return {mask, grade};

    int n_clusters = spec.clusters_per_grade[grade];
    std::vector<std::pair<double, double>> cluster_seeds;
    for (int c = 0; c < n_clusters; ++c)
        cluster_seeds.emplace_back(rng.next_in(0.1 * spec.width, 0.9 * spec.width),
                                   rng.next_in(0.1 * spec.height, 0.9 * spec.height));

    std::vector<detail::Stamp> stamps;
    stamps.reserve(target);
    long attempts_left = static_cast<long>(target) * spec.max_attempts_per_cell;
    while (static_cast<int>(stamps.size()) < target && attempts_left > 0) {
        --attempts_left;
        double x, y;
        if (!cluster_seeds.empty() && rng.next_double() < spec.cluster_fraction[grade]) {
            const auto& s = cluster_seeds[rng.next_below(cluster_seeds.size())];
            x = s.first + rng.next_normal() * spec.cluster_sigma;
            y = s.second + rng.next_normal() * spec.cluster_sigma;
        } else {
            x = rng.next_in(0, spec.width);
            y = rng.next_in(0, spec.height);
        }
        double a = rng.next_in(spec.min_semi_axis, spec.max_semi_axis);
        double b = rng.next_in(spec.min_semi_axis, a);
        if (x - a < 1 || x + a >= spec.width - 1 || y - a < 1 || y + a >= spec.height - 1)
            continue;
        bool overlaps = false;
        for (const auto& st : stamps) {
            double dx = st.cx - x, dy = st.cy - y;
            double min_d = st.a + a + 1.0;
            if (dx * dx + dy * dy < min_d * min_d) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) continue;
        double theta = rng.next_in(0, 3.14159265358979323846);
        stamps.push_back({x, y, a, b, std::cos(theta), std::sin(theta)});
    }
    if (static_cast<int>(stamps.size()) < target)
        throw SpecError("generate_synthetic_tissue: could not place " + std::to_string(target) +
                        " non-overlapping cells (placed " + std::to_string(stamps.size()) +
                        "); lower the density or enlarge the image");

    // crowded nuclei stain darker: count neighbors inside crowd_radius
    std::vector<int> crowding(stamps.size(), 0);
    double r2 = spec.crowd_radius * spec.crowd_radius;
    for (std::size_t i = 0; i < stamps.size(); ++i)
        for (std::size_t j = i + 1; j < stamps.size(); ++j) {
            double dx = stamps[i].cx - stamps[j].cx, dy = stamps[i].cy - stamps[j].cy;
            if (dx * dx + dy * dy < r2) {
                crowding[i] += 1;
                crowding[j] += 1;
            }
        }

    Rng color_rng(substream(seed, "color"));
    std::uint32_t label = 0;
    for (std::size_t s = 0; s < stamps.size(); ++s) {
        const auto& st = stamps[s];
        ++label;
        double tone = spec.nucleus_gray[grade] -
                      spec.crowd_gain * std::min(crowding[s], spec.crowd_cap) +
                      color_rng.next_normal() * spec.color_noise;
        int x0 = static_cast<int>(std::floor(st.cx - st.a));
        int x1 = static_cast<int>(std::ceil(st.cx + st.a));
        int y0 = static_cast<int>(std::floor(st.cy - st.a));
        int y1 = static_cast<int>(std::ceil(st.cy + st.a));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                if (!st.contains(x, y)) continue;
                std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
                mask.labels[i] = label;
                double n = color_rng.next_normal() * 3.0;
                auto clamp8 = [](double v) {
                    return static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
                };
                // haematoxylin-like nucleus: blue-ish, darker for higher grade
                mask.rgb[3 * i + 0] = clamp8(tone * 0.75 + n);
                mask.rgb[3 * i + 1] = clamp8(tone * 0.70 + n);
                mask.rgb[3 * i + 2] = clamp8(tone + n);
            }
    }
    return {mask, grade};
}

}  // namespace cellgraph
