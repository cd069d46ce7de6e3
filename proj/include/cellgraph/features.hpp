#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cellgraph/errors.hpp"
#include "cellgraph/mask.hpp"

namespace cellgraph {

// Per-cell feature vectors for one image. dim is 8, 12 or 16; the 8- and
// 12-wide variants are exact prefixes of the 16-wide vector.
struct CellFeatureSet {
    int width = 0;
    int height = 0;
    int dim = 16;
    struct Cell {
        double cx = 0, cy = 0;
        std::vector<double> features;
    };
    std::vector<Cell> cells;
    std::optional<int> label;  // grade 0..2
};

namespace detail {

struct BoxStats {
    double mean = 0, stddev = 0;
};

// population statistics
inline BoxStats stats(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<double>(v.size());
    return {m, std::sqrt(var)};
}

// Convex hull area of the cell's pixels, each pixel taken as a unit
// square. Never zero, so the solidity ratio stays finite for 1-pixel cells.
inline double hull_area(const std::vector<std::pair<int, int>>& pixels) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(pixels.size() * 4);
    for (auto [x, y] : pixels) {
        pts.emplace_back(x - 0.5, y - 0.5);
        pts.emplace_back(x + 0.5, y - 0.5);
        pts.emplace_back(x - 0.5, y + 0.5);
        pts.emplace_back(x + 0.5, y + 0.5);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return 1.0;
    auto cross = [](const auto& o, const auto& a, const auto& b) {
        return (a.first - o.first) * (b.second - o.second) -
               (a.second - o.second) * (b.first - o.first);
    };
    std::vector<std::pair<double, double>> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {  // lower
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {  // upper
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    double area2 = 0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& p = hull[i];
        const auto& q = hull[(i + 1) % hull.size()];
        area2 += p.first * q.second - q.first * p.second;
    }
    return std::fabs(area2) / 2.0;
}

inline std::string format_double(double v) {
    std::array<char, 32> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s, int line_no) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("features: bad number '" + std::string(s) + "' at line " +
                          std::to_string(line_no));
    return v;
}

}  // namespace detail

// Feature layout, dim = 16:
//   0..7   bounding-box color: mean R, G, B, gray then std R, G, B, gray,
//          over every pixel of the inclusive bbox (gray = (R+G+B)/3)
//   8..11  mask geometry: pixel area, perimeter edge count, bbox aspect
//          ratio (w/h), extent (area / bbox area)
//   12..15 mask intensity/shape: mean gray over mask pixels, std gray over
//          mask pixels, bbox diagonal, solidity (area / convex hull area)
// dim = 12 stops after extent, dim = 8 keeps only the color block.
inline CellFeatureSet compute_features(const LabeledMask& mask,
                                       const std::vector<CellInstance>& cells, int dim) {
    if (dim != 8 && dim != 12 && dim != 16)
        throw DimMismatchError("compute_features: dim must be 8, 12 or 16");
    if (!mask.has_rgb())
        throw MissingColorError("compute_features: mask has no color plane");

    CellFeatureSet out;
    out.width = mask.width;
    out.height = mask.height;
    out.dim = dim;
    out.cells.reserve(cells.size());

    // labels in id order were renumbered 1..K ascending by original label,
    // so the k-th instance corresponds to the k-th distinct original label
    std::vector<std::uint32_t> original;
    {
        std::vector<std::uint32_t> sorted(mask.labels.begin(), mask.labels.end());
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        for (std::uint32_t l : sorted)
            if (l != 0) original.push_back(l);
    }

    for (const CellInstance& c : cells) {
        std::uint32_t want = original[c.id - 1];
        std::vector<double> r, g, b, gray;
        std::vector<double> mask_gray;
        std::vector<std::pair<int, int>> pixels;
        for (int y = c.y0; y <= c.y1; ++y)
            for (int x = c.x0; x <= c.x1; ++x) {
                double pr = mask.channel(x, y, 0);
                double pg = mask.channel(x, y, 1);
                double pb = mask.channel(x, y, 2);
                double pgray = (pr + pg + pb) / 3.0;
                r.push_back(pr);
                g.push_back(pg);
                b.push_back(pb);
                gray.push_back(pgray);
                if (mask.label(x, y) == want) {
                    mask_gray.push_back(pgray);
                    pixels.emplace_back(x, y);
                }
            }

        std::vector<double> f;
        f.reserve(dim);
        auto sr = detail::stats(r), sg = detail::stats(g), sb = detail::stats(b),
             sy = detail::stats(gray);
        f.insert(f.end(), {sr.mean, sg.mean, sb.mean, sy.mean,
                           sr.stddev, sg.stddev, sb.stddev, sy.stddev});
        if (dim >= 12) {
            double area = static_cast<double>(c.pixel_count);
            // boundary edge count under 4-connectivity
            double perimeter = 0;
            for (auto [x, y] : pixels) {
                auto outside = [&](int nx, int ny) {
                    return nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height ||
                           mask.label(nx, ny) != want;
                };
                perimeter += outside(x - 1, y) + outside(x + 1, y) + outside(x, y - 1) +
                             outside(x, y + 1);
            }
            double bw = c.x1 - c.x0 + 1, bh = c.y1 - c.y0 + 1;
            f.insert(f.end(), {area, perimeter, bw / bh, area / (bw * bh)});
            if (dim == 16) {
                auto sm = detail::stats(mask_gray);
                double diagonal = std::sqrt(bw * bw + bh * bh);
                double solidity = area / detail::hull_area(pixels);
                f.insert(f.end(), {sm.mean, sm.stddev, diagonal, solidity});
            }
        }
        out.cells.push_back({c.cx, c.cy, std::move(f)});
    }
    return out;
}

// ---- feature CSV ----
// First line: "# cellgraph-features v1 dim=<D> w=<W> h=<H> label=<L|none>"
// then one row per cell: id,cx,cy,f0,...,f{D-1}. Floats are written as
// shortest-round-trip decimals, so save/load reproduces values bit-exactly.

inline void save_features(const CellFeatureSet& set, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("features: cannot open for writing: " + path);
    os << "# cellgraph-features v1 dim=" << set.dim << " w=" << set.width
       << " h=" << set.height << " label=";
    if (set.label)
        os << *set.label;
    else
        os << "none";
    os << "\n";
    std::uint32_t id = 1;
    for (const auto& cell : set.cells) {
        os << id++ << "," << detail::format_double(cell.cx) << ","
           << detail::format_double(cell.cy);
        for (double f : cell.features) os << "," << detail::format_double(f);
        os << "\n";
    }
    if (!os) throw FormatError("features: write failed: " + path);
}

inline CellFeatureSet load_features(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("features: cannot open: " + path);
    std::string line;
    if (!std::getline(is, line))
        throw FormatError("features: empty file: " + path);

    CellFeatureSet set;
    {
        std::istringstream hs(line);
        std::string hash, tag, field;
        hs >> hash >> tag;
        if (hash != "#" || tag != "cellgraph-features")
            throw FormatError("features: bad header at line 1 in " + path);
        std::string version;
        hs >> version;
        if (version != "v1") throw FormatError("features: unsupported version at line 1");
        bool have_dim = false, have_w = false, have_h = false;
        while (hs >> field) {
            auto eq = field.find('=');
            if (eq == std::string::npos)
                throw FormatError("features: bad header field '" + field + "' at line 1");
            std::string key = field.substr(0, eq), value = field.substr(eq + 1);
            if (key == "dim") {
                set.dim = std::stoi(value);
                have_dim = true;
            } else if (key == "w") {
                set.width = std::stoi(value);
                have_w = true;
            } else if (key == "h") {
                set.height = std::stoi(value);
                have_h = true;
            } else if (key == "label") {
                if (value != "none") set.label = std::stoi(value);
            } else {
                throw FormatError("features: unknown header key '" + key + "' at line 1");
            }
        }
        if (!have_dim || !have_w || !have_h)
            throw FormatError("features: incomplete header at line 1 in " + path);
        if (set.dim != 8 && set.dim != 12 && set.dim != 16)
            throw DimMismatchError("features: dim in header must be 8, 12 or 16");
    }

    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view sv(line);
        std::size_t pos = 0;
        while (true) {
            std::size_t comma = sv.find(',', pos);
            if (comma == std::string_view::npos) {
                fields.push_back(sv.substr(pos));
                break;
            }
            fields.push_back(sv.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (static_cast<int>(fields.size()) != 3 + set.dim)
            throw FormatError("features: expected " + std::to_string(3 + set.dim) +
                              " columns, got " + std::to_string(fields.size()) + " at line " +
                              std::to_string(line_no));
        CellFeatureSet::Cell cell;
        cell.cx = detail::parse_double(fields[1], line_no);
        cell.cy = detail::parse_double(fields[2], line_no);
        cell.features.reserve(set.dim);
        for (int i = 0; i < set.dim; ++i)
            cell.features.push_back(detail::parse_double(fields[3 + i], line_no));
        set.cells.push_back(std::move(cell));
    }
    return set;
}

// The 8- and 12-wide feature layouts are prefixes of the 16-wide one, so a
// narrower view never needs recomputation.
inline CellFeatureSet prefix_features(const CellFeatureSet& set, int dim) {
    if (dim > set.dim) throw DimMismatchError("prefix_features: cannot widen features");
    if (dim != 8 && dim != 12 && dim != 16)
        throw DimMismatchError("prefix_features: dim must be 8, 12 or 16");
    CellFeatureSet out;
    out.width = set.width;
    out.height = set.height;
    out.dim = dim;
    out.label = set.label;
    out.cells.reserve(set.cells.size());
    for (const auto& cell : set.cells) {
        CellFeatureSet::Cell c;
        c.cx = cell.cx;
        c.cy = cell.cy;
        c.features.assign(cell.features.begin(), cell.features.begin() + dim);
        out.cells.push_back(std::move(c));
    }
    return out;
}

}  // namespace cellgraph
