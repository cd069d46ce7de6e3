#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cellgraph/errors.hpp"

namespace cellgraph {

// Instance segmentation mask: label 0 is background, label k > 0 is cell
// instance k. The color plane is optional and, when present, has the same
// dimensions with 3 bytes per pixel.
struct LabeledMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> labels;  // row-major, width*height entries
    std::vector<std::uint8_t> rgb;      // empty, or 3*width*height

    bool has_rgb() const { return !rgb.empty(); }

    std::uint32_t label(int x, int y) const {
        return labels[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t channel(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

struct CellInstance {
    std::uint32_t id = 0;   // renumbered 1..K
    double cx = 0, cy = 0;  // pixel-coordinate mean of the instance's pixels
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bounding box
    std::int64_t pixel_count = 0;
};

// One instance per distinct nonzero label, ids renumbered 1..K in ascending
// original-label order. Relabeling instances therefore changes nothing but
// the id assignment.
inline std::vector<CellInstance> extract_cells(const LabeledMask& mask) {
    struct Acc {
        std::int64_t count = 0;
        double sx = 0, sy = 0;
        int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    };
    std::map<std::uint32_t, Acc> acc;  // ordered by original label
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            std::uint32_t l = mask.label(x, y);
            if (l == 0) continue;
            auto [it, fresh] = acc.try_emplace(l);
            Acc& a = it->second;
            if (fresh) {
                a.x0 = a.x1 = x;
                a.y0 = a.y1 = y;
            } else {
                a.x0 = std::min(a.x0, x);
                a.x1 = std::max(a.x1, x);
                a.y0 = std::min(a.y0, y);
                a.y1 = std::max(a.y1, y);
            }
            a.count += 1;
            a.sx += x;
            a.sy += y;
        }
    if (acc.empty()) throw EmptyMaskError("extract_cells: mask contains no nonzero label");

    std::vector<CellInstance> cells;
    cells.reserve(acc.size());
    std::uint32_t next_id = 1;
    for (const auto& [label, a] : acc) {
        CellInstance c;
        c.id = next_id++;
        c.cx = a.sx / static_cast<double>(a.count);
        c.cy = a.sy / static_cast<double>(a.count);
        c.x0 = a.x0;
        c.y0 = a.y0;
        c.x1 = a.x1;
        c.y1 = a.y1;
        c.pixel_count = a.count;
        cells.push_back(c);
    }
    return cells;
}

// ---- mask file formats ----
// Labels: 16-bit single-channel PGM (P5, maxval 65535, big-endian samples).
// Color: 8-bit PPM (P6), same dimensions.

namespace detail {

inline int pnm_token(std::istream& is) {
    // skips whitespace and '#' comments, then reads one non-negative integer
    int c = is.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = is.get();
        c = is.get();
    }
    if (c == EOF || !std::isdigit(c)) throw FormatError("pnm: malformed header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}

}  // namespace detail

inline void save_mask_pgm(const LabeledMask& mask, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("pgm: cannot open for writing: " + path);
    os << "P5\n" << mask.width << " " << mask.height << "\n65535\n";
    for (std::uint32_t l : mask.labels) {
        if (l > 65535) throw FormatError("pgm: label exceeds 16-bit range");
        unsigned char hi = static_cast<unsigned char>(l >> 8);
        unsigned char lo = static_cast<unsigned char>(l & 0xFF);
        os.put(static_cast<char>(hi));
        os.put(static_cast<char>(lo));
    }
    if (!os) throw FormatError("pgm: write failed: " + path);
}

inline void save_mask_ppm(const LabeledMask& mask, const std::string& path) {
    if (!mask.has_rgb()) throw MissingColorError("ppm: mask has no color plane");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("ppm: cannot open for writing: " + path);
    os << "P6\n" << mask.width << " " << mask.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(mask.rgb.data()),
             static_cast<std::streamsize>(mask.rgb.size()));
    if (!os) throw FormatError("ppm: write failed: " + path);
}

inline LabeledMask load_mask_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("pgm: cannot open: " + path);
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '5') throw FormatError("pgm: expected P5 magic in " + path);
    LabeledMask mask;
    mask.width = detail::pnm_token(is);
    mask.height = detail::pnm_token(is);
    int maxval = detail::pnm_token(is);
    if (maxval != 65535) throw FormatError("pgm: expected maxval 65535 in " + path);
    std::size_t n = static_cast<std::size_t>(mask.width) * mask.height;
    mask.labels.resize(n);
    std::vector<unsigned char> buf(n * 2);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw FormatError("pgm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < n; ++i)
        mask.labels[i] = (static_cast<std::uint32_t>(buf[2 * i]) << 8) | buf[2 * i + 1];
    return mask;
}

// Loads the color plane from a P6 file into an existing mask.
inline void load_mask_ppm(LabeledMask& mask, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("ppm: cannot open: " + path);
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '6') throw FormatError("ppm: expected P6 magic in " + path);
    int w = detail::pnm_token(is);
    int h = detail::pnm_token(is);
    int maxval = detail::pnm_token(is);
    if (maxval != 255) throw FormatError("ppm: expected maxval 255 in " + path);
    if (w != mask.width || h != mask.height)
        throw FormatError("ppm: dimensions differ from label mask: " + path);
    std::size_t n = static_cast<std::size_t>(w) * h * 3;
    mask.rgb.resize(n);
    is.read(reinterpret_cast<char*>(mask.rgb.data()), static_cast<std::streamsize>(n));
    if (!is) throw FormatError("ppm: truncated pixel data in " + path);
}

}  // namespace cellgraph
