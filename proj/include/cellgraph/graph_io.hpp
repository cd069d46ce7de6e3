#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "cellgraph/errors.hpp"
#include "cellgraph/features.hpp"
#include "cellgraph/graph.hpp"

namespace cellgraph {

// Graph container (one image per file), binary or text. Both forms carry
// the same data: header with augmentation parameters, node table, and the
// upper triangle of the adjacency (diagonal included). Text floats use
// shortest-round-trip decimals, so both forms round-trip bit-exactly.
//
// binary: magic "CGPH" | u32 version | u32 n | u32 f | u32 w | u32 h |
//         i32 label (-1 = none) | f64 alpha | f64 beta | u32 grid_d |
//         u32 nodes | u8 patched | node table (u32 id, f64 cx, f64 cy,
//         f * f64) | n(n+1)/2 * f64 adjacency
// text:   "CGPH v1 text" followed by the same fields, one record per line.

struct GraphFile {
    CellGraph graph;
    int width = 0;
    int height = 0;
    AugmentParams params;
    bool patched = false;
};

namespace detail {

template <typename T>
void write_bin(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_bin(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("graph file: truncated data");
    return v;
}

}  // namespace detail

inline void save_graph_binary(const GraphFile& gf, const std::string& path) {
    const CellGraph& g = gf.graph;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("graph file: cannot open for writing: " + path);
    os.write("CGPH", 4);
    detail::write_bin<std::uint32_t>(os, 1);
    detail::write_bin<std::uint32_t>(os, static_cast<std::uint32_t>(g.n));
    detail::write_bin<std::uint32_t>(os, static_cast<std::uint32_t>(g.f));
    detail::write_bin<std::uint32_t>(os, static_cast<std::uint32_t>(gf.width));
    detail::write_bin<std::uint32_t>(os, static_cast<std::uint32_t>(gf.height));
    detail::write_bin<std::int32_t>(os, g.label ? *g.label : -1);
    detail::write_bin<double>(os, gf.params.alpha);
    detail::write_bin<double>(os, gf.params.beta);
    detail::write_bin<std::uint32_t>(os, static_cast<std::uint32_t>(gf.params.grid_d));
    detail::write_bin<std::uint32_t>(os, static_cast<std::uint32_t>(gf.params.nodes));
    detail::write_bin<std::uint8_t>(os, gf.patched ? 1 : 0);
    for (int k = 0; k < g.n; ++k) {
        detail::write_bin<std::uint32_t>(os, static_cast<std::uint32_t>(k + 1));
        detail::write_bin<double>(os, g.coords[2 * k]);
        detail::write_bin<double>(os, g.coords[2 * k + 1]);
        for (int j = 0; j < g.f; ++j)
            detail::write_bin<double>(os, g.features[static_cast<std::size_t>(k) * g.f + j]);
    }
    for (int k = 0; k < g.n; ++k)
        for (int m = k; m < g.n; ++m) detail::write_bin<double>(os, g.adj(k, m));
    if (!os) throw FormatError("graph file: write failed: " + path);
}

inline void save_graph_text(const GraphFile& gf, const std::string& path) {
    const CellGraph& g = gf.graph;
    std::ofstream os(path);
    if (!os) throw FormatError("graph file: cannot open for writing: " + path);
    os << "CGPH v1 text\n";
    os << "n " << g.n << "\nf " << g.f << "\nw " << gf.width << "\nh " << gf.height
       << "\nlabel " << (g.label ? std::to_string(*g.label) : std::string("none"))
       << "\nalpha " << detail::format_double(gf.params.alpha) << "\nbeta "
       << detail::format_double(gf.params.beta) << "\ngrid_d " << gf.params.grid_d
       << "\nnodes " << gf.params.nodes << "\npatched " << (gf.patched ? 1 : 0) << "\n";
    for (int k = 0; k < g.n; ++k) {
        os << "node " << k + 1 << " " << detail::format_double(g.coords[2 * k]) << " "
           << detail::format_double(g.coords[2 * k + 1]);
        for (int j = 0; j < g.f; ++j)
            os << " " << detail::format_double(g.features[static_cast<std::size_t>(k) * g.f + j]);
        os << "\n";
    }
    os << "adjacency upper\n";
    for (int k = 0; k < g.n; ++k) {
        os << "row " << k;
        for (int m = k; m < g.n; ++m) os << " " << detail::format_double(g.adj(k, m));
        os << "\n";
    }
    if (!os) throw FormatError("graph file: write failed: " + path);
}

inline void save_graph(const GraphFile& gf, const std::string& path, bool text = false) {
    if (text)
        save_graph_text(gf, path);
    else
        save_graph_binary(gf, path);
}

namespace detail {

inline GraphFile load_graph_text(std::istream& is, const std::string& path) {
    GraphFile gf;
    CellGraph& g = gf.graph;
    std::string line;
    auto expect_kv = [&](const std::string& key) -> std::string {
        if (!std::getline(is, line))
            throw FormatError("graph file: truncated header in " + path);
        std::istringstream ls(line);
        std::string k, v;
        ls >> k >> v;
        if (k != key) throw FormatError("graph file: expected '" + key + "' in " + path);
        return v;
    };
    g.n = std::stoi(expect_kv("n"));
    g.f = std::stoi(expect_kv("f"));
    gf.width = std::stoi(expect_kv("w"));
    gf.height = std::stoi(expect_kv("h"));
    std::string label = expect_kv("label");
    if (label != "none") g.label = std::stoi(label);
    gf.params.alpha = parse_double(expect_kv("alpha"), 0);
    gf.params.beta = parse_double(expect_kv("beta"), 0);
    gf.params.grid_d = std::stoi(expect_kv("grid_d"));
    gf.params.nodes = std::stoi(expect_kv("nodes"));
    gf.patched = std::stoi(expect_kv("patched")) != 0;

    g.features.resize(static_cast<std::size_t>(g.n) * g.f);
    g.coords.resize(static_cast<std::size_t>(g.n) * 2);
    g.adjacency.assign(static_cast<std::size_t>(g.n) * g.n, 0.0);
    for (int k = 0; k < g.n; ++k) {
        if (!std::getline(is, line))
            throw FormatError("graph file: truncated node table in " + path);
        std::istringstream ls(line);
        std::string tag, tok;
        int id;
        ls >> tag >> id;
        if (tag != "node") throw FormatError("graph file: expected node record in " + path);
        ls >> tok;
        g.coords[2 * k] = parse_double(tok, 0);
        ls >> tok;
        g.coords[2 * k + 1] = parse_double(tok, 0);
        for (int j = 0; j < g.f; ++j) {
            if (!(ls >> tok))
                throw FormatError("graph file: node record too short in " + path);
            g.features[static_cast<std::size_t>(k) * g.f + j] = parse_double(tok, 0);
        }
    }
    if (!std::getline(is, line) || line != "adjacency upper")
        throw FormatError("graph file: missing adjacency section in " + path);
    for (int k = 0; k < g.n; ++k) {
        if (!std::getline(is, line))
            throw FormatError("graph file: truncated adjacency in " + path);
        std::istringstream ls(line);
        std::string tag, tok;
        int row;
        ls >> tag >> row;
        if (tag != "row" || row != k)
            throw FormatError("graph file: bad adjacency row in " + path);
        for (int m = k; m < g.n; ++m) {
            if (!(ls >> tok)) throw FormatError("graph file: adjacency row too short in " + path);
            double v = parse_double(tok, 0);
            g.adjacency[static_cast<std::size_t>(k) * g.n + m] = v;
            g.adjacency[static_cast<std::size_t>(m) * g.n + k] = v;
        }
    }
    return gf;
}

inline GraphFile load_graph_binary(std::istream& is, const std::string& path) {
    GraphFile gf;
    CellGraph& g = gf.graph;
    auto version = read_bin<std::uint32_t>(is);
    if (version != 1) throw FormatError("graph file: unsupported version in " + path);
    g.n = static_cast<int>(read_bin<std::uint32_t>(is));
    g.f = static_cast<int>(read_bin<std::uint32_t>(is));
    gf.width = static_cast<int>(read_bin<std::uint32_t>(is));
    gf.height = static_cast<int>(read_bin<std::uint32_t>(is));
    auto label = read_bin<std::int32_t>(is);
    if (label >= 0) g.label = label;
    gf.params.alpha = read_bin<double>(is);
    gf.params.beta = read_bin<double>(is);
    gf.params.grid_d = static_cast<int>(read_bin<std::uint32_t>(is));
    gf.params.nodes = static_cast<int>(read_bin<std::uint32_t>(is));
    gf.patched = read_bin<std::uint8_t>(is) != 0;
    g.features.resize(static_cast<std::size_t>(g.n) * g.f);
    g.coords.resize(static_cast<std::size_t>(g.n) * 2);
    g.adjacency.assign(static_cast<std::size_t>(g.n) * g.n, 0.0);
    for (int k = 0; k < g.n; ++k) {
        read_bin<std::uint32_t>(is);  // id, implicit by position
        g.coords[2 * k] = read_bin<double>(is);
        g.coords[2 * k + 1] = read_bin<double>(is);
        for (int j = 0; j < g.f; ++j)
            g.features[static_cast<std::size_t>(k) * g.f + j] = read_bin<double>(is);
    }
    for (int k = 0; k < g.n; ++k)
        for (int m = k; m < g.n; ++m) {
            double v = read_bin<double>(is);
            g.adjacency[static_cast<std::size_t>(k) * g.n + m] = v;
            g.adjacency[static_cast<std::size_t>(m) * g.n + k] = v;
        }
    return gf;
}

}  // namespace detail

// Loads either form; the magic line distinguishes them.
inline GraphFile load_graph(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("graph file: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "CGPH")
        throw FormatError("graph file: bad magic in " + path);
    int next = is.get();
    if (next == ' ') {
        std::string rest;
        std::getline(is, rest);
        if (rest != "v1 text") throw FormatError("graph file: unsupported text form in " + path);
        return detail::load_graph_text(is, path);
    }
    is.unget();
    return detail::load_graph_binary(is, path);
}

}  // namespace cellgraph
