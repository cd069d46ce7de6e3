#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cellgraph/autodiff.hpp"
#include "cellgraph/errors.hpp"

namespace cellgraph::ad {

// Parameter checkpoint: versioned header, a free-form config string for
// self-description, then named tensor sections with shape and raw
// row-major 64-bit floats. Reload is bit-exact.
//
//   magic "CGCK" | u32 version | u32 config_len | config bytes |
//   u32 count | count * (u32 name_len, name, u32 ndim, u64 dims..., f64 data...)

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("checkpoint: truncated file");
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, TensorPtr>>& tensors,
                            const std::string& config = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("checkpoint: cannot open for writing: " + path);
    os.write("CGCK", 4);
    detail::write_pod<std::uint32_t>(os, 1);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(config.size()));
    os.write(config.data(), static_cast<std::streamsize>(config.size()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t->shape.size()));
        for (std::size_t d : t->shape) detail::write_pod<std::uint64_t>(os, d);
        os.write(reinterpret_cast<const char*>(t->values.data()),
                 static_cast<std::streamsize>(t->values.size() * sizeof(double)));
    }
    if (!os) throw FormatError("checkpoint: write failed: " + path);
}

struct Checkpoint {
    std::string config;
    std::vector<std::pair<std::string, TensorPtr>> tensors;

    const TensorPtr& find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw FormatError("checkpoint: missing tensor section: " + name);
    }
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "CGCK")
        throw FormatError("checkpoint: bad magic in " + path);
    auto version = detail::read_pod<std::uint32_t>(is);
    if (version != 1) throw FormatError("checkpoint: unsupported version");
    Checkpoint ck;
    auto clen = detail::read_pod<std::uint32_t>(is);
    ck.config.resize(clen);
    is.read(ck.config.data(), clen);
    auto count = detail::read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto nlen = detail::read_pod<std::uint32_t>(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        auto ndim = detail::read_pod<std::uint32_t>(is);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(detail::read_pod<std::uint64_t>(is));
        std::size_t n = Tensor::element_count(shape);
        std::vector<double> values(n);
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw FormatError("checkpoint: truncated tensor data in " + path);
        ck.tensors.emplace_back(std::move(name),
                                make_tensor(std::move(shape), std::move(values)));
    }
    return ck;
}

}  // namespace cellgraph::ad
