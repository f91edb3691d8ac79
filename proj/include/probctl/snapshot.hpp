#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "probctl/network.hpp"

namespace probctl {

/// Binary network snapshot: a short header (magic, tag, layer sizes) followed
/// by the flat parameter vector as little-endian 64-bit floats.
///
///   "PCN1" | u32 tag_len | tag bytes | u32 n_sizes | u32 sizes[] |
///   u64 n_params | f64 params[]
namespace snapshot_detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

inline void put_u64(std::ofstream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline void put_f64(std::ofstream& out, double d) {
    put_u64(out, std::bit_cast<std::uint64_t>(d));
}

inline std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("snapshot: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("snapshot: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::ifstream& in) { return std::bit_cast<double>(get_u64(in)); }

} // namespace snapshot_detail

inline void save_network(const Network& net, const std::string& tag, const std::string& path) {
    using namespace snapshot_detail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("snapshot: cannot write " + path);
    out.write("PCN1", 4);
    put_u32(out, static_cast<std::uint32_t>(tag.size()));
    out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
    put_u32(out, static_cast<std::uint32_t>(net.layer_sizes().size()));
    for (int s : net.layer_sizes()) put_u32(out, static_cast<std::uint32_t>(s));
    put_u64(out, static_cast<std::uint64_t>(net.num_params()));
    for (Eigen::Index i = 0; i < net.num_params(); ++i) put_f64(out, net.params()[i]);
    if (!out) throw std::runtime_error("snapshot: write failed for " + path);
}

struct LoadedNetwork {
    Network net;
    std::string tag;
};

inline LoadedNetwork load_network(const std::string& path) {
    using namespace snapshot_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("snapshot: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PCN1", 4) != 0)
        throw std::runtime_error("snapshot: bad magic in " + path);
    const std::uint32_t tag_len = get_u32(in);
    if (tag_len > 256) throw std::runtime_error("snapshot: unreasonable tag length in " + path);
    std::string tag(tag_len, '\0');
    in.read(tag.data(), tag_len);
    const std::uint32_t n_sizes = get_u32(in);
    if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("snapshot: bad layer count in " + path);
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) s = static_cast<int>(get_u32(in));
    Network net{sizes};
    const std::uint64_t n_params = get_u64(in);
    if (n_params != static_cast<std::uint64_t>(net.num_params()))
        throw std::runtime_error("snapshot: parameter count does not match layer sizes in " + path);
    for (Eigen::Index i = 0; i < net.num_params(); ++i) net.params()[i] = get_f64(in);
    if (!in) throw std::runtime_error("snapshot: truncated parameters in " + path);
    return {std::move(net), std::move(tag)};
}

} // namespace probctl
