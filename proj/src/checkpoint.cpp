#include "pano/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace pano {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'N', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                          static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double x;
    std::memcpy(&x, &u, 8);
    return x;
}

double get_f32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    float x;
    std::memcpy(&x, &u, 4);
    return static_cast<double>(x);
}

}  // namespace

void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(0));  // f64
        os.put(static_cast<char>(t.rank()));
        for (int d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
        for (double x : t.v) put_f64(os, x);
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t count = get_u32(is);
    std::map<std::string, Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const int dtype = is.get();
        const int rank = is.get();
        if (dtype != 0 && dtype != 1)
            throw std::runtime_error("load_checkpoint: unknown dtype tag in " + path);
        if (rank < 0 || rank > 4) throw std::runtime_error("load_checkpoint: bad rank in " + path);
        std::vector<int> shape(static_cast<std::size_t>(rank));
        std::int64_t n = 1;
        for (int d = 0; d < rank; ++d) {
            shape[static_cast<std::size_t>(d)] = static_cast<int>(get_u32(is));
            n *= shape[static_cast<std::size_t>(d)];
        }
        Tensor t;
        t.shape = shape;
        t.v.resize(static_cast<std::size_t>(n));
        for (std::int64_t e = 0; e < n; ++e)
            t.v[static_cast<std::size_t>(e)] = dtype == 0 ? get_f64(is) : get_f32(is);
        if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
        out[name] = std::move(t);
    }
    return out;
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("file_hash: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (is) {
        is.read(buf, sizeof(buf));
        const std::streamsize got = is.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

}  // namespace pano
