// SPDX-License-Identifier: Apache-2.0
#include "signx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace signx {

namespace {

constexpr char kMagic[4] = {'S', 'X', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("format error: truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("io error: cannot write " + path);
    os.write(kMagic, 4);
    put<std::uint16_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params.count()));
    for (const auto& [name, tensor] : params.all()) {
        put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.rank()));
        for (std::size_t e : tensor.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
        os.write(reinterpret_cast<const char*>(tensor.data()),
                 static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("io error: failed writing " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("io error: cannot read " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("format error: bad checkpoint magic in " + path);
    std::uint16_t version = take<std::uint16_t>(is);
    if (version != kVersion)
        throw std::runtime_error("format error: unsupported checkpoint version");
    std::uint32_t count = take<std::uint32_t>(is);
    ParamStore ps;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = take<std::uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint8_t rank = take<std::uint8_t>(is);
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = take<std::uint32_t>(is);
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is) throw std::runtime_error("format error: truncated checkpoint payload");
        ps.set(name, std::move(t));
    }
    return ps;
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("io error: cannot read " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (is.eof()) break;
    }
    return h;
}

}  // namespace signx
