// SPDX-License-Identifier: Apache-2.0
#include "signx/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "container writer assumes a little-endian host");

namespace signx {

namespace {

constexpr char kMagic[4] = {'S', 'X', 'F', '1'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("format error: truncated container");
    return v;
}

std::string record_payload(const FeatureRecord& r) {
    if (static_cast<std::uint64_t>(r.frames) * r.dim != r.features.size())
        throw std::invalid_argument("dimension error: record feature size for key " + r.key);
    std::ostringstream os(std::ios::binary);
    put<std::uint32_t>(os, r.frames);
    put<std::uint32_t>(os, r.dim);
    put<std::uint16_t>(os, static_cast<std::uint16_t>(r.spans.size()));
    for (const GlossSpan& s : r.spans) {
        put<std::uint32_t>(os, s.gloss);
        put<std::uint32_t>(os, s.start);
        put<std::uint32_t>(os, s.end);
    }
    os.write(reinterpret_cast<const char*>(r.features.data()),
             static_cast<std::streamsize>(r.features.size() * sizeof(float)));
    return os.str();
}

}  // namespace

void container_write(const std::string& path, const std::vector<FeatureRecord>& records) {
    std::set<std::string> seen;
    for (const FeatureRecord& r : records)
        if (!seen.insert(r.key).second)
            throw std::invalid_argument("format error: duplicate key " + r.key);

    std::vector<std::string> payloads;
    payloads.reserve(records.size());
    std::uint64_t index_bytes = 0;
    for (const FeatureRecord& r : records) {
        payloads.push_back(record_payload(r));
        index_bytes += 2 + r.key.size() + 8 + 8;
    }
    std::uint64_t offset = 4 + 2 + 4 + index_bytes;

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("io error: cannot write " + path);
    os.write(kMagic, 4);
    put<std::uint16_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string& key = records[i].key;
        put<std::uint16_t>(os, static_cast<std::uint16_t>(key.size()));
        os.write(key.data(), static_cast<std::streamsize>(key.size()));
        put<std::uint64_t>(os, offset);
        put<std::uint64_t>(os, static_cast<std::uint64_t>(payloads[i].size()));
        offset += payloads[i].size();
    }
    for (const std::string& p : payloads)
        os.write(p.data(), static_cast<std::streamsize>(p.size()));
    if (!os) throw std::runtime_error("io error: failed writing " + path);
}

ContainerReader::ContainerReader(const std::string& path) : path_(path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("io error: cannot read " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("format error: bad container magic in " + path);
    std::uint16_t version = take<std::uint16_t>(is);
    if (version != kVersion)
        throw std::runtime_error("format error: unsupported container version");
    std::uint32_t count = take<std::uint32_t>(is);
    index_.reserve(count);
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        std::uint16_t key_len = take<std::uint16_t>(is);
        e.key.resize(key_len);
        is.read(e.key.data(), key_len);
        e.offset = take<std::uint64_t>(is);
        e.length = take<std::uint64_t>(is);
        if (!is) throw std::runtime_error("format error: truncated container index");
        if (!seen.insert(e.key).second)
            throw std::runtime_error("format error: duplicate key " + e.key);
        index_.push_back(std::move(e));
    }
}

std::vector<std::string> ContainerReader::keys() const {
    std::vector<std::string> out;
    out.reserve(index_.size());
    for (const Entry& e : index_) out.push_back(e.key);
    return out;
}

bool ContainerReader::contains(const std::string& key) const {
    for (const Entry& e : index_)
        if (e.key == key) return true;
    return false;
}

FeatureRecord ContainerReader::read(const std::string& key) const {
    const Entry* entry = nullptr;
    for (const Entry& e : index_)
        if (e.key == key) {
            entry = &e;
            break;
        }
    if (!entry) throw std::out_of_range("not-found error: key " + key);

    std::ifstream is(path_, std::ios::binary);
    if (!is) throw std::runtime_error("io error: cannot read " + path_);
    is.seekg(static_cast<std::streamoff>(entry->offset));
    FeatureRecord r;
    r.key = key;
    r.frames = take<std::uint32_t>(is);
    r.dim = take<std::uint32_t>(is);
    std::uint16_t span_count = take<std::uint16_t>(is);
    std::uint64_t expect = 4 + 4 + 2 + static_cast<std::uint64_t>(span_count) * 12 +
                           static_cast<std::uint64_t>(r.frames) * r.dim * sizeof(float);
    if (expect != entry->length)
        throw std::runtime_error("format error: truncated payload for key " + key);
    r.spans.resize(span_count);
    for (GlossSpan& s : r.spans) {
        s.gloss = take<std::uint32_t>(is);
        s.start = take<std::uint32_t>(is);
        s.end = take<std::uint32_t>(is);
    }
    r.features.resize(static_cast<std::size_t>(r.frames) * r.dim);
    is.read(reinterpret_cast<char*>(r.features.data()),
            static_cast<std::streamsize>(r.features.size() * sizeof(float)));
    if (!is) throw std::runtime_error("format error: truncated payload for key " + key);
    return r;
}

std::vector<FeatureRecord> ContainerReader::read_all() const {
    std::vector<FeatureRecord> out;
    out.reserve(index_.size());
    for (const Entry& e : index_) out.push_back(read(e.key));
    return out;
}

}  // namespace signx
