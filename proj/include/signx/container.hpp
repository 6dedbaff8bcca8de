// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace signx {

struct GlossSpan {
    std::uint32_t gloss = 0;
    std::uint32_t start = 0;
    std::uint32_t end = 0;  // inclusive
};

// One keyed record: a [T x D] float32 feature block plus its gloss spans.
struct FeatureRecord {
    std::string key;
    std::uint32_t frames = 0;
    std::uint32_t dim = 0;
    std::vector<GlossSpan> spans;
    std::vector<float> features;  // row-major, frames * dim
};

// Keyed feature container, magic "SXF1":
//   magic[4] | version u16 | record count u32 |
//   index table: per record key_len u16, key bytes, offset u64, length u64 |
//   payload per record: T u32, D u32, span count u16,
//     spans (gloss u32, start u32, end u32) x count, float32 features.
// Little-endian throughout; offsets are absolute file positions.
void container_write(const std::string& path, const std::vector<FeatureRecord>& records);

class ContainerReader {
public:
    explicit ContainerReader(const std::string& path);
    std::vector<std::string> keys() const;
    bool contains(const std::string& key) const;
    FeatureRecord read(const std::string& key) const;
    std::vector<FeatureRecord> read_all() const;
    std::size_t count() const { return index_.size(); }

private:
    struct Entry {
        std::string key;
        std::uint64_t offset = 0;
        std::uint64_t length = 0;
    };
    std::string path_;
    std::vector<Entry> index_;
};

}  // namespace signx
