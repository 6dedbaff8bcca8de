// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

namespace signx {

// Reserved vocabulary slots shared by every sequence model in the pipeline.
inline constexpr int kBlank = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kPad = 3;
inline constexpr int kReserved = 4;

// Bijective gloss <-> index vocabulary. Non-reserved glosses occupy indices
// 4..size-1 in insertion order.
class Codebook {
public:
    Codebook() = default;
    explicit Codebook(const std::vector<std::string>& glosses);

    int add(const std::string& gloss);
    int index_of(const std::string& gloss) const;  // throws on unknown gloss
    const std::string& gloss_at(int index) const;  // throws on reserved/unknown index
    bool contains(const std::string& gloss) const;
    static bool is_reserved(int index) { return index >= 0 && index < kReserved; }

    // Total vocabulary size including the four reserved slots.
    std::size_t size() const { return kReserved + glosses_.size(); }
    std::size_t gloss_count() const { return glosses_.size(); }
    const std::vector<std::string>& glosses() const { return glosses_; }

    // Line-oriented file, one gloss per line, UTF-8; index = line order + 4.
    void save(const std::string& path) const;
    static Codebook load(const std::string& path);

private:
    std::vector<std::string> glosses_;
    std::map<std::string, int> lookup_;
};

}  // namespace signx
