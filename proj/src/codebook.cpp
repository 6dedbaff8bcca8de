// SPDX-License-Identifier: Apache-2.0
#include "signx/codebook.hpp"

#include <fstream>
#include <stdexcept>

namespace signx {

Codebook::Codebook(const std::vector<std::string>& glosses) {
    for (const std::string& g : glosses) add(g);
}

int Codebook::add(const std::string& gloss) {
    if (gloss.empty()) throw std::invalid_argument("codebook error: empty gloss");
    auto it = lookup_.find(gloss);
    if (it != lookup_.end()) return it->second;
    int index = kReserved + static_cast<int>(glosses_.size());
    glosses_.push_back(gloss);
    lookup_.emplace(gloss, index);
    return index;
}

int Codebook::index_of(const std::string& gloss) const {
    auto it = lookup_.find(gloss);
    if (it == lookup_.end()) throw std::out_of_range("codebook error: unknown gloss " + gloss);
    return it->second;
}

const std::string& Codebook::gloss_at(int index) const {
    if (index < kReserved || static_cast<std::size_t>(index) >= size())
        throw std::out_of_range("codebook error: index " + std::to_string(index) +
                                " has no gloss");
    return glosses_[static_cast<std::size_t>(index - kReserved)];
}

bool Codebook::contains(const std::string& gloss) const { return lookup_.count(gloss) != 0; }

void Codebook::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("io error: cannot write " + path);
    for (const std::string& g : glosses_) os << g << '\n';
}

Codebook Codebook::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("io error: cannot read " + path);
    Codebook cb;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) cb.add(line);
    }
    return cb;
}

}  // namespace signx
