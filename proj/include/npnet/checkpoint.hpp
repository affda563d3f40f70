#pragma once

#include <map>
#include <string>
#include <vector>

#include "npnet/tensor.hpp"

namespace npnet {

// Checkpoint = <prefix>.manifest (text) + <prefix>.blob (little-endian
// float64, arrays concatenated in manifest order).
struct Checkpoint {
    std::map<std::string, std::string> meta;  // free-form key-value entries
    std::vector<std::pair<std::string, Tensor>> arrays;

    void add(const std::string& name, const Tensor& t) { arrays.push_back({name, t}); }
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
    std::string meta_at(const std::string& key) const;

    void save(const std::string& prefix) const;
    static Checkpoint load(const std::string& prefix);
};

}  // namespace npnet
