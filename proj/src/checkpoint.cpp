#include "npnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace npnet {

const Tensor& Checkpoint::get(const std::string& name) const {
    for (const auto& [n, t] : arrays)
        if (n == name) return t;
    throw Error("checkpoint: missing array '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, t] : arrays)
        if (n == name) return true;
    return false;
}

std::string Checkpoint::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw Error("checkpoint: missing meta key '" + key + "'");
    return it->second;
}

static void write_f64_le(std::ostream& out, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

static void read_f64_le(std::istream& in, std::vector<double>& v) {
    for (double& d : v) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw Error("checkpoint: truncated blob");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&d, &bits, 8);
    }
}

void Checkpoint::save(const std::string& prefix) const {
    std::ofstream man(prefix + ".manifest");
    if (!man) throw Error("checkpoint: cannot write " + prefix + ".manifest");
    man << "npnet-checkpoint 1\n";
    for (const auto& [k, v] : meta) man << "kv " << k << " " << v << "\n";
    long offset = 0;
    for (const auto& [name, t] : arrays) {
        man << "array " << name << " " << offset << " " << t.ndim();
        for (int d : t.shape) man << " " << d;
        man << "\n";
        offset += t.size();
    }
    std::ofstream blob(prefix + ".blob", std::ios::binary);
    if (!blob) throw Error("checkpoint: cannot write " + prefix + ".blob");
    for (const auto& [name, t] : arrays) write_f64_le(blob, t.data);
}

Checkpoint Checkpoint::load(const std::string& prefix) {
    std::ifstream man(prefix + ".manifest");
    if (!man) throw Error("checkpoint: cannot open " + prefix + ".manifest");
    std::string line;
    if (!std::getline(man, line) || line.rfind("npnet-checkpoint 1", 0) != 0)
        throw Error("checkpoint: bad manifest header in " + prefix);
    Checkpoint ck;
    std::ifstream blob(prefix + ".blob", std::ios::binary);
    if (!blob) throw Error("checkpoint: cannot open " + prefix + ".blob");
    while (std::getline(man, line)) {
        if (line.empty()) continue;
        std::istringstream in(line);
        std::string tag;
        in >> tag;
        if (tag == "kv") {
            std::string key, rest;
            in >> key;
            std::getline(in, rest);
            if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
            ck.meta[key] = rest;
        } else if (tag == "array") {
            std::string name;
            long offset;
            int ndim;
            in >> name >> offset >> ndim;
            std::vector<int> shape(ndim);
            for (int& d : shape) in >> d;
            if (!in) throw Error("checkpoint: malformed array line '" + line + "'");
            Tensor t(shape);
            blob.seekg(offset * 8, std::ios::beg);
            read_f64_le(blob, t.data);
            ck.arrays.push_back({name, std::move(t)});
        } else {
            throw Error("checkpoint: unknown manifest tag '" + tag + "'");
        }
    }
    return ck;
}

}  // namespace npnet
