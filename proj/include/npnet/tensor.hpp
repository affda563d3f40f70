#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace npnet {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major tensor of doubles. Value semantics; gradient storage
// lives on the tape, not here.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::size_t>(numel(shape)) != data.size())
            throw Error("Tensor: data length does not match shape");
    }

    static long numel(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) {
            if (d <= 0) throw Error("Tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    long size() const { return static_cast<long>(data.size()); }
    int dim(int i) const { return shape.at(i); }
    int ndim() const { return static_cast<int>(shape.size()); }

    double& operator[](long i) { return data[i]; }
    double operator[](long i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const;
};

std::string shape_str(const std::vector<int>& s);

}  // namespace npnet
