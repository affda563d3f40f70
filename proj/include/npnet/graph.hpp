#pragma once

#include <string>
#include <vector>

#include "npnet/tensor.hpp"

namespace npnet {

// Fuzzy neighborhood graph: unordered pairs (i<j) with strengths in [0,1].
struct FuzzyGraph {
    int n = 0;
    int k = 0;
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> strengths;

    double strength_of(int i, int j) const;  // 0 if the pair is absent

    // Text edge list: header "n k", then "i j strength" per line.
    void save(const std::string& path) const;
    static FuzzyGraph load(const std::string& path);
};

struct KnnResult {
    int k = 0;
    std::vector<std::vector<int>> neighbors;      // per point, ascending by distance
    std::vector<std::vector<double>> distances;   // parallel to neighbors
};

// Exact brute-force Euclidean kNN over rows of points [n x p]; ties broken
// by lower index; a point is never its own neighbor.
KnnResult knn(const Tensor& points, int k);

// The three-step strength recipe: subtract each point's min neighbor
// distance, exponentiate the negation, average the two directions (a missing
// direction contributes 0).
FuzzyGraph membership_strengths(const KnnResult& r);

FuzzyGraph neighborhood_graph(const Tensor& points, int k);

// Sum over mu's pairs of the fuzzy-set cross entropy, both strengths clamped
// into [1e-6, 1-1e-6] before the logs; mu values of exactly 0 or 1 drop the
// vanishing term.
double fuzzy_cross_entropy(const FuzzyGraph& mu, const FuzzyGraph& nu);

}  // namespace npnet
