#include "npnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

namespace npnet {

double FuzzyGraph::strength_of(int i, int j) const {
    if (i > j) std::swap(i, j);
    for (std::size_t p = 0; p < pairs.size(); ++p)
        if (pairs[p] == std::make_pair(i, j)) return strengths[p];
    return 0.0;
}

void FuzzyGraph::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("graph: cannot write " + path);
    out << n << " " << k << "\n";
    out.precision(17);
    for (std::size_t p = 0; p < pairs.size(); ++p)
        out << pairs[p].first << " " << pairs[p].second << " " << strengths[p] << "\n";
}

FuzzyGraph FuzzyGraph::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("graph: cannot open " + path);
    FuzzyGraph g;
    if (!(in >> g.n >> g.k)) throw Error("graph: bad header in " + path);
    int i, j;
    double s;
    while (in >> i >> j >> s) {
        g.pairs.push_back({i, j});
        g.strengths.push_back(s);
    }
    return g;
}

KnnResult knn(const Tensor& points, int k) {
    if (points.ndim() != 2) throw Error("knn: expected [n x p] points");
    int n = points.dim(0), p = points.dim(1);
    if (k < 1 || k >= n) throw Error("knn: need 1 <= k < n");
    if (!points.all_finite()) throw Error("knn: non-finite coordinates");

    KnnResult r;
    r.k = k;
    r.neighbors.resize(n);
    r.distances.resize(n);
    std::vector<std::pair<double, int>> cand(n);
    for (int i = 0; i < n; ++i) {
        const double* a = &points.data[static_cast<long>(i) * p];
        for (int j = 0; j < n; ++j) {
            const double* b = &points.data[static_cast<long>(j) * p];
            double s = 0.0;
            for (int q = 0; q < p; ++q) {
                double diff = a[q] - b[q];
                s += diff * diff;
            }
            cand[j] = {s, j};
        }
        cand[i].first = 1e300;  // exclude self
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        r.neighbors[i].resize(k);
        r.distances[i].resize(k);
        for (int t = 0; t < k; ++t) {
            r.neighbors[i][t] = cand[t].second;
            r.distances[i][t] = std::sqrt(cand[t].first);
        }
    }
    return r;
}

FuzzyGraph membership_strengths(const KnnResult& r) {
    int n = static_cast<int>(r.neighbors.size());
    std::map<std::pair<int, int>, double> acc;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(r.neighbors[i].size()) != r.k)
            throw Error("membership_strengths: ragged knn result");
        double dmin = r.distances[i].empty() ? 0.0 : r.distances[i][0];
        for (int t = 0; t < r.k; ++t) {
            int j = r.neighbors[i][t];
            double z = std::exp(-(r.distances[i][t] - dmin));
            auto key = std::minmax(i, j);
            acc[{key.first, key.second}] += 0.5 * z;
        }
    }
    FuzzyGraph g;
    g.n = n;
    g.k = r.k;
    for (const auto& [pair, s] : acc) {
        g.pairs.push_back(pair);
        g.strengths.push_back(std::min(s, 1.0));
    }
    return g;
}

FuzzyGraph neighborhood_graph(const Tensor& points, int k) {
    return membership_strengths(knn(points, k));
}

double fuzzy_cross_entropy(const FuzzyGraph& mu, const FuzzyGraph& nu) {
    if (mu.n != nu.n) throw Error("fuzzy_cross_entropy: graphs over different point counts");
    constexpr double lo = 1e-6, hi = 1.0 - 1e-6;
    std::unordered_map<long, double> nu_of;
    nu_of.reserve(nu.pairs.size());
    for (std::size_t p = 0; p < nu.pairs.size(); ++p)
        nu_of[static_cast<long>(nu.pairs[p].first) * nu.n + nu.pairs[p].second] = nu.strengths[p];
    double c = 0.0;
    for (std::size_t p = 0; p < mu.pairs.size(); ++p) {
        double m = mu.strengths[p];
        auto it = nu_of.find(static_cast<long>(mu.pairs[p].first) * nu.n + mu.pairs[p].second);
        double v = std::clamp(it == nu_of.end() ? 0.0 : it->second, lo, hi);
        double mc = std::clamp(m, lo, hi);
        if (m > 0.0) c += m * std::log(mc / v);
        if (m < 1.0) c += (1.0 - m) * std::log((1.0 - mc) / (1.0 - v));
    }
    return c;
}

}  // namespace npnet
