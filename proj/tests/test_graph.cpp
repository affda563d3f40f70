#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "doctest.h"
#include "npnet/graph.hpp"
#include "npnet/rng.hpp"

using namespace npnet;

namespace {

Tensor rand_points(int n, int p, Rng& rng) {
    Tensor t({n, p});
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("membership strengths on a worked 1-d example") {
    // Points 0, 1, 3 on the line with k = 2. Per-source offsets d' subtract
    // each source's nearest distance, z = exp(-d'), mu = (z_ij + z_ji) / 2.
    Tensor pts({3, 1}, {0.0, 1.0, 3.0});
    FuzzyGraph g = neighborhood_graph(pts, 2);
    CHECK(g.strength_of(0, 1) == doctest::Approx(1.0));
    CHECK(g.strength_of(0, 2) == doctest::Approx((std::exp(-2.0) + std::exp(-1.0)) / 2.0));
    CHECK(g.strength_of(1, 2) == doctest::Approx((std::exp(-1.0) + 1.0) / 2.0));
}

TEST_CASE("knn matches a full-sort oracle") {
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        int n = 30, p = 4, k = 5;
        Tensor pts = rand_points(n, p, rng);
        KnnResult r = knn(pts, k);
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<double, int>> all;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                double s = 0.0;
                for (int q = 0; q < p; ++q) {
                    double d = pts[static_cast<long>(i) * p + q] - pts[static_cast<long>(j) * p + q];
                    s += d * d;
                }
                all.push_back({s, j});
            }
            std::sort(all.begin(), all.end());
            for (int t = 0; t < k; ++t) {
                CHECK(r.neighbors[i][t] == all[t].second);
                CHECK(r.distances[i][t] == doctest::Approx(std::sqrt(all[t].first)));
            }
            // Distances come back sorted ascending.
            CHECK(std::is_sorted(r.distances[i].begin(), r.distances[i].end()));
        }
    }
}

TEST_CASE("strengths stay in [0,1] and nearest neighbors get at least 1/2") {
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(50 + seed);
        Tensor pts = rand_points(40, 3, rng);
        KnnResult r = knn(pts, 6);
        FuzzyGraph g = membership_strengths(r);
        for (double s : g.strengths) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        for (int i = 0; i < 40; ++i)
            CHECK(g.strength_of(i, r.neighbors[i][0]) >= 0.5);
        // Edge list is deduplicated and ordered i < j.
        std::set<std::pair<int, int>> seen;
        for (auto pr : g.pairs) {
            CHECK(pr.first < pr.second);
            CHECK(seen.insert(pr).second);
        }
    }
}

TEST_CASE("fuzzy cross entropy: nonnegative, zero iff equal") {
    Rng rng(7);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 12;
        FuzzyGraph a, b;
        a.n = b.n = n;
        a.k = b.k = 3;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform(0.0, 1.0) < 0.3) {
                    a.pairs.push_back({i, j});
                    a.strengths.push_back(rng.uniform(0.0, 1.0));
                }
        b.pairs = a.pairs;
        bool equal = trial % 2 == 0;
        bool differs = false;
        for (double s : a.strengths) {
            if (equal) {
                b.strengths.push_back(s);
            } else {
                double v = rng.uniform(0.0, 1.0);
                if (std::abs(v - s) > 1e-3) differs = true;
                b.strengths.push_back(v);
            }
        }
        double c = fuzzy_cross_entropy(a, b);
        CHECK(c >= 0.0);
        if (equal) CHECK(c == doctest::Approx(0.0).epsilon(1e-12));
        if (differs && !a.pairs.empty()) CHECK(c > 0.0);
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("fuzzy cross entropy hand value") {
    FuzzyGraph a, b;
    a.n = b.n = 2;
    a.k = b.k = 1;
    a.pairs = b.pairs = {{0, 1}};
    a.strengths = {1.0};
    b.strengths = {0.5};
    // 1 * log(clamp(1)/0.5) with the 1e-6 clamp.
    CHECK(fuzzy_cross_entropy(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("graph save/load round trip") {
    Rng rng(3);
    FuzzyGraph g = neighborhood_graph(rand_points(15, 2, rng), 4);
    std::string path = "/tmp/npnet_graph_test.txt";
    g.save(path);
    FuzzyGraph h = FuzzyGraph::load(path);
    std::remove(path.c_str());
    REQUIRE(h.pairs.size() == g.pairs.size());
    CHECK(h.n == g.n);
    CHECK(h.k == g.k);
    for (std::size_t i = 0; i < g.pairs.size(); ++i) {
        CHECK(h.pairs[i] == g.pairs[i]);
        CHECK(h.strengths[i] == doctest::Approx(g.strengths[i]).epsilon(1e-15));
    }
}

TEST_CASE("knn input validation") {
    Rng rng(1);
    Tensor pts = rand_points(5, 2, rng);
    CHECK_THROWS_AS(knn(pts, 0), Error);
    CHECK_THROWS_AS(knn(pts, 5), Error);
    pts[3] = std::nan("");
    CHECK_THROWS_AS(knn(pts, 2), Error);
}
