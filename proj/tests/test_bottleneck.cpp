#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "npnet/bottleneck.hpp"
#include "npnet/rng.hpp"

using namespace npnet;

namespace {

EmbeddingTable random_table(int R, int p, int d, int k, Rng& rng, double spread = 2.0) {
    EmbeddingTable t;
    t.ref_high = Tensor({R, p});
    t.ref_low = Tensor({R, d});
    for (long i = 0; i < t.ref_high.size(); ++i) t.ref_high[i] = rng.uniform(-spread, spread);
    for (long i = 0; i < t.ref_low.size(); ++i) t.ref_low[i] = rng.uniform(-1.0, 1.0);
    t.ref_weight.assign(R, 1.0);
    t.k_predict = k;
    return t;
}

}  // namespace

TEST_CASE("interpolation on a worked two-reference example") {
    EmbeddingTable t;
    t.ref_high = Tensor({2, 2}, {0.0, 0.0, 1.0, 0.0});
    t.ref_low = Tensor({2, 1}, {0.0, 1.0});
    t.ref_weight = {1.0, 1.0};
    t.k_predict = 2;
    // Query at the first reference: weights 1 and e^-1, normalized.
    BottleneckOutput out = predict_embed(t, Tensor({2}, {0.0, 0.0}));
    double w1 = std::exp(-1.0) / (1.0 + std::exp(-1.0));
    CHECK(out.low[0] == doctest::Approx(w1));
    CHECK(out.weights[0] + out.weights[1] == doctest::Approx(1.0));
}

TEST_CASE("output stays inside the neighbor convex hull") {
    Rng rng(11);
    EmbeddingTable t = random_table(40, 6, 3, 5, rng);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor q({6});
        for (double& v : q.data) v = rng.uniform(-2.0, 2.0);
        BottleneckOutput out = predict_embed(t, q);
        for (int c = 0; c < 3; ++c) {
            double lo = 1e300, hi = -1e300;
            for (int id : out.neighbor_ids) {
                double v = t.ref_low[static_cast<long>(id) * 3 + c];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            CHECK(out.low[c] >= lo - 1e-12);
            CHECK(out.low[c] <= hi + 1e-12);
        }
    }
}

TEST_CASE("k_predict = 1 returns the nearest stored embedding exactly") {
    Rng rng(12);
    EmbeddingTable t = random_table(20, 4, 2, 1, rng);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor q({4});
        for (double& v : q.data) v = rng.uniform(-2.0, 2.0);
        BottleneckOutput out = predict_embed(t, q);
        int id = out.neighbor_ids[0];
        CHECK(out.low[0] == doctest::Approx(t.ref_low[static_cast<long>(id) * 2]));
        CHECK(out.low[1] == doctest::Approx(t.ref_low[static_cast<long>(id) * 2 + 1]));
    }
}

TEST_CASE("reference weights bias the interpolation") {
    EmbeddingTable t;
    t.ref_high = Tensor({2, 2}, {0.0, 0.0, 1.0, 0.0});
    t.ref_low = Tensor({2, 1}, {0.0, 1.0});
    t.ref_weight = {1.0, 5.0};
    t.k_predict = 2;
    BottleneckOutput out = predict_embed(t, Tensor({2}, {0.5, 0.0}));
    // Equal distances, so the heavier reference dominates 5:1.
    CHECK(out.low[0] == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("batch op forward matches the scalar path and gradients match FD") {
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(100 + seed);
        EmbeddingTable table = random_table(15, 5, 2, 4, rng);
        Tensor x({3, 5});
        for (double& v : x.data) v = rng.uniform(-1.5, 1.5);

        Tensor ref_grad(table.ref_low.shape);
        Tape t;
        NodeId in = leaf(t, x);
        NodeId out = predict_embed_op(t, in, table, &ref_grad);
        for (int i = 0; i < 3; ++i) {
            BottleneckOutput o = predict_embed(table, &x.data[static_cast<long>(i) * 5]);
            for (int q = 0; q < 2; ++q)
                CHECK(t.value(out)[static_cast<long>(i) * 2 + q] == doctest::Approx(o.low[q]));
        }
        // Weighted-sum loss; fixed neighbor sets make FD valid for small h.
        Tensor coeff({3, 2});
        for (double& v : coeff.data) v = rng.uniform(-1.0, 1.0);
        NodeId loss = sum(t, mul(t, out, leaf(t, coeff)));
        t.backward(loss);

        auto value_at = [&](const Tensor& xt, const EmbeddingTable& tb) {
            Tape t2;
            NodeId o2 = predict_embed_op(t2, leaf(t2, xt), tb);
            NodeId l2 = sum(t2, mul(t2, o2, leaf(t2, coeff)));
            return t2.value(l2)[0];
        };
        const double h = 1e-6;
        const Tensor& gx = t.grad(in);
        double worst = 0.0;
        for (long c = 0; c < x.size(); ++c) {
            Tensor xp = x, xm = x;
            xp.data[c] += h;
            xm.data[c] -= h;
            double fd = (value_at(xp, table) - value_at(xm, table)) / (2 * h);
            worst = std::max(worst, std::abs(fd - gx[c]) /
                                        std::max({std::abs(fd), std::abs(gx[c]), 1e-2}));
        }
        for (long c = 0; c < table.ref_low.size(); ++c) {
            EmbeddingTable tp = table, tm = table;
            tp.ref_low.data[c] += h;
            tm.ref_low.data[c] -= h;
            double fd = (value_at(x, tp) - value_at(x, tm)) / (2 * h);
            worst = std::max(worst, std::abs(fd - ref_grad[c]) /
                                        std::max({std::abs(fd), std::abs(ref_grad[c]), 1e-2}));
        }
        CHECK(worst < 2e-4);
    }
}

TEST_CASE("gather_train_embed returns stored rows") {
    Rng rng(5);
    EmbeddingTable t = random_table(10, 4, 3, 2, rng);
    Tape tape;
    Tensor accum(t.ref_low.shape);
    NodeId rows = gather_train_embed(tape, t, {2, 7, 2}, &accum);
    const Tensor& v = tape.value(rows);
    for (int q = 0; q < 3; ++q) {
        CHECK(v[q] == t.ref_low[2 * 3 + q]);
        CHECK(v[3 + q] == t.ref_low[7 * 3 + q]);
        CHECK(v[6 + q] == t.ref_low[2 * 3 + q]);
    }
    NodeId loss = sum(tape, rows);
    tape.backward(loss);
    CHECK(accum[2 * 3] == doctest::Approx(2.0));  // row 2 gathered twice
    CHECK(accum[7 * 3] == doctest::Approx(1.0));
    CHECK(accum[0] == doctest::Approx(0.0));
}

TEST_CASE("kmeans recovers well-separated clusters") {
    Rng rng(42);
    int per = 30;
    Tensor pts({3 * per, 2});
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per; ++i) {
            pts[static_cast<long>(c * per + i) * 2] = 10.0 * c + rng.uniform(-0.5, 0.5);
            pts[static_cast<long>(c * per + i) * 2 + 1] = rng.uniform(-0.5, 0.5);
        }
    auto assign = kmeans(pts, 3, rng);
    for (int c = 0; c < 3; ++c)
        for (int i = 1; i < per; ++i) CHECK(assign[c * per + i] == assign[c * per]);
    CHECK((assign[0] != assign[per] && assign[per] != assign[2 * per] &&
           assign[0] != assign[2 * per]));
}

TEST_CASE("compression keeps weights as cluster sizes") {
    Rng rng(9);
    EmbeddingTable t = random_table(60, 5, 2, 3, rng);
    std::vector<int> labels(60);
    for (int i = 0; i < 60; ++i) labels[i] = i % 3;
    EmbeddingTable c = compress_representatives(t, labels, 4, rng);
    CHECK(c.size() <= 12);
    double total = 0.0;
    for (double w : c.ref_weight) {
        CHECK(w >= 1.0);
        total += w;
    }
    CHECK(total == doctest::Approx(60.0));
    // Double compression is rejected: weights are no longer all 1.
    CHECK_THROWS_AS(compress_representatives(c, std::vector<int>(c.size(), 0), 2, rng), Error);
}

TEST_CASE("compression with one cluster per point is lossless") {
    Rng rng(14);
    EmbeddingTable t = random_table(12, 4, 2, 3, rng);
    std::vector<int> labels(12, 0);
    EmbeddingTable c = compress_representatives(t, labels, 12, rng);
    REQUIRE(c.size() == 12);
    Tensor q({4});
    for (int trial = 0; trial < 10; ++trial) {
        for (double& v : q.data) v = rng.uniform(-2.0, 2.0);
        BottleneckOutput a = predict_embed(t, q);
        BottleneckOutput b = predict_embed(c, q);
        for (int j = 0; j < 2; ++j) CHECK(a.low[j] == doctest::Approx(b.low[j]).epsilon(1e-9));
    }
}

TEST_CASE("table validation") {
    Rng rng(1);
    EmbeddingTable t = random_table(5, 3, 2, 2, rng);
    t.ref_weight[2] = 0.0;
    CHECK_THROWS_AS(t.validate(), Error);
    t.ref_weight[2] = 1.0;
    t.k_predict = 6;
    CHECK_THROWS_AS(t.validate(), Error);
    t.k_predict = 2;
    CHECK_THROWS_AS(predict_embed(t, Tensor({4})), Error);
}
