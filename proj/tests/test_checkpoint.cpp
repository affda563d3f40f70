#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "npnet/checkpoint.hpp"
#include "npnet/model.hpp"
#include "npnet/rng.hpp"

using namespace npnet;

TEST_CASE("checkpoint round trip preserves meta and arrays") {
    Checkpoint ck;
    ck.meta["alpha"] = "0.5";
    ck.meta["note"] = "two words here";
    ck.add("a", Tensor({2, 3}, {1, 2, 3, 4.25, -5, 6e-9}));
    ck.add("b", Tensor({4}, {-0.0, 1e300, 3.14159, 2}));
    ck.save("/tmp/npnet_ck");
    Checkpoint back = Checkpoint::load("/tmp/npnet_ck");
    CHECK(back.meta_at("alpha") == "0.5");
    CHECK(back.meta_at("note") == "two words here");
    CHECK(back.get("a").shape == std::vector<int>{2, 3});
    CHECK(back.get("a").data == ck.get("a").data);
    CHECK(back.get("b").data == ck.get("b").data);
    CHECK(back.has("a"));
    CHECK(!back.has("c"));
    CHECK_THROWS_AS(back.get("c"), Error);
    CHECK_THROWS_AS(back.meta_at("zzz"), Error);
}

TEST_CASE("checkpoint rejects corrupt files") {
    CHECK_THROWS_AS(Checkpoint::load("/tmp/npnet_ck_missing"), Error);

    std::ofstream("/tmp/npnet_ck_bad.manifest") << "something-else 1\n";
    std::ofstream("/tmp/npnet_ck_bad.blob", std::ios::binary).put(0);
    CHECK_THROWS_AS(Checkpoint::load("/tmp/npnet_ck_bad"), Error);

    std::ofstream("/tmp/npnet_ck_trunc.manifest")
        << "npnet-checkpoint 1\narray big 0 1 10\n";
    std::ofstream("/tmp/npnet_ck_trunc.blob", std::ios::binary).put(0);
    CHECK_THROWS_AS(Checkpoint::load("/tmp/npnet_ck_trunc"), Error);
}

TEST_CASE("model save/load reproduces predictions for both bottlenecks") {
    Rng rng(3);
    for (auto kind : {BottleneckKind::FullyConnected, BottleneckKind::NeighborPreserving}) {
        NetworkSpec spec = NetworkSpec::mlp(6, 10, kind, 2, 3);
        Model m = Model::init(spec, rng);
        if (kind == BottleneckKind::NeighborPreserving) {
            m.table.ref_high = Tensor({9, spec.encoder_out_dim()});
            m.table.ref_low = Tensor({9, 2});
            for (double& v : m.table.ref_high.data) v = rng.uniform(-1, 1);
            for (double& v : m.table.ref_low.data) v = rng.uniform(-1, 1);
            m.table.ref_weight.assign(9, 1.0);
            m.table.k_predict = 4;
        }
        m.save("/tmp/npnet_model_ck");
        Model back = Model::load("/tmp/npnet_model_ck");
        CHECK(back.is_np() == m.is_np());
        Tensor x({5, 1, 1, 6});
        for (double& v : x.data) v = rng.uniform(0.0, 1.0);
        Tensor a = m.predict_probs(x), b = back.predict_probs(x);
        REQUIRE(a.shape == b.shape);
        for (long i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
    }
}
