#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "npnet/attack.hpp"

using namespace npnet;

namespace {

// Flat two-feature model with hand-set weights: logits = (0, x0), so the
// label-0 loss is log(1 + exp(x0)) with gradient in x0 only.
Model handmade_model() {
    NetworkSpec spec;
    spec.input_shape = {1, 1, 2};
    spec.encoder = {LayerDesc::flatten()};
    spec.classifier = {LayerDesc::dense(2), LayerDesc::softmax()};
    spec.bottleneck = BottleneckKind::FullyConnected;
    spec.bottleneck_dim = 2;
    spec.classes = 2;
    Rng rng(0);
    Model m = Model::init(spec, rng);
    // Identity bottleneck (x stays nonnegative, so relu is transparent).
    m.bottleneck_params[0].W = Tensor({2, 2}, {1, 0, 0, 1});
    m.bottleneck_params[0].b = Tensor({2});
    m.classifier_params[0].W = Tensor({2, 2}, {0, 1, 0, 0});
    m.classifier_params[0].b = Tensor({2});
    return m;
}

Model random_model(std::uint64_t seed) {
    Rng rng(seed);
    return Model::init(NetworkSpec::mlp(4, 8, BottleneckKind::FullyConnected, 2, 3), rng);
}

}  // namespace

TEST_CASE("epsilon zero returns the input unchanged") {
    Model m = handmade_model();
    Tensor x({1, 1, 1, 2}, {0.3, 0.6});
    AttackConfig cfg = AttackConfig::standard(0.0, 5);
    cfg.step = 0.1;
    AttackResult res = pgd_attack_full(m, x, 0, cfg);
    CHECK(res.x_adv.data == x.data);
    CHECK(res.best_loss >= res.clean_loss);
}

TEST_CASE("hand-simulated ascent on the known-gradient model") {
    Model m = handmade_model();
    Tensor x({1, 1, 1, 2}, {0.2, 0.7});
    AttackConfig cfg;
    cfg.epsilon = 0.5;
    cfg.step = 0.3;
    cfg.iters = 3;
    Tensor adv = pgd_attack(m, x, 0, cfg);
    // x0 walks 0.2 -> 0.5 -> 0.8 (clipped to 0.7 by the eps ball) -> 0.7.
    CHECK(adv[0] == doctest::Approx(0.7));
    // Zero gradient on x1: sign(0) = 0 leaves it untouched.
    CHECK(adv[1] == doctest::Approx(0.7));
}

TEST_CASE("ball clipping beats the box when the ball is smaller") {
    Model m = handmade_model();
    Tensor x({1, 1, 1, 2}, {0.9, 0.1});
    AttackConfig cfg;
    cfg.epsilon = 0.3;
    cfg.step = 0.5;
    cfg.iters = 4;
    Tensor adv = pgd_attack(m, x, 0, cfg);
    // 0.9 + 0.5 clips to the box first (1.0), which is inside x0 + 0.3.
    CHECK(adv[0] == doctest::Approx(1.0));
}

TEST_CASE("constraints hold across random models and inputs") {
    for (int seed = 0; seed < 15; ++seed) {
        Model m = random_model(seed);
        Rng rng(1000 + seed);
        Tensor x({1, 1, 1, 4});
        for (double& v : x.data) v = rng.uniform(0.0, 1.0);
        for (double eps : {0.05, 0.1, 0.3}) {
            AttackConfig cfg = AttackConfig::standard(eps, 10);
            cfg.random_start = seed % 2 == 1;
            AttackResult res = pgd_attack_full(m, x, seed % 3, cfg, &rng);
            for (long i = 0; i < x.size(); ++i) {
                CHECK(std::abs(res.x_adv[i] - x[i]) <= eps + 1e-9);
                CHECK(res.x_adv[i] >= -1e-9);
                CHECK(res.x_adv[i] <= 1.0 + 1e-9);
            }
            CHECK(res.best_loss >= res.clean_loss);
        }
    }
}

TEST_CASE("attack is deterministic without random start") {
    Model m = random_model(5);
    Rng rng(2);
    Tensor x({1, 1, 1, 4});
    for (double& v : x.data) v = rng.uniform(0.0, 1.0);
    AttackConfig cfg = AttackConfig::standard(0.1, 10);
    Tensor a = pgd_attack(m, x, 1, cfg);
    Tensor b = pgd_attack(m, x, 1, cfg);
    CHECK(a.data == b.data);
}

TEST_CASE("evaluate_under_attack at eps 0 equals clean accuracy") {
    Model m = random_model(7);
    Dataset ds = synth_gaussian_blobs(3, 4, 30, 0.05, 3);
    AttackConfig cfg = AttackConfig::standard(0.0, 0);
    double a = evaluate_under_attack(m, ds, cfg);
    CHECK(a == doctest::Approx(m.accuracy(ds.images, ds.labels)));
}

TEST_CASE("attack input validation") {
    Model m = handmade_model();
    Tensor x({1, 1, 1, 2}, {0.5, 1.4});  // outside the box
    AttackConfig cfg = AttackConfig::standard(0.1, 5);
    CHECK_THROWS_AS(pgd_attack(m, x, 0, cfg), Error);

    Tensor ok({1, 1, 1, 2}, {0.5, 0.5});
    cfg.random_start = true;
    CHECK_THROWS_AS(pgd_attack(m, ok, 0, cfg, nullptr), Error);

    AttackConfig bad;
    bad.epsilon = -0.1;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = AttackConfig{};
    bad.step = 0.0;
    bad.iters = 3;
    CHECK_THROWS_AS(bad.validate(), Error);
}
