#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <string>

#include "doctest.h"
#include "npnet.h"

TEST_CASE("dataset lifecycle through the flat interface") {
    npnet_dataset* ds = nullptr;
    REQUIRE(npnet_dataset_synth_blobs(3, 6, 90, 0.05, 1, &ds) == NPNET_OK);
    CHECK(npnet_dataset_size(ds) == 90);
    CHECK(npnet_dataset_classes(ds) == 3);

    char fp[32];
    REQUIRE(npnet_dataset_fingerprint(ds, fp, sizeof fp) == NPNET_OK);
    CHECK(std::strlen(fp) == 16);
    char tiny[4];
    CHECK(npnet_dataset_fingerprint(ds, tiny, sizeof tiny) == NPNET_ERR_INVALID);

    npnet_dataset* sub = nullptr;
    REQUIRE(npnet_dataset_subset(ds, 30, 2, &sub) == NPNET_OK);
    CHECK(npnet_dataset_size(sub) == 30);

    REQUIRE(npnet_dataset_save_idx(sub, "/tmp/npnet_capi_img.idx", "/tmp/npnet_capi_lab.idx") ==
            NPNET_OK);
    npnet_dataset* back = nullptr;
    REQUIRE(npnet_dataset_load_idx("/tmp/npnet_capi_img.idx", "/tmp/npnet_capi_lab.idx",
                                   &back) == NPNET_OK);
    CHECK(npnet_dataset_size(back) == 30);

    npnet_dataset_free(ds);
    npnet_dataset_free(sub);
    npnet_dataset_free(back);
}

TEST_CASE("error paths set a readable message") {
    npnet_dataset* ds = nullptr;
    CHECK(npnet_dataset_load_idx("/tmp/definitely_missing.idx", "/tmp/nope.idx", &ds) !=
          NPNET_OK);
    CHECK(std::strlen(npnet_last_error()) > 0);
    CHECK(npnet_dataset_load_idx(nullptr, "x", &ds) == NPNET_ERR_INVALID);
    CHECK(npnet_model_load("/tmp/definitely_missing_model", nullptr) == NPNET_ERR_INVALID);
}

TEST_CASE("train, evaluate, attack, compress, and reload") {
    npnet_dataset* ds = nullptr;
    REQUIRE(npnet_dataset_synth_blobs(3, 8, 90, 0.04, 5, &ds) == NPNET_OK);

    const char* keys[] = {"epochs", "batch", "lr", "graph_k", "init_embed_epochs", "seed"};
    const char* vals[] = {"40", "30", "0.05", "5", "20", "5"};

    for (const char* kind : {"fc", "np"}) {
        npnet_model* m = nullptr;
        REQUIRE(npnet_train(ds, "mlp", kind, 2, keys, vals, 6, "/tmp/npnet_capi_loss.csv",
                            &m) == NPNET_OK);
        CHECK(npnet_model_is_np(m) == (std::string(kind) == "np" ? 1 : 0));

        double clean = 0.0;
        REQUIRE(npnet_model_accuracy(m, ds, &clean) == NPNET_OK);
        CAPTURE(std::string(kind));
        CHECK(clean >= 0.8);

        double adv = 0.0;
        REQUIRE(npnet_model_attack_accuracy(m, ds, 0.05, 0.005, 5, 0, 1, &adv) == NPNET_OK);
        CHECK(adv <= 1.0);
        CHECK(adv >= 0.0);

        double gap = 0.0;
        REQUIRE(npnet_model_distortion_gap(m, ds, 0.05, 0.005, 5, &gap) == NPNET_OK);
        CHECK(gap >= 0.0);

        std::string prefix = std::string("/tmp/npnet_capi_model_") + kind;
        REQUIRE(npnet_model_save(m, prefix.c_str()) == NPNET_OK);
        npnet_model* back = nullptr;
        REQUIRE(npnet_model_load(prefix.c_str(), &back) == NPNET_OK);
        double clean2 = 0.0;
        REQUIRE(npnet_model_accuracy(back, ds, &clean2) == NPNET_OK);
        CHECK(clean2 == doctest::Approx(clean));

        if (std::string(kind) == "np") {
            npnet_model* comp = nullptr;
            REQUIRE(npnet_model_compress(m, ds, 10, 3, &comp) == NPNET_OK);
            double cacc = 0.0;
            REQUIRE(npnet_model_accuracy(comp, ds, &cacc) == NPNET_OK);
            CHECK(cacc >= clean - 0.25);
            npnet_model_free(comp);

            npnet_bound_report rep;
            REQUIRE(npnet_model_np_bound_check(m, 10, 20, 1e-4, 1, &rep) == NPNET_OK);
            CHECK(rep.points == 10);
            CHECK(rep.violations >= 0);
        } else {
            npnet_model* comp = nullptr;
            CHECK(npnet_model_compress(m, ds, 5, 3, &comp) != NPNET_OK);
        }
        npnet_model_free(back);
        npnet_model_free(m);
    }

    const char* bad_keys[] = {"nonsense"};
    const char* bad_vals[] = {"1"};
    npnet_model* m = nullptr;
    CHECK(npnet_train(ds, "mlp", "fc", 2, bad_keys, bad_vals, 1, nullptr, &m) ==
          NPNET_ERR_INVALID);
    npnet_dataset_free(ds);
}

TEST_CASE("analysis entry points") {
    double v = 0.0;
    REQUIRE(npnet_ball_overlap(3, 1.0, 1.0, &v) == NPNET_OK);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    CHECK(npnet_ball_overlap(3, 1.0, 3.0, &v) != NPNET_OK);

    npnet_bound_report rep;
    REQUIRE(npnet_fc_synth_check(300, 20, 4, 7, &rep) == NPNET_OK);
    CHECK(rep.violations == 0);
    CHECK(rep.C5 > 0.0);

    npnet_dataset* ds = nullptr;
    REQUIRE(npnet_dataset_synth_moons(100, 0.05, 3, &ds) == NPNET_OK);
    const char* keys[] = {"epochs", "seed"};
    const char* vals[] = {"10", "3"};
    REQUIRE(npnet_init_embed(ds, 1, keys, vals, 2, "/tmp/npnet_capi_embed.csv") == NPNET_OK);
    npnet_dataset_free(ds);
}
