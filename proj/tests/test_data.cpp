#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "npnet/data.hpp"
#include "npnet/graph.hpp"

using namespace npnet;

namespace {

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

// 2 images of 2x2 pixels plus matching labels, handcrafted byte-for-byte.
const std::vector<unsigned char> kImages = {
    0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,  // magic 0x803, n=2, 2x2
    0, 255, 128, 64, 10, 20, 30, 40};
const std::vector<unsigned char> kLabels = {0, 0, 8, 1, 0, 0, 0, 2, 1, 0};

}  // namespace

TEST_CASE("idx load parses the fixture exactly") {
    write_bytes("/tmp/npnet_img.idx", kImages);
    write_bytes("/tmp/npnet_lab.idx", kLabels);
    Dataset ds = load_idx("/tmp/npnet_img.idx", "/tmp/npnet_lab.idx");
    REQUIRE(ds.n() == 2);
    CHECK(ds.sample_shape() == std::vector<int>{1, 2, 2});
    CHECK(ds.images[0] == doctest::Approx(0.0));
    CHECK(ds.images[1] == doctest::Approx(1.0));
    CHECK(ds.images[2] == doctest::Approx(128.0 / 255.0));
    CHECK(ds.images[4] == doctest::Approx(10.0 / 255.0));
    CHECK(ds.labels == std::vector<int>{1, 0});
    ds.validate();
}

TEST_CASE("idx save/load round trip") {
    write_bytes("/tmp/npnet_img.idx", kImages);
    write_bytes("/tmp/npnet_lab.idx", kLabels);
    Dataset ds = load_idx("/tmp/npnet_img.idx", "/tmp/npnet_lab.idx");
    save_idx(ds, "/tmp/npnet_img2.idx", "/tmp/npnet_lab2.idx");
    Dataset back = load_idx("/tmp/npnet_img2.idx", "/tmp/npnet_lab2.idx");
    CHECK(back.images.data == ds.images.data);
    CHECK(back.labels == ds.labels);
    CHECK(dataset_fingerprint(back) == dataset_fingerprint(ds));
}

TEST_CASE("idx malformed inputs are rejected") {
    auto bad_magic = kImages;
    bad_magic[3] = 4;
    write_bytes("/tmp/npnet_bad.idx", bad_magic);
    write_bytes("/tmp/npnet_lab.idx", kLabels);
    CHECK_THROWS_AS(load_idx("/tmp/npnet_bad.idx", "/tmp/npnet_lab.idx"), Error);

    auto truncated = kImages;
    truncated.resize(truncated.size() - 3);
    write_bytes("/tmp/npnet_trunc.idx", truncated);
    CHECK_THROWS_AS(load_idx("/tmp/npnet_trunc.idx", "/tmp/npnet_lab.idx"), Error);

    auto fewer_labels = kLabels;
    fewer_labels[7] = 1;  // claims one label for two images
    fewer_labels.resize(9);
    write_bytes("/tmp/npnet_lab1.idx", fewer_labels);
    write_bytes("/tmp/npnet_img.idx", kImages);
    CHECK_THROWS_AS(load_idx("/tmp/npnet_img.idx", "/tmp/npnet_lab1.idx"), Error);

    CHECK_THROWS_AS(load_idx("/tmp/npnet_missing.idx", "/tmp/npnet_lab.idx"), Error);
}

TEST_CASE("stratified subset keeps class proportions within one") {
    Dataset ds = synth_gaussian_blobs(4, 3, 200, 0.05, 1);
    Dataset sub = subset(ds, 60, 7);
    REQUIRE(sub.n() == 60);
    std::vector<int> count(4, 0);
    for (int l : sub.labels) ++count[l];
    for (int c = 0; c < 4; ++c) CHECK(std::abs(count[c] - 15) <= 1);
    // Deterministic under the same seed.
    Dataset sub2 = subset(ds, 60, 7);
    CHECK(sub2.images.data == sub.images.data);
    CHECK(sub2.labels == sub.labels);
    CHECK_THROWS_AS(subset(ds, 300, 7), Error);
    CHECK_THROWS_AS(subset(ds, 2, 7), Error);
}

TEST_CASE("two moons is 1-nn separable") {
    Dataset ds = synth_two_moons(400, 0.03, 3);
    ds.validate();
    CHECK(ds.classes() == 2);
    // Leave-one-out nearest neighbor agreement.
    Tensor pts({400, 2});
    pts.data = ds.images.data;
    KnnResult r = knn(pts, 1);
    int hit = 0;
    for (int i = 0; i < 400; ++i)
        if (ds.labels[r.neighbors[i][0]] == ds.labels[i]) ++hit;
    CHECK(hit >= 380);  // >= 0.95 agreement
}

TEST_CASE("gaussian blobs fit the dataset contract") {
    Dataset ds = synth_gaussian_blobs(5, 16, 250, 0.02, 9);
    ds.validate();
    CHECK(ds.n() == 250);
    CHECK(ds.classes() == 5);
    CHECK(ds.sample_shape() == std::vector<int>{1, 1, 16});
    for (double v : ds.images.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // Same seed reproduces; different seed does not.
    CHECK(dataset_fingerprint(synth_gaussian_blobs(5, 16, 250, 0.02, 9)) ==
          dataset_fingerprint(ds));
    CHECK(dataset_fingerprint(synth_gaussian_blobs(5, 16, 250, 0.02, 10)) !=
          dataset_fingerprint(ds));
}

TEST_CASE("fingerprint is sensitive to single-pixel changes") {
    Dataset ds = synth_gaussian_blobs(2, 4, 20, 0.05, 2);
    std::string a = dataset_fingerprint(ds);
    ds.images[5] = ds.images[5] < 0.5 ? ds.images[5] + 0.25 : ds.images[5] - 0.25;
    CHECK(dataset_fingerprint(ds) != a);
}
