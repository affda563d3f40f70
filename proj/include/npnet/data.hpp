#pragma once

#include <string>
#include <vector>

#include "npnet/rng.hpp"
#include "npnet/tensor.hpp"

namespace npnet {

struct Dataset {
    Tensor images;            // [n, channels, height, width], values in [0,1]
    std::vector<int> labels;  // [n], in [0, classes)
    std::string split;

    int n() const { return images.data.empty() ? 0 : images.dim(0); }
    int classes() const;
    std::vector<int> sample_shape() const {
        return {images.dim(1), images.dim(2), images.dim(3)};
    }
    // One sample as a [1,c,h,w] tensor.
    Tensor sample(int i) const;
    Tensor batch(const std::vector<int>& ids) const;
    void validate() const;
};

// IDX ingestion (big-endian headers, magic 0x803 images / 0x801 labels);
// pixel bytes are divided by 255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
// Inverse of load_idx for fixtures; values are rounded to the nearest byte.
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

// Seeded stratified sample preserving class proportions within +-1 per class.
Dataset subset(const Dataset& ds, int n, std::uint64_t seed);

// Deterministic labeled point clouds stored as [n, 1, 1, p] images.
Dataset synth_two_moons(int n, double noise, std::uint64_t seed);
Dataset synth_gaussian_blobs(int classes, int p, int n, double noise, std::uint64_t seed);

// FNV-1a over image bytes and labels; run-manifest fingerprint.
std::string dataset_fingerprint(const Dataset& ds);

}  // namespace npnet
