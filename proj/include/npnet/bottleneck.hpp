#pragma once

#include <vector>

#include "npnet/autodiff.hpp"
#include "npnet/checkpoint.hpp"
#include "npnet/rng.hpp"
#include "npnet/tensor.hpp"

namespace npnet {

// The neighborhood-preserving layer's parameters: high-dimensional reference
// keys, learned low-dimensional values, and per-reference weights (1 in
// full-data mode, cluster sizes after compression).
struct EmbeddingTable {
    Tensor ref_high;            // [R x p]
    Tensor ref_low;             // [R x d], trainable
    std::vector<double> ref_weight;  // [R], > 0
    int k_predict = 15;

    int size() const { return ref_high.data.empty() ? 0 : ref_high.dim(0); }
    int high_dim() const { return ref_high.dim(1); }
    int low_dim() const { return ref_low.dim(1); }
    void validate() const;

    void to_checkpoint(Checkpoint& ck) const;
    static EmbeddingTable from_checkpoint(const Checkpoint& ck);
};

struct BottleneckOutput {
    std::vector<double> low;
    std::vector<int> neighbor_ids;
    std::vector<double> weights;  // normalized, sum to 1
};

// kNN-weighted interpolation of the stored low embeddings: unnormalized
// weight v_i * exp(-d_i) over the k_predict nearest reference keys.
BottleneckOutput predict_embed(const EmbeddingTable& table, const double* u_high);
BottleneckOutput predict_embed(const EmbeddingTable& table, const Tensor& u_high);

// Batch interpolation as a tape op; gradients flow into u_high through the
// distance-dependent weights (neighbor sets held fixed). If ref_low_grad is
// given, gradients w.r.t. the selected low embeddings accumulate there too.
NodeId predict_embed_op(Tape& t, NodeId u_high, const EmbeddingTable& table,
                        Tensor* ref_low_grad = nullptr);

// Row lookup for training; gradient rows accumulate into *grad_accum.
NodeId gather_train_embed(Tape& t, const EmbeddingTable& table, const std::vector<int>& ids,
                          Tensor* grad_accum);

// Seeded Lloyd k-means; returns cluster assignment per row.
std::vector<int> kmeans(const Tensor& points, int clusters, Rng& rng, int max_iters = 100,
                        double tol = 1e-6);

// Per-class k-means over ref_high; the new table holds per-cluster means of
// ref_high and ref_low with cluster sizes as weights.
EmbeddingTable compress_representatives(const EmbeddingTable& table,
                                        const std::vector<int>& labels, int clusters_per_class,
                                        Rng& rng);

}  // namespace npnet
