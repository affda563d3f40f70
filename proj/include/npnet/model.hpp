#pragma once

#include <string>
#include <vector>

#include "npnet/bottleneck.hpp"
#include "npnet/network.hpp"

namespace npnet {

// Parameter leaf ids recorded during a forward pass, for gradient reads.
struct ForwardNodes {
    NodeId input{-1};
    NodeId u_high{-1};
    NodeId u_low{-1};
    NodeId probs{-1};
    std::vector<std::pair<NodeId, NodeId>> encoder;
    std::vector<std::pair<NodeId, NodeId>> bottleneck;
    std::vector<std::pair<NodeId, NodeId>> classifier;
};

// A full network: encoder + bottleneck (dense or embedding table) +
// classifier. The prediction path is differentiable end to end for both
// bottleneck kinds.
struct Model {
    NetworkSpec spec;
    std::vector<LayerParams> encoder_params;
    std::vector<LayerParams> bottleneck_params;  // FC mode only
    std::vector<LayerParams> classifier_params;
    EmbeddingTable table;  // NP mode only

    static std::vector<LayerDesc> fc_bottleneck_layers(int dim);

    static Model init(const NetworkSpec& spec, Rng& rng);

    bool is_np() const { return spec.bottleneck == BottleneckKind::NeighborPreserving; }

    // Forward through encoder + prediction-path bottleneck + classifier.
    // If nodes is non-null, leaf ids are recorded there. ref_low_grad feeds
    // predict_embed_op during adversarial training.
    NodeId forward_probs(Tape& t, NodeId input, ForwardNodes* nodes = nullptr,
                         Tensor* ref_low_grad = nullptr) const;

    // Encoder output for a batch, no tape kept.
    Tensor encode(const Tensor& batch) const;

    Tensor predict_probs(const Tensor& batch) const;
    std::vector<int> predict_labels(const Tensor& batch) const;
    double accuracy(const Tensor& batch, const std::vector<int>& labels) const;

    void save(const std::string& prefix) const;
    static Model load(const std::string& prefix);
};

}  // namespace npnet
