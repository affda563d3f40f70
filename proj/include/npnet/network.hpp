#pragma once

#include <optional>
#include <string>
#include <vector>

#include "npnet/autodiff.hpp"
#include "npnet/rng.hpp"
#include "npnet/tensor.hpp"

namespace npnet {

struct LayerDesc {
    enum class Kind { Conv2d, MaxPool2d, Relu, Flatten, Dense, Softmax };
    Kind kind;
    int out = 0;     // conv2d out_channels / dense out_dim
    int kernel = 0;  // conv2d
    int window = 0;  // maxpool2d

    static LayerDesc conv2d(int out_channels, int kernel) {
        return {Kind::Conv2d, out_channels, kernel, 0};
    }
    static LayerDesc maxpool2d(int window) { return {Kind::MaxPool2d, 0, 0, window}; }
    static LayerDesc relu() { return {Kind::Relu, 0, 0, 0}; }
    static LayerDesc flatten() { return {Kind::Flatten, 0, 0, 0}; }
    static LayerDesc dense(int out_dim) { return {Kind::Dense, out_dim, 0, 0}; }
    static LayerDesc softmax() { return {Kind::Softmax, 0, 0, 0}; }
};

std::string layer_str(const LayerDesc& l);
LayerDesc layer_parse(const std::string& s);

enum class BottleneckKind { FullyConnected, NeighborPreserving };

struct NetworkSpec {
    std::vector<int> input_shape;  // per-sample shape, e.g. {1,28,28} or {p}
    std::vector<LayerDesc> encoder;
    std::vector<LayerDesc> classifier;  // ends in a class-count dense + softmax
    BottleneckKind bottleneck = BottleneckKind::FullyConnected;
    int bottleneck_dim = 8;
    int classes = 10;

    // The 5x5-kernel 5/20-channel two-conv encoder with a two-layer ReLU
    // classifier head.
    static NetworkSpec mnist(BottleneckKind kind, int dim, int classifier_hidden = 64);
    // Dense encoder for flat synthetic point clouds.
    static NetworkSpec mlp(int in_dim, int encoder_hidden, BottleneckKind kind, int dim,
                           int classes, int classifier_hidden = 32);

    // Output dimension of the encoder (the high-dimensional embedding width).
    int encoder_out_dim() const;
    void validate() const;
};

// Per-layer trainable arrays; empty for parameterless layers.
struct LayerParams {
    Tensor W;
    Tensor b;
    bool has_params() const { return !W.data.empty(); }
};

// Shape of each layer's output given the segment input shape (batch excluded).
std::vector<std::vector<int>> infer_shapes(const std::vector<LayerDesc>& segment,
                                           const std::vector<int>& input_shape);

// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
std::vector<LayerParams> init_params(const std::vector<LayerDesc>& segment,
                                     const std::vector<int>& input_shape, Rng& rng);

// Runs a segment on the tape; if param_nodes is non-null it receives the leaf
// ids of each layer's (W, b) so the caller can read gradients after backward.
NodeId forward_segment(Tape& t, const std::vector<LayerDesc>& segment,
                       const std::vector<LayerParams>& params, NodeId input,
                       std::vector<std::pair<NodeId, NodeId>>* param_nodes = nullptr);

}  // namespace npnet
