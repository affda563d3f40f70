#include "npnet/network.hpp"

#include <cmath>
#include <sstream>

namespace npnet {

std::string layer_str(const LayerDesc& l) {
    using K = LayerDesc::Kind;
    switch (l.kind) {
        case K::Conv2d: return "conv2d " + std::to_string(l.out) + " " + std::to_string(l.kernel);
        case K::MaxPool2d: return "maxpool2d " + std::to_string(l.window);
        case K::Relu: return "relu";
        case K::Flatten: return "flatten";
        case K::Dense: return "dense " + std::to_string(l.out);
        case K::Softmax: return "softmax";
    }
    throw Error("layer_str: unknown layer kind");
}

LayerDesc layer_parse(const std::string& s) {
    std::istringstream in(s);
    std::string kind;
    in >> kind;
    if (kind == "conv2d") {
        int out, k;
        in >> out >> k;
        return LayerDesc::conv2d(out, k);
    }
    if (kind == "maxpool2d") {
        int w;
        in >> w;
        return LayerDesc::maxpool2d(w);
    }
    if (kind == "relu") return LayerDesc::relu();
    if (kind == "flatten") return LayerDesc::flatten();
    if (kind == "dense") {
        int out;
        in >> out;
        return LayerDesc::dense(out);
    }
    if (kind == "softmax") return LayerDesc::softmax();
    throw Error("layer_parse: unknown layer '" + s + "'");
}

NetworkSpec NetworkSpec::mnist(BottleneckKind kind, int dim, int classifier_hidden) {
    NetworkSpec s;
    s.input_shape = {1, 28, 28};
    s.encoder = {LayerDesc::conv2d(5, 5), LayerDesc::relu(), LayerDesc::maxpool2d(2),
                 LayerDesc::conv2d(20, 5), LayerDesc::relu(), LayerDesc::maxpool2d(2),
                 LayerDesc::flatten()};
    s.classifier = {LayerDesc::dense(classifier_hidden), LayerDesc::relu(), LayerDesc::dense(10),
                    LayerDesc::softmax()};
    s.bottleneck = kind;
    s.bottleneck_dim = dim;
    s.classes = 10;
    s.validate();
    return s;
}

NetworkSpec NetworkSpec::mlp(int in_dim, int encoder_hidden, BottleneckKind kind, int dim,
                             int classes, int classifier_hidden) {
    NetworkSpec s;
    s.input_shape = {1, 1, in_dim};
    s.encoder = {LayerDesc::flatten(), LayerDesc::dense(encoder_hidden), LayerDesc::relu()};
    s.classifier = {LayerDesc::dense(classifier_hidden), LayerDesc::relu(),
                    LayerDesc::dense(classes), LayerDesc::softmax()};
    s.bottleneck = kind;
    s.bottleneck_dim = dim;
    s.classes = classes;
    s.validate();
    return s;
}

std::vector<std::vector<int>> infer_shapes(const std::vector<LayerDesc>& segment,
                                           const std::vector<int>& input_shape) {
    using K = LayerDesc::Kind;
    std::vector<std::vector<int>> out;
    std::vector<int> cur = input_shape;
    for (const auto& l : segment) {
        switch (l.kind) {
            case K::Conv2d: {
                if (cur.size() != 3) throw Error("conv2d after non-image shape " + shape_str(cur));
                int h = cur[1] - l.kernel + 1, w = cur[2] - l.kernel + 1;
                if (h <= 0 || w <= 0) throw Error("conv2d: kernel larger than input");
                cur = {l.out, h, w};
                break;
            }
            case K::MaxPool2d: {
                if (cur.size() != 3) throw Error("maxpool2d after non-image shape");
                if (cur[1] % l.window || cur[2] % l.window)
                    throw Error("maxpool2d: shape not divisible by window");
                cur = {cur[0], cur[1] / l.window, cur[2] / l.window};
                break;
            }
            case K::Relu:
            case K::Softmax: break;
            case K::Flatten: {
                int n = 1;
                for (int d : cur) n *= d;
                cur = {n};
                break;
            }
            case K::Dense: {
                if (cur.size() != 1) throw Error("dense after non-flat shape " + shape_str(cur));
                cur = {l.out};
                break;
            }
        }
        out.push_back(cur);
    }
    return out;
}

int NetworkSpec::encoder_out_dim() const {
    auto shapes = infer_shapes(encoder, input_shape);
    std::vector<int> last = shapes.empty() ? input_shape : shapes.back();
    if (last.size() != 1) throw Error("encoder must end in a flat shape");
    return last[0];
}

void NetworkSpec::validate() const {
    int p = encoder_out_dim();
    // The embedding table requires a strict reduction; a dense bottleneck
    // only needs a positive width.
    if (bottleneck_dim < 1) throw Error("bottleneck_dim must be positive");
    if (bottleneck == BottleneckKind::NeighborPreserving && bottleneck_dim >= p)
        throw Error("bottleneck_dim " + std::to_string(bottleneck_dim) +
                    " must be smaller than encoder output " + std::to_string(p));
    auto cshapes = infer_shapes(classifier, {bottleneck_dim});
    if (cshapes.empty() || cshapes.back() != std::vector<int>{classes})
        throw Error("classifier must end in a " + std::to_string(classes) + "-way output");
    if (classifier.empty() || classifier.back().kind != LayerDesc::Kind::Softmax)
        throw Error("classifier must end in softmax");
}

std::vector<LayerParams> init_params(const std::vector<LayerDesc>& segment,
                                     const std::vector<int>& input_shape, Rng& rng) {
    using K = LayerDesc::Kind;
    auto shapes = infer_shapes(segment, input_shape);
    std::vector<LayerParams> params(segment.size());
    std::vector<int> cur = input_shape;
    for (std::size_t i = 0; i < segment.size(); ++i) {
        const auto& l = segment[i];
        if (l.kind == K::Conv2d) {
            int c = cur[0], k = l.kernel;
            int fan_in = c * k * k, fan_out = l.out * k * k;
            double bound = std::sqrt(6.0 / (fan_in + fan_out));
            Tensor W({l.out, c, k, k});
            for (double& v : W.data) v = rng.uniform(-bound, bound);
            params[i] = {std::move(W), Tensor({l.out})};
        } else if (l.kind == K::Dense) {
            int in = cur[0];
            double bound = std::sqrt(6.0 / (in + l.out));
            Tensor W({in, l.out});
            for (double& v : W.data) v = rng.uniform(-bound, bound);
            params[i] = {std::move(W), Tensor({l.out})};
        }
        cur = shapes[i];
    }
    return params;
}

NodeId forward_segment(Tape& t, const std::vector<LayerDesc>& segment,
                       const std::vector<LayerParams>& params, NodeId input,
                       std::vector<std::pair<NodeId, NodeId>>* param_nodes) {
    using K = LayerDesc::Kind;
    if (params.size() != segment.size()) throw Error("forward_segment: params/segment mismatch");
    if (!t.value(input).all_finite()) throw Error("forward_segment: non-finite input");
    NodeId cur = input;
    for (std::size_t i = 0; i < segment.size(); ++i) {
        const auto& l = segment[i];
        NodeId wn{-1}, bn{-1};
        switch (l.kind) {
            case K::Conv2d:
                wn = leaf(t, params[i].W);
                bn = leaf(t, params[i].b);
                cur = conv2d(t, cur, wn, bn);
                break;
            case K::Dense:
                wn = leaf(t, params[i].W);
                bn = leaf(t, params[i].b);
                cur = dense(t, cur, wn, bn);
                break;
            case K::MaxPool2d: cur = maxpool2d(t, cur, l.window); break;
            case K::Relu: cur = relu(t, cur); break;
            case K::Flatten: cur = flatten(t, cur); break;
            case K::Softmax: cur = softmax_rows(t, cur); break;
        }
        if (param_nodes) param_nodes->push_back({wn, bn});
    }
    return cur;
}

}  // namespace npnet
