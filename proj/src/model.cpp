#include "npnet/model.hpp"

#include <algorithm>
#include <sstream>

namespace npnet {

std::vector<LayerDesc> Model::fc_bottleneck_layers(int dim) {
    return {LayerDesc::dense(dim), LayerDesc::relu()};
}

Model Model::init(const NetworkSpec& spec, Rng& rng) {
    spec.validate();
    Model m;
    m.spec = spec;
    m.encoder_params = init_params(spec.encoder, spec.input_shape, rng);
    if (spec.bottleneck == BottleneckKind::FullyConnected)
        m.bottleneck_params = init_params(fc_bottleneck_layers(spec.bottleneck_dim),
                                          {spec.encoder_out_dim()}, rng);
    m.classifier_params = init_params(spec.classifier, {spec.bottleneck_dim}, rng);
    return m;
}

NodeId Model::forward_probs(Tape& t, NodeId input, ForwardNodes* nodes,
                            Tensor* ref_low_grad) const {
    ForwardNodes local;
    ForwardNodes& fn = nodes ? *nodes : local;
    fn.input = input;
    fn.u_high = forward_segment(t, spec.encoder, encoder_params, input, &fn.encoder);
    if (is_np()) {
        fn.u_low = predict_embed_op(t, fn.u_high, table, ref_low_grad);
    } else {
        fn.u_low = forward_segment(t, fc_bottleneck_layers(spec.bottleneck_dim),
                                   bottleneck_params, fn.u_high, &fn.bottleneck);
    }
    fn.probs = forward_segment(t, spec.classifier, classifier_params, fn.u_low, &fn.classifier);
    return fn.probs;
}

Tensor Model::encode(const Tensor& batch) const {
    Tape t;
    return t.value(forward_segment(t, spec.encoder, encoder_params, leaf(t, batch)));
}

Tensor Model::predict_probs(const Tensor& batch) const {
    Tape t;
    return t.value(forward_probs(t, leaf(t, batch)));
}

std::vector<int> Model::predict_labels(const Tensor& batch) const {
    Tensor probs = predict_probs(batch);
    int b = probs.dim(0), c = probs.dim(1);
    std::vector<int> out(b);
    for (int i = 0; i < b; ++i) {
        const double* r = &probs.data[static_cast<long>(i) * c];
        out[i] = static_cast<int>(std::max_element(r, r + c) - r);
    }
    return out;
}

double Model::accuracy(const Tensor& batch, const std::vector<int>& labels) const {
    auto pred = predict_labels(batch);
    int hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == labels[i]) ++hit;
    return static_cast<double>(hit) / pred.size();
}

static void segment_to_ck(Checkpoint& ck, const std::string& tag,
                          const std::vector<LayerDesc>& segment,
                          const std::vector<LayerParams>& params) {
    for (std::size_t i = 0; i < segment.size(); ++i) {
        ck.meta[tag + ".layer" + std::to_string(i)] = layer_str(segment[i]);
        if (params[i].has_params()) {
            ck.add(tag + ".W" + std::to_string(i), params[i].W);
            ck.add(tag + ".b" + std::to_string(i), params[i].b);
        }
    }
    ck.meta[tag + ".layers"] = std::to_string(segment.size());
}

static void segment_from_ck(const Checkpoint& ck, const std::string& tag,
                            std::vector<LayerDesc>& segment, std::vector<LayerParams>& params) {
    int n = std::stoi(ck.meta_at(tag + ".layers"));
    segment.clear();
    params.assign(n, {});
    for (int i = 0; i < n; ++i) {
        segment.push_back(layer_parse(ck.meta_at(tag + ".layer" + std::to_string(i))));
        std::string wk = tag + ".W" + std::to_string(i);
        if (ck.has(wk)) params[i] = {ck.get(wk), ck.get(tag + ".b" + std::to_string(i))};
    }
}

void Model::save(const std::string& prefix) const {
    Checkpoint ck;
    ck.meta["bottleneck"] = is_np() ? "np" : "fc";
    ck.meta["bottleneck_dim"] = std::to_string(spec.bottleneck_dim);
    ck.meta["classes"] = std::to_string(spec.classes);
    {
        std::string s;
        for (int d : spec.input_shape) s += std::to_string(d) + " ";
        ck.meta["input_shape"] = s;
    }
    segment_to_ck(ck, "encoder", spec.encoder, encoder_params);
    segment_to_ck(ck, "classifier", spec.classifier, classifier_params);
    if (is_np()) {
        table.to_checkpoint(ck);
        ck.meta["representative"] = table.ref_weight.size() &&
                                            *std::max_element(table.ref_weight.begin(),
                                                              table.ref_weight.end()) > 1.0
                                        ? "1"
                                        : "0";
    } else {
        segment_to_ck(ck, "fcbneck", fc_bottleneck_layers(spec.bottleneck_dim),
                      bottleneck_params);
    }
    ck.save(prefix);
}

Model Model::load(const std::string& prefix) {
    Checkpoint ck = Checkpoint::load(prefix);
    Model m;
    m.spec.bottleneck = ck.meta_at("bottleneck") == "np" ? BottleneckKind::NeighborPreserving
                                                         : BottleneckKind::FullyConnected;
    m.spec.bottleneck_dim = std::stoi(ck.meta_at("bottleneck_dim"));
    m.spec.classes = std::stoi(ck.meta_at("classes"));
    {
        std::istringstream in(ck.meta_at("input_shape"));
        int d;
        m.spec.input_shape.clear();
        while (in >> d) m.spec.input_shape.push_back(d);
    }
    segment_from_ck(ck, "encoder", m.spec.encoder, m.encoder_params);
    segment_from_ck(ck, "classifier", m.spec.classifier, m.classifier_params);
    if (m.is_np()) {
        m.table = EmbeddingTable::from_checkpoint(ck);
    } else {
        std::vector<LayerDesc> bl;
        segment_from_ck(ck, "fcbneck", bl, m.bottleneck_params);
    }
    m.spec.validate();
    return m;
}

}  // namespace npnet
