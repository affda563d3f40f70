#include "npnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace npnet {

void TrainConfig::validate() const {
    if (alpha < 0.0) throw Error("train: alpha must be >= 0");
    if (lr <= 0.0) throw Error("train: lr must be positive");
    if (init_embed_lr <= 0.0) throw Error("train: init_embed_lr must be positive");
    if (batch < 2) throw Error("train: batch must be >= 2 (pairs need two points)");
    if (neg_samples < 0) throw Error("train: neg_samples must be >= 0");
    if (epochs < 0) throw Error("train: epochs must be >= 0");
    if (graph_k < 1) throw Error("train: graph_k must be >= 1");
    if (graph_refresh_epochs < 1) throw Error("train: graph_refresh_epochs must be >= 1");
    if (adversarial) adversarial->validate();
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    auto num = [](double v) {
        std::ostringstream o;
        o.precision(17);
        o << v;
        return o.str();
    };
    kv["alpha"] = num(alpha);
    kv["lr"] = num(lr);
    kv["epochs"] = std::to_string(epochs);
    kv["batch"] = std::to_string(batch);
    kv["graph_k"] = std::to_string(graph_k);
    kv["graph_refresh_epochs"] = std::to_string(graph_refresh_epochs);
    kv["neg_samples"] = std::to_string(neg_samples);
    kv["seed"] = std::to_string(seed);
    kv["momentum"] = momentum ? "1" : "0";
    kv["init_embed_epochs"] = std::to_string(init_embed_epochs);
    kv["init_embed_lr"] = num(init_embed_lr);
    if (!encoder_from.empty()) kv["encoder_from"] = encoder_from;
    if (adversarial) {
        kv["adv_eps"] = num(adversarial->epsilon);
        kv["adv_step"] = num(adversarial->step);
        kv["adv_iters"] = std::to_string(adversarial->iters);
        kv["adv_random_start"] = adversarial->random_start ? "1" : "0";
    }
    return kv;
}

// SGD with optional momentum 0.9 over externally owned parameter tensors.
class Sgd {
public:
    Sgd(double lr, bool momentum) : lr_(lr), mom_(momentum ? 0.9 : 0.0) {}

    int add(Tensor* param) {
        params_.push_back(param);
        vel_.emplace_back(param->shape);
        return static_cast<int>(params_.size()) - 1;
    }

    void step(int idx, const Tensor& grad) {
        Tensor* p = params_[idx];
        Tensor& v = vel_[idx];
        for (long i = 0; i < p->size(); ++i) {
            // The repulsive graph term can spike (nu/(1-nu) for a close
            // negative pair); clip per coordinate to keep steps sane.
            double g = std::clamp(grad[i], -4.0, 4.0);
            v[i] = mom_ * v[i] + g;
            p->data[i] -= lr_ * v[i];
        }
    }

private:
    double lr_, mom_;
    std::vector<Tensor*> params_;
    std::vector<Tensor> vel_;
};

Tensor encode_all(const Model& model, const Dataset& ds, int chunk) {
    int n = ds.n();
    int p = model.spec.encoder_out_dim();
    Tensor out({n, p});
    for (int start = 0; start < n; start += chunk) {
        std::vector<int> ids(std::min(chunk, n - start));
        std::iota(ids.begin(), ids.end(), start);
        Tensor enc = model.encode(ds.batch(ids));
        std::copy_n(enc.data.begin(), enc.size(), &out.data[static_cast<long>(start) * p]);
    }
    return out;
}

namespace {

struct PairBatch {
    std::vector<std::pair<int, int>> pairs;  // local row positions
    std::vector<double> mu;
};

// Adjacency view of a fuzzy graph for batch-internal pair lookup.
struct Adjacency {
    std::vector<std::vector<std::pair<int, double>>> nbr;
    explicit Adjacency(const FuzzyGraph& g) : nbr(g.n) {
        for (std::size_t p = 0; p < g.pairs.size(); ++p) {
            auto [i, j] = g.pairs[p];
            nbr[i].push_back({j, g.strengths[p]});
            nbr[j].push_back({i, g.strengths[p]});
        }
    }
    bool connected(int i, int j) const {
        for (const auto& [k, s] : nbr[i])
            if (k == j) return true;
        return false;
    }
};

// Positive pairs internal to the batch plus neg_samples random non-neighbor
// pairs per positive with target 0.
PairBatch batch_pairs(const Adjacency& adj, const std::vector<int>& ids, int neg_samples,
                      Rng& rng) {
    PairBatch pb;
    std::unordered_map<int, int> pos;
    for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (const auto& [j, s] : adj.nbr[ids[i]]) {
            if (ids[i] < j) {
                auto it = pos.find(j);
                if (it != pos.end()) {
                    pb.pairs.push_back({static_cast<int>(i), it->second});
                    pb.mu.push_back(s);
                }
            }
        }
    }
    int b = static_cast<int>(ids.size());
    long negs = static_cast<long>(pb.pairs.size()) * neg_samples;
    for (long t = 0; t < negs; ++t) {
        for (int tries = 0; tries < 16; ++tries) {
            int a = static_cast<int>(rng.index(b));
            int c = static_cast<int>(rng.index(b));
            if (a == c) continue;
            if (adj.connected(ids[a], ids[c])) continue;
            pb.pairs.push_back({a, c});
            pb.mu.push_back(0.0);
            break;
        }
    }
    return pb;
}

void check_finite_loss(double v, int epoch) {
    if (!std::isfinite(v))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                    "; aborting (check lr/alpha)");
}

// Copies encoder weights from a saved checkpoint into a freshly initialized
// model, shape-checked layer by layer.
void adopt_encoder(Model& m, const std::string& prefix) {
    Model src = Model::load(prefix);
    if (src.encoder_params.size() != m.encoder_params.size())
        throw Error("train: encoder_from checkpoint has a different encoder depth");
    for (std::size_t i = 0; i < m.encoder_params.size(); ++i) {
        if (src.encoder_params[i].has_params() != m.encoder_params[i].has_params() ||
            (m.encoder_params[i].has_params() &&
             !src.encoder_params[i].W.same_shape(m.encoder_params[i].W)))
            throw Error("train: encoder_from checkpoint has mismatched encoder shapes");
        m.encoder_params[i] = src.encoder_params[i];
    }
}

std::vector<std::vector<int>> make_batches(int n, int batch, Rng& rng) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng.engine());
    std::vector<std::vector<int>> out;
    for (int s = 0; s < n; s += batch) {
        std::vector<int> b(ids.begin() + s, ids.begin() + std::min(n, s + batch));
        if (static_cast<int>(b.size()) >= 2) out.push_back(std::move(b));
    }
    return out;
}

}  // namespace

Tensor init_embeddings_with_graph(const FuzzyGraph& graph, int n, int d,
                                  const TrainConfig& cfg) {
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    Tensor low({n, d});
    for (double& v : low.data) v = rng.normal(0.0, 1e-2);
    if (graph.pairs.empty()) return low;

    // Per-edge stochastic descent on the fuzzy cross entropy with
    // nu = exp(-dist): each edge applies its attractive update immediately
    // (dL/ddist = mu) and the anchor takes neg_samples repulsive updates
    // against random non-neighbors (dL/ddist = -nu/(1-nu)). Per-coordinate
    // updates are clipped and the rate anneals linearly to zero, which
    // converges far faster here than whole-matrix batch steps.
    Adjacency adj(graph);
    std::vector<std::size_t> order(graph.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    auto clip = [](double v) { return v > 4.0 ? 4.0 : (v < -4.0 ? -4.0 : v); };
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.init_embed_lr * (1.0 - static_cast<double>(epoch) / cfg.epochs);
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t t : order) {
            auto [i, j] = graph.pairs[t];
            double mu = graph.strengths[t];
            double* zi = &low.data[static_cast<long>(i) * d];
            double* zj = &low.data[static_cast<long>(j) * d];
            double dist = 0.0;
            for (int c = 0; c < d; ++c) {
                double q = zi[c] - zj[c];
                dist += q * q;
            }
            dist = std::sqrt(dist);
            if (dist > 1e-12) {
                double coef = mu / dist;
                for (int c = 0; c < d; ++c) {
                    double g = clip(coef * (zi[c] - zj[c]));
                    zi[c] -= lr * g;
                    zj[c] += lr * g;
                }
            }
            for (int s = 0; s < cfg.neg_samples; ++s) {
                int b = static_cast<int>(rng.index(n));
                if (b == i || adj.connected(i, b)) continue;
                double* zb = &low.data[static_cast<long>(b) * d];
                double dn = 0.0;
                for (int c = 0; c < d; ++c) {
                    double q = zi[c] - zb[c];
                    dn += q * q;
                }
                dn = std::sqrt(dn);
                if (dn < 1e-12) continue;
                double nu = std::exp(-dn);
                double coef = -nu / std::max(1.0 - nu, 1e-3) / dn;
                for (int c = 0; c < d; ++c) zi[c] -= lr * clip(coef * (zi[c] - zb[c]));
            }
        }
    }
    return low;
}

Tensor init_embeddings(const Tensor& u_high, int d, const TrainConfig& cfg) {
    if (u_high.ndim() != 2) throw Error("init_embeddings: expected [n x p] matrix");
    int n = u_high.dim(0), p = u_high.dim(1);
    if (n < 2) throw Error("init_embeddings: need at least two points");
    if (d >= p) throw Error("init_embeddings: target dim must be < input dim");
    int k = std::min(cfg.graph_k, n - 1);
    return init_embeddings_with_graph(neighborhood_graph(u_high, k), n, d, cfg);
}

namespace {

// Shared batch loop for both architectures.
struct Trainer {
    const Dataset& ds;
    TrainConfig cfg;
    TrainState state;
    Rng rng;
    Sgd opt;
    // Parameter registration: pointers + optimizer slots + grad accumulators.
    std::vector<Tensor*> params;
    std::vector<Tensor> accums;

    Trainer(const Dataset& d, const TrainConfig& c)
        : ds(d), cfg(c), rng(c.seed), opt(c.lr, c.momentum) {
        cfg.validate();
        ds.validate();
    }

    int reg(Tensor* p) {
        opt.add(p);
        params.push_back(p);
        accums.emplace_back(p->shape);
        return static_cast<int>(params.size()) - 1;
    }
    void reg_segment(std::vector<LayerParams>& ps) {
        for (auto& lp : ps)
            if (lp.has_params()) {
                reg(&lp.W);
                reg(&lp.b);
            }
    }
    void zero_accums() {
        for (auto& a : accums) a.fill(0.0);
    }
    void step_all() {
        for (std::size_t i = 0; i < params.size(); ++i) opt.step(static_cast<int>(i), accums[i]);
    }
    // Adds tape grads of a forward pass's parameter leaves into accumulators,
    // in registration order for the given segments.
    void accumulate_segment(Tape& t, const std::vector<std::pair<NodeId, NodeId>>& nodes,
                            int& slot) {
        for (const auto& [wn, bn] : nodes) {
            if (!wn.valid()) continue;
            const Tensor& gw = t.grad(wn);
            const Tensor& gb = t.grad(bn);
            Tensor& aw = accums[slot];
            Tensor& ab = accums[slot + 1];
            for (long i = 0; i < gw.size(); ++i) aw[i] += gw[i];
            for (long i = 0; i < gb.size(); ++i) ab[i] += gb[i];
            slot += 2;
        }
    }

    Tensor adversarial_batch(const Model& m, const Tensor& clean,
                             const std::vector<int>& labels) {
        Tensor adv = clean;
        auto shape = m.spec.input_shape;
        long per = 1;
        for (int d : shape) per *= d;
        for (int i = 0; i < clean.dim(0); ++i) {
            std::vector<int> one_shape = {1};
            one_shape.insert(one_shape.end(), shape.begin(), shape.end());
            Tensor x(one_shape);
            std::copy_n(&clean.data[i * per], per, x.data.begin());
            Tensor xa = pgd_attack(m, x, labels[i], *cfg.adversarial, &rng);
            std::copy_n(xa.data.begin(), per, &adv.data[i * per]);
        }
        return adv;
    }
};

}  // namespace

TrainState train_fc(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg) {
    if (spec.bottleneck != BottleneckKind::FullyConnected)
        throw Error("train_fc: spec is not a fully-connected bottleneck");
    Trainer tr(ds, cfg);
    tr.state.model = Model::init(spec, tr.rng);
    Model& m = tr.state.model;
    if (!cfg.encoder_from.empty()) adopt_encoder(m, cfg.encoder_from);
    tr.reg_segment(m.encoder_params);
    tr.reg_segment(m.bottleneck_params);
    tr.reg_segment(m.classifier_params);

    double prev_full = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto batches = make_batches(ds.n(), cfg.batch, tr.rng);
        double sum_lc = 0.0;
        for (const auto& ids : batches) {
            std::vector<int> labels;
            for (int i : ids) labels.push_back(ds.labels[i]);
            Tensor clean = ds.batch(ids);
            tr.zero_accums();

            double batch_loss = 0.0;
            auto pass = [&](const Tensor& input) {
                Tape t;
                ForwardNodes fn;
                NodeId probs = m.forward_probs(t, leaf(t, input), &fn);
                NodeId loss = nll_loss(t, probs, labels);
                batch_loss += t.value(loss)[0];
                t.backward(loss);
                int slot = 0;
                tr.accumulate_segment(t, fn.encoder, slot);
                tr.accumulate_segment(t, fn.bottleneck, slot);
                tr.accumulate_segment(t, fn.classifier, slot);
            };
            pass(clean);
            if (cfg.adversarial) pass(tr.adversarial_batch(m, clean, labels));
            check_finite_loss(batch_loss, epoch);
            tr.step_all();
            sum_lc += batch_loss;
        }
        double lc = sum_lc / batches.size();
        tr.state.history.push_back({lc, 0.0, lc});
        tr.state.epoch = epoch + 1;
        if (epoch > 0 && std::abs(lc - prev_full) < cfg.early_stop_tol) break;
        prev_full = lc;
    }
    return tr.state;
}

TrainState train_np(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg) {
    if (spec.bottleneck != BottleneckKind::NeighborPreserving)
        throw Error("train_np: spec is not a neighbor-preserving bottleneck");
    Trainer tr(ds, cfg);
    tr.state.model = Model::init(spec, tr.rng);
    Model& m = tr.state.model;
    if (!cfg.encoder_from.empty()) adopt_encoder(m, cfg.encoder_from);

    int n = ds.n();
    int k = std::min(cfg.graph_k, n - 1);
    Tensor u_high = encode_all(m, ds);
    tr.state.graph = neighborhood_graph(u_high, k);

    TrainConfig init_cfg = cfg;
    init_cfg.epochs = cfg.init_embed_epochs;
    Tensor low = init_embeddings_with_graph(tr.state.graph, n, spec.bottleneck_dim, init_cfg);

    m.table.ref_high = std::move(u_high);
    m.table.ref_low = std::move(low);
    m.table.ref_weight.assign(n, 1.0);
    m.table.k_predict = k;
    m.table.validate();

    // The mu targets are frozen between graph refreshes, and the encoder
    // receives no gradient on either loss path, so u_high is invariant and
    // a rebuild at refresh epochs would reproduce the same graph. The
    // refresh hook stays for encoder-updating variants.
    int ref_low_slot = tr.reg(&m.table.ref_low);
    tr.reg_segment(m.classifier_params);
    Adjacency adj(tr.state.graph);

    double prev_full = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto batches = make_batches(n, cfg.batch, tr.rng);
        double sum_lc = 0.0, sum_lg = 0.0, sum_full = 0.0;
        for (const auto& ids : batches) {
            std::vector<int> labels;
            for (int i : ids) labels.push_back(ds.labels[i]);
            tr.zero_accums();

            double batch_lc = 0.0, batch_lg = 0.0;
            {
                Tape t;
                NodeId ulow_b = gather_train_embed(t, m.table, ids, &tr.accums[ref_low_slot]);
                std::vector<std::pair<NodeId, NodeId>> cls_nodes;
                NodeId probs =
                    forward_segment(t, spec.classifier, m.classifier_params, ulow_b, &cls_nodes);
                NodeId lc = nll_loss(t, probs, labels);
                NodeId lfull = lc;
                if (cfg.alpha > 0.0) {
                    PairBatch pb = batch_pairs(adj, ids, cfg.neg_samples, tr.rng);
                    if (!pb.pairs.empty()) {
                        NodeId dists = pair_dist(t, ulow_b, pb.pairs);
                        NodeId lg = fuzzy_ce_from_dist(t, dists, pb.mu);
                        batch_lg = t.value(lg)[0];
                        lfull = add(t, lc, scale(t, lg, cfg.alpha));
                    }
                }
                batch_lc = t.value(lc)[0];
                t.backward(lfull);
                int slot = ref_low_slot + 1;
                tr.accumulate_segment(t, cls_nodes, slot);
            }
            if (cfg.adversarial) {
                Tensor adv = tr.adversarial_batch(m, ds.batch(ids), labels);
                Tape t;
                ForwardNodes fn;
                NodeId probs =
                    m.forward_probs(t, leaf(t, adv), &fn, &tr.accums[ref_low_slot]);
                NodeId loss = nll_loss(t, probs, labels);
                batch_lc += t.value(loss)[0];
                t.backward(loss);
                int slot = ref_low_slot + 1;
                tr.accumulate_segment(t, fn.classifier, slot);
            }
            double batch_full = batch_lc + cfg.alpha * batch_lg;
            check_finite_loss(batch_full, epoch);
            tr.step_all();
            sum_lc += batch_lc;
            sum_lg += batch_lg;
            sum_full += batch_full;
        }
        double nb = static_cast<double>(batches.size());
        tr.state.history.push_back({sum_lc / nb, sum_lg / nb, sum_full / nb});
        tr.state.epoch = epoch + 1;
        if (epoch > 0 && std::abs(sum_full / nb - prev_full) < cfg.early_stop_tol) break;
        prev_full = sum_full / nb;
    }
    return tr.state;
}

TrainState train_adversarial(const Dataset& ds, const NetworkSpec& spec,
                             const TrainConfig& cfg) {
    if (!cfg.adversarial) throw Error("train_adversarial: cfg.adversarial not set");
    return spec.bottleneck == BottleneckKind::NeighborPreserving ? train_np(ds, spec, cfg)
                                                                 : train_fc(ds, spec, cfg);
}

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history) {
    std::ofstream out(path);
    if (!out) throw Error("loss csv: cannot write " + path);
    out << "epoch,L_C,L_G,L_full\n";
    out.precision(12);
    for (std::size_t i = 0; i < history.size(); ++i)
        out << i << "," << history[i].lc << "," << history[i].lg << "," << history[i].lfull
            << "\n";
}

}  // namespace npnet
