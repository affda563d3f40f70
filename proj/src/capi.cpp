#include "npnet.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>

#include "npnet/analysis.hpp"
#include "npnet/attack.hpp"
#include "npnet/data.hpp"
#include "npnet/model.hpp"
#include "npnet/trainer.hpp"

struct npnet_dataset {
    npnet::Dataset ds;
};
struct npnet_model {
    npnet::Model m;
};

namespace {

thread_local std::string g_last_error;

npnet_status fail(npnet_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename F>
npnet_status guard(F&& f) {
    try {
        f();
        return NPNET_OK;
    } catch (const npnet::Error& e) {
        return fail(NPNET_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return fail(NPNET_ERR_RUNTIME, e.what());
    }
}

npnet::TrainConfig parse_cfg(const char* const* keys, const char* const* vals, int nkv) {
    npnet::TrainConfig cfg;
    double adv_eps = 0.0;
    int adv_iters = 40;
    for (int i = 0; i < nkv; ++i) {
        if (!keys[i] || !vals[i]) throw npnet::Error("train: null config key/value");
        std::string k = keys[i], v = vals[i];
        if (k == "alpha") cfg.alpha = std::stod(v);
        else if (k == "lr") cfg.lr = std::stod(v);
        else if (k == "epochs") cfg.epochs = std::stoi(v);
        else if (k == "batch") cfg.batch = std::stoi(v);
        else if (k == "graph_k") cfg.graph_k = std::stoi(v);
        else if (k == "graph_refresh_epochs") cfg.graph_refresh_epochs = std::stoi(v);
        else if (k == "neg_samples") cfg.neg_samples = std::stoi(v);
        else if (k == "seed") cfg.seed = std::stoull(v);
        else if (k == "momentum") cfg.momentum = v != "0";
        else if (k == "init_embed_epochs") cfg.init_embed_epochs = std::stoi(v);
        else if (k == "init_embed_lr") cfg.init_embed_lr = std::stod(v);
        else if (k == "early_stop_tol") cfg.early_stop_tol = std::stod(v);
        else if (k == "encoder_from") cfg.encoder_from = v;
        else if (k == "adv_eps") adv_eps = std::stod(v);
        else if (k == "adv_iters") adv_iters = std::stoi(v);
        else throw npnet::Error("train: unknown config key '" + k + "'");
    }
    if (adv_eps > 0.0) cfg.adversarial = npnet::AttackConfig::standard(adv_eps, adv_iters);
    return cfg;
}

double chunked_accuracy(const npnet::Model& m, const npnet::Dataset& ds) {
    int n = ds.n(), hit = 0;
    const int chunk = 256;
    for (int s = 0; s < n; s += chunk) {
        std::vector<int> ids;
        for (int i = s; i < std::min(n, s + chunk); ++i) ids.push_back(i);
        auto pred = m.predict_labels(ds.batch(ids));
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (pred[i] == ds.labels[ids[i]]) ++hit;
    }
    return static_cast<double>(hit) / n;
}

}  // namespace

extern "C" {

const char* npnet_last_error(void) { return g_last_error.c_str(); }
const char* npnet_version(void) { return "0.1.0"; }

npnet_status npnet_dataset_load_idx(const char* images_path, const char* labels_path,
                                    npnet_dataset** out) {
    if (!images_path || !labels_path || !out)
        return fail(NPNET_ERR_INVALID, "load_idx: null argument");
    return guard([&] { *out = new npnet_dataset{npnet::load_idx(images_path, labels_path)}; });
}

npnet_status npnet_dataset_save_idx(const npnet_dataset* ds, const char* images_path,
                                    const char* labels_path) {
    if (!ds || !images_path || !labels_path)
        return fail(NPNET_ERR_INVALID, "save_idx: null argument");
    return guard([&] { npnet::save_idx(ds->ds, images_path, labels_path); });
}

npnet_status npnet_dataset_synth_blobs(int classes, int p, int n, double noise, uint64_t seed,
                                       npnet_dataset** out) {
    if (!out) return fail(NPNET_ERR_INVALID, "synth_blobs: null output");
    return guard(
        [&] { *out = new npnet_dataset{npnet::synth_gaussian_blobs(classes, p, n, noise, seed)}; });
}

npnet_status npnet_dataset_synth_moons(int n, double noise, uint64_t seed, npnet_dataset** out) {
    if (!out) return fail(NPNET_ERR_INVALID, "synth_moons: null output");
    return guard([&] { *out = new npnet_dataset{npnet::synth_two_moons(n, noise, seed)}; });
}

npnet_status npnet_dataset_subset(const npnet_dataset* ds, int n, uint64_t seed,
                                  npnet_dataset** out) {
    if (!ds || !out) return fail(NPNET_ERR_INVALID, "subset: null argument");
    return guard([&] { *out = new npnet_dataset{npnet::subset(ds->ds, n, seed)}; });
}

int npnet_dataset_size(const npnet_dataset* ds) { return ds ? ds->ds.n() : 0; }
int npnet_dataset_classes(const npnet_dataset* ds) { return ds ? ds->ds.classes() : 0; }

npnet_status npnet_dataset_fingerprint(const npnet_dataset* ds, char* buf, size_t buf_len) {
    if (!ds || !buf) return fail(NPNET_ERR_INVALID, "fingerprint: null argument");
    return guard([&] {
        std::string fp = npnet::dataset_fingerprint(ds->ds);
        if (fp.size() + 1 > buf_len) throw npnet::Error("fingerprint: buffer too small");
        std::memcpy(buf, fp.c_str(), fp.size() + 1);
    });
}

void npnet_dataset_free(npnet_dataset* ds) { delete ds; }

npnet_status npnet_train(const npnet_dataset* ds, const char* arch, const char* bottleneck,
                         int dim, const char* const* keys, const char* const* vals, int nkv,
                         const char* loss_csv, npnet_model** out) {
    if (!ds || !arch || !bottleneck || !out) return fail(NPNET_ERR_INVALID, "train: null argument");
    return guard([&] {
        npnet::TrainConfig cfg = parse_cfg(keys, vals, nkv);
        std::string a = arch, b = bottleneck;
        npnet::BottleneckKind kind;
        if (b == "fc") kind = npnet::BottleneckKind::FullyConnected;
        else if (b == "np") kind = npnet::BottleneckKind::NeighborPreserving;
        else throw npnet::Error("train: bottleneck must be 'fc' or 'np'");

        npnet::NetworkSpec spec;
        auto shape = ds->ds.sample_shape();
        if (a == "mnist") {
            spec = npnet::NetworkSpec::mnist(kind, dim);
        } else if (a == "mlp") {
            if (shape[0] != 1 || shape[1] != 1)
                throw npnet::Error("train: mlp arch expects flat [n,1,1,p] samples");
            spec = npnet::NetworkSpec::mlp(shape[2], 64, kind, dim, ds->ds.classes());
        } else {
            throw npnet::Error("train: arch must be 'mnist' or 'mlp'");
        }
        npnet::TrainState st = kind == npnet::BottleneckKind::NeighborPreserving
                                   ? npnet::train_np(ds->ds, spec, cfg)
                                   : npnet::train_fc(ds->ds, spec, cfg);
        if (loss_csv) npnet::write_loss_csv(loss_csv, st.history);
        *out = new npnet_model{std::move(st.model)};
    });
}

npnet_status npnet_model_load(const char* prefix, npnet_model** out) {
    if (!prefix || !out) return fail(NPNET_ERR_INVALID, "model_load: null argument");
    return guard([&] { *out = new npnet_model{npnet::Model::load(prefix)}; });
}

npnet_status npnet_model_save(const npnet_model* m, const char* prefix) {
    if (!m || !prefix) return fail(NPNET_ERR_INVALID, "model_save: null argument");
    return guard([&] { m->m.save(prefix); });
}

int npnet_model_is_np(const npnet_model* m) { return m && m->m.is_np() ? 1 : 0; }
void npnet_model_free(npnet_model* m) { delete m; }

npnet_status npnet_model_accuracy(const npnet_model* m, const npnet_dataset* ds, double* out) {
    if (!m || !ds || !out) return fail(NPNET_ERR_INVALID, "accuracy: null argument");
    return guard([&] { *out = chunked_accuracy(m->m, ds->ds); });
}

npnet_status npnet_model_attack_accuracy(const npnet_model* m, const npnet_dataset* ds,
                                         double eps, double step, int iters, int random_start,
                                         uint64_t seed, double* out) {
    if (!m || !ds || !out) return fail(NPNET_ERR_INVALID, "attack_accuracy: null argument");
    return guard([&] {
        npnet::AttackConfig cfg;
        cfg.epsilon = eps;
        cfg.step = step;
        cfg.iters = iters;
        cfg.random_start = random_start != 0;
        npnet::Rng rng(seed);
        *out = npnet::evaluate_under_attack(m->m, ds->ds, cfg, &rng);
    });
}

npnet_status npnet_model_distortion_gap(const npnet_model* m, const npnet_dataset* ds,
                                        double eps, double step, int iters, double* out) {
    if (!m || !ds || !out) return fail(NPNET_ERR_INVALID, "distortion_gap: null argument");
    return guard([&] {
        npnet::AttackConfig cfg;
        cfg.epsilon = eps;
        cfg.step = step;
        cfg.iters = iters;
        *out = npnet::measure_distortion_gap(m->m, ds->ds, cfg);
    });
}

npnet_status npnet_model_compress(const npnet_model* m, const npnet_dataset* train_ds,
                                  int clusters_per_class, uint64_t seed, npnet_model** out) {
    if (!m || !train_ds || !out) return fail(NPNET_ERR_INVALID, "compress: null argument");
    return guard([&] {
        if (!m->m.is_np()) throw npnet::Error("compress: model has no embedding table");
        if (train_ds->ds.n() != m->m.table.size())
            throw npnet::Error("compress: dataset size does not match the reference table");
        npnet::Rng rng(seed);
        npnet_model* c = new npnet_model{m->m};
        c->m.table = npnet::compress_representatives(m->m.table, train_ds->ds.labels,
                                                     clusters_per_class, rng);
        *out = c;
    });
}

static void fill_report(npnet_bound_report* out, const npnet::BoundReport& rep) {
    out->C1 = rep.C1;
    out->C2 = rep.C2;
    out->C4 = rep.C4;
    out->C5 = rep.C5;
    out->T1 = rep.T1;
    out->T2 = rep.T2;
    out->points = rep.points;
    out->probes = rep.probes;
    out->excluded = rep.excluded;
    out->violations = rep.violations;
    out->ridge_applied = rep.ridge_applied ? 1 : 0;
}

npnet_status npnet_model_np_bound_check(const npnet_model* m, int n_points, int n_dirs,
                                        double h_step, uint64_t seed, npnet_bound_report* out) {
    if (!m || !out) return fail(NPNET_ERR_INVALID, "np_bound_check: null argument");
    return guard([&] {
        if (!m->m.is_np()) throw npnet::Error("np_bound_check: model has no embedding table");
        const npnet::EmbeddingTable& table = m->m.table;
        int R = table.size();
        if (n_points < 1) throw npnet::Error("np_bound_check: n_points must be >= 1");
        n_points = std::min(n_points, R);
        npnet::Rng rng(seed);
        std::vector<int> ids(R);
        for (int i = 0; i < R; ++i) ids[i] = i;
        std::shuffle(ids.begin(), ids.end(), rng.engine());
        int p = table.high_dim();
        npnet::Tensor pts({n_points, p});
        for (int i = 0; i < n_points; ++i)
            for (int j = 0; j < p; ++j)
                pts[static_cast<long>(i) * p + j] =
                    table.ref_high[static_cast<long>(ids[i]) * p + j];
        fill_report(out, npnet::np_bound_check(table, pts, h_step, n_dirs, seed));
    });
}

npnet_status npnet_fc_synth_check(int n, int p, int d, uint64_t seed, npnet_bound_report* out) {
    if (!out) return fail(NPNET_ERR_INVALID, "fc_synth_check: null argument");
    return guard([&] {
        if (n < 2 || p < 1 || d < 1) throw npnet::Error("fc_synth_check: bad sizes");
        npnet::Rng rng(seed);
        npnet::Tensor X({n, p});
        for (double& v : X.data) v = rng.normal(0.0, 1.0);
        // Sparse linear map: each output reads three random input coordinates.
        npnet::Tensor W0({p, d});
        for (int j = 0; j < d; ++j)
            for (int t = 0; t < 3; ++t) {
                int i = static_cast<int>(rng.index(p));
                W0[static_cast<long>(i) * d + j] += rng.uniform(0.5, 1.5);
            }
        npnet::Tensor Y({n, d});
        for (int t = 0; t < n; ++t)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int i = 0; i < p; ++i)
                    s += X[static_cast<long>(t) * p + i] * W0[static_cast<long>(i) * d + j];
                Y[static_cast<long>(t) * d + j] = s;
            }
        fill_report(out, npnet::fc_bound_check(X, Y));
    });
}

npnet_status npnet_init_embed(const npnet_dataset* ds, int dim, const char* const* keys,
                              const char* const* vals, int nkv, const char* csv_path) {
    if (!ds || !csv_path) return fail(NPNET_ERR_INVALID, "init_embed: null argument");
    return guard([&] {
        auto shape = ds->ds.sample_shape();
        if (shape[0] != 1 || shape[1] != 1)
            throw npnet::Error("init_embed: expects flat [n,1,1,p] samples");
        npnet::TrainConfig cfg = parse_cfg(keys, vals, nkv);
        int n = ds->ds.n(), p = shape[2];
        npnet::Tensor flat({n, p});
        flat.data = ds->ds.images.data;
        npnet::Tensor low = npnet::init_embeddings(flat, dim, cfg);
        std::ofstream outf(csv_path);
        if (!outf) throw npnet::Error("init_embed: cannot write " + std::string(csv_path));
        outf << "label";
        for (int j = 0; j < dim; ++j) outf << ",coord_" << j;
        outf << "\n";
        outf.precision(12);
        for (int i = 0; i < n; ++i) {
            outf << ds->ds.labels[i];
            for (int j = 0; j < dim; ++j) outf << "," << low[static_cast<long>(i) * dim + j];
            outf << "\n";
        }
    });
}

npnet_status npnet_ball_overlap(int p, double r, double eps, double* out) {
    if (!out) return fail(NPNET_ERR_INVALID, "ball_overlap: null output");
    return guard([&] { *out = npnet::ball_overlap_fraction(p, r, eps); });
}

}  // extern "C"
