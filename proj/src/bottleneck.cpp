#include "npnet/bottleneck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace npnet {

void EmbeddingTable::validate() const {
    if (size() == 0) throw Error("embedding table: empty");
    if (ref_low.dim(0) != size() || static_cast<int>(ref_weight.size()) != size())
        throw Error("embedding table: row count mismatch");
    if (low_dim() >= high_dim()) throw Error("embedding table: low dim must be < high dim");
    for (double v : ref_weight)
        if (!(v > 0.0)) throw Error("embedding table: non-positive reference weight");
    if (k_predict < 1 || k_predict > size())
        throw Error("embedding table: k_predict out of range");
}

void EmbeddingTable::to_checkpoint(Checkpoint& ck) const {
    ck.meta["k_predict"] = std::to_string(k_predict);
    ck.add("ref_high", ref_high);
    ck.add("ref_low", ref_low);
    ck.add("ref_weight", Tensor({size()}, std::vector<double>(ref_weight)));
}

EmbeddingTable EmbeddingTable::from_checkpoint(const Checkpoint& ck) {
    EmbeddingTable t;
    t.ref_high = ck.get("ref_high");
    t.ref_low = ck.get("ref_low");
    t.ref_weight = ck.get("ref_weight").data;
    t.k_predict = std::stoi(ck.meta_at("k_predict"));
    t.validate();
    return t;
}

// k nearest reference rows by Euclidean distance, ties to the lower index.
static void nearest_refs(const EmbeddingTable& table, const double* x, int k,
                         std::vector<int>& ids, std::vector<double>& dists) {
    int R = table.size(), p = table.high_dim();
    std::vector<std::pair<double, int>> cand(R);
    for (int r = 0; r < R; ++r) {
        const double* row = &table.ref_high.data[static_cast<long>(r) * p];
        double s = 0.0;
        for (int q = 0; q < p; ++q) {
            double diff = x[q] - row[q];
            s += diff * diff;
        }
        cand[r] = {s, r};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    ids.resize(k);
    dists.resize(k);
    for (int t = 0; t < k; ++t) {
        ids[t] = cand[t].second;
        dists[t] = std::sqrt(cand[t].first);
    }
}

BottleneckOutput predict_embed(const EmbeddingTable& table, const double* u_high) {
    table.validate();
    int k = table.k_predict, d = table.low_dim();
    BottleneckOutput out;
    std::vector<double> dists;
    nearest_refs(table, u_high, k, out.neighbor_ids, dists);
    out.weights.resize(k);
    double sum = 0.0;
    for (int t = 0; t < k; ++t) {
        out.weights[t] = table.ref_weight[out.neighbor_ids[t]] * std::exp(-dists[t]);
        sum += out.weights[t];
    }
    out.low.assign(d, 0.0);
    for (int t = 0; t < k; ++t) {
        out.weights[t] /= sum;
        const double* y = &table.ref_low.data[static_cast<long>(out.neighbor_ids[t]) * d];
        for (int q = 0; q < d; ++q) out.low[q] += out.weights[t] * y[q];
    }
    return out;
}

BottleneckOutput predict_embed(const EmbeddingTable& table, const Tensor& u_high) {
    if (u_high.size() != table.high_dim())
        throw Error("predict_embed: query dimension " + std::to_string(u_high.size()) +
                    " != table dimension " + std::to_string(table.high_dim()));
    return predict_embed(table, u_high.data.data());
}

NodeId predict_embed_op(Tape& t, NodeId u_high, const EmbeddingTable& table,
                        Tensor* ref_low_grad) {
    const Tensor& xv = t.value(u_high);
    if (xv.ndim() != 2 || xv.dim(1) != table.high_dim())
        throw Error("predict_embed_op: expected [b x " + std::to_string(table.high_dim()) +
                    "] input");
    int b = xv.dim(0), p = table.high_dim(), d = table.low_dim(), k = table.k_predict;
    Tensor out({b, d});
    auto per = std::make_shared<std::vector<BottleneckOutput>>(b);
    for (int i = 0; i < b; ++i) {
        (*per)[i] = predict_embed(table, &xv.data[static_cast<long>(i) * p]);
        std::copy_n((*per)[i].low.begin(), d, &out.data[static_cast<long>(i) * d]);
    }
    const EmbeddingTable* tab = &table;
    return t.push(std::move(out), [u_high, per, tab, ref_low_grad, b, p, d, k](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(u_high);
        Tensor& gx = tp.grad(u_high);
        for (int i = 0; i < b; ++i) {
            const BottleneckOutput& o = (*per)[i];
            const double* gr = &g.data[static_cast<long>(i) * d];
            const double* x = &xv2.data[static_cast<long>(i) * p];
            double* gxr = &gx.data[static_cast<long>(i) * p];
            double g_dot_out = 0.0;
            for (int q = 0; q < d; ++q) g_dot_out += gr[q] * o.low[q];
            for (int tt = 0; tt < k; ++tt) {
                int r = o.neighbor_ids[tt];
                const double* ref = &tab->ref_high.data[static_cast<long>(r) * p];
                const double* y = &tab->ref_low.data[static_cast<long>(r) * d];
                double g_dot_y = 0.0;
                for (int q = 0; q < d; ++q) g_dot_y += gr[q] * y[q];
                if (ref_low_grad) {
                    double* gl = &ref_low_grad->data[static_cast<long>(r) * d];
                    for (int q = 0; q < d; ++q) gl[q] += o.weights[tt] * gr[q];
                }
                // dL/dw_norm_t scaled by dw_t/dx: w_t = v exp(-d_t) so
                // dw_t/dx = -w_t (x - ref)/d_t; normalization folds into
                // (g.y_t - g.out) * w_norm_t.
                double dist = 0.0;
                for (int q = 0; q < p; ++q) {
                    double diff = x[q] - ref[q];
                    dist += diff * diff;
                }
                dist = std::sqrt(dist);
                if (dist < 1e-12) continue;  // subgradient 0 at a reference point
                double coeff = -(g_dot_y - g_dot_out) * o.weights[tt] / dist;
                for (int q = 0; q < p; ++q) gxr[q] += coeff * (x[q] - ref[q]);
            }
        }
    });
}

NodeId gather_train_embed(Tape& t, const EmbeddingTable& table, const std::vector<int>& ids,
                          Tensor* grad_accum) {
    return gather_external(t, table.ref_low, ids, grad_accum);
}

std::vector<int> kmeans(const Tensor& points, int clusters, Rng& rng, int max_iters, double tol) {
    if (points.ndim() != 2) throw Error("kmeans: expected [n x p] points");
    int n = points.dim(0), p = points.dim(1);
    if (clusters < 1 || clusters > n) throw Error("kmeans: bad cluster count");

    // Seeded init: first center uniform, later centers sampled with
    // probability proportional to squared distance from the chosen set.
    Tensor centers({clusters, p});
    std::vector<double> d2(n, 1e300);
    int first = static_cast<int>(rng.index(n));
    std::copy_n(&points.data[static_cast<long>(first) * p], p, centers.data.begin());
    for (int c = 1; c < clusters; ++c) {
        const double* prev = &centers.data[static_cast<long>(c - 1) * p];
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* x = &points.data[static_cast<long>(i) * p];
            double s = 0.0;
            for (int q = 0; q < p; ++q) {
                double diff = x[q] - prev[q];
                s += diff * diff;
            }
            d2[i] = std::min(d2[i], s);
            total += d2[i];
        }
        int pick = 0;
        if (total > 0.0) {
            double target = rng.uniform(0.0, total), run = 0.0;
            for (int i = 0; i < n; ++i) {
                run += d2[i];
                if (run >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.index(n));
        }
        std::copy_n(&points.data[static_cast<long>(pick) * p], p,
                    &centers.data[static_cast<long>(c) * p]);
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        for (int i = 0; i < n; ++i) {
            const double* x = &points.data[static_cast<long>(i) * p];
            double best = 1e300;
            int best_c = 0;
            for (int c = 0; c < clusters; ++c) {
                const double* ctr = &centers.data[static_cast<long>(c) * p];
                double s = 0.0;
                for (int q = 0; q < p; ++q) {
                    double diff = x[q] - ctr[q];
                    s += diff * diff;
                }
                if (s < best) {
                    best = s;
                    best_c = c;
                }
            }
            assign[i] = best_c;
        }
        Tensor next({clusters, p});
        std::vector<int> count(clusters, 0);
        for (int i = 0; i < n; ++i) {
            ++count[assign[i]];
            const double* x = &points.data[static_cast<long>(i) * p];
            double* ctr = &next.data[static_cast<long>(assign[i]) * p];
            for (int q = 0; q < p; ++q) ctr[q] += x[q];
        }
        double moved = 0.0;
        for (int c = 0; c < clusters; ++c) {
            double* ctr = &centers.data[static_cast<long>(c) * p];
            if (count[c] == 0) continue;  // empty cluster keeps its center
            double* nx = &next.data[static_cast<long>(c) * p];
            for (int q = 0; q < p; ++q) {
                double v = nx[q] / count[c];
                moved = std::max(moved, std::abs(v - ctr[q]));
                ctr[q] = v;
            }
        }
        if (moved < tol) break;
    }
    return assign;
}

EmbeddingTable compress_representatives(const EmbeddingTable& table,
                                        const std::vector<int>& labels, int clusters_per_class,
                                        Rng& rng) {
    table.validate();
    if (static_cast<int>(labels.size()) != table.size())
        throw Error("compress: label count does not match table size");
    if (clusters_per_class < 1) throw Error("compress: clusters_per_class must be >= 1");
    for (double v : table.ref_weight)
        if (v != 1.0) throw Error("compress: table is already in representative mode");

    int classes = 0;
    for (int l : labels) classes = std::max(classes, l + 1);
    int p = table.high_dim(), d = table.low_dim();

    std::vector<std::vector<int>> by_class(classes);
    for (int i = 0; i < table.size(); ++i) by_class[labels[i]].push_back(i);

    EmbeddingTable out;
    out.k_predict = table.k_predict;
    std::vector<double> high_rows, low_rows;
    for (int c = 0; c < classes; ++c) {
        const auto& ids = by_class[c];
        if (static_cast<int>(ids.size()) < clusters_per_class)
            throw Error("compress: class " + std::to_string(c) + " has " +
                        std::to_string(ids.size()) + " points < " +
                        std::to_string(clusters_per_class) + " clusters");
        Tensor pts({static_cast<int>(ids.size()), p});
        for (std::size_t i = 0; i < ids.size(); ++i)
            std::copy_n(&table.ref_high.data[static_cast<long>(ids[i]) * p], p,
                        &pts.data[static_cast<long>(i) * p]);
        auto assign = kmeans(pts, clusters_per_class, rng);
        std::vector<std::vector<double>> chigh(clusters_per_class, std::vector<double>(p, 0.0));
        std::vector<std::vector<double>> clow(clusters_per_class, std::vector<double>(d, 0.0));
        std::vector<int> count(clusters_per_class, 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            int cl = assign[i];
            ++count[cl];
            for (int q = 0; q < p; ++q)
                chigh[cl][q] += table.ref_high.data[static_cast<long>(ids[i]) * p + q];
            for (int q = 0; q < d; ++q)
                clow[cl][q] += table.ref_low.data[static_cast<long>(ids[i]) * d + q];
        }
        for (int cl = 0; cl < clusters_per_class; ++cl) {
            if (count[cl] == 0) continue;  // degenerate k-means cluster
            for (int q = 0; q < p; ++q) high_rows.push_back(chigh[cl][q] / count[cl]);
            for (int q = 0; q < d; ++q) low_rows.push_back(clow[cl][q] / count[cl]);
            out.ref_weight.push_back(count[cl]);
        }
    }
    int R = static_cast<int>(out.ref_weight.size());
    out.ref_high = Tensor({R, p}, std::move(high_rows));
    out.ref_low = Tensor({R, d}, std::move(low_rows));
    out.k_predict = std::min(out.k_predict, R);
    out.validate();
    return out;
}

}  // namespace npnet
