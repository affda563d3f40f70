#include "npnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace npnet {

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

NodeId Tape::push(Tensor value, std::function<void(Tape&, NodeId)> backward) {
    nodes_.push_back(Node{std::move(value), std::move(backward)});
    grads_.emplace_back();
    return NodeId{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(NodeId id) {
    int i = check(id);
    if (grads_[i].data.empty()) grads_[i] = Tensor(nodes_[i].value.shape);
    return grads_[i];
}

bool Tape::has_grad(NodeId id) const { return !grads_[check(id)].data.empty(); }

void Tape::backward(NodeId loss) {
    int li = check(loss);
    if (nodes_[li].value.size() != 1) throw Error("backward: loss must be scalar");
    grad(loss).data[0] = 1.0;
    for (int i = li; i >= 0; --i) {
        if (grads_[i].data.empty()) continue;  // node does not influence loss
        if (nodes_[i].backward) nodes_[i].backward(*this, NodeId{i});
    }
}

NodeId leaf(Tape& t, Tensor value) { return t.push(std::move(value)); }

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw Error(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                    shape_str(b.shape));
}

NodeId add(Tape& t, NodeId a, NodeId b) {
    check_same_shape(t.value(a), t.value(b), "add");
    Tensor out = t.value(a);
    const Tensor& bv = t.value(b);
    for (long i = 0; i < out.size(); ++i) out[i] += bv[i];
    return t.push(std::move(out), [a, b](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (long i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

NodeId sub(Tape& t, NodeId a, NodeId b) {
    check_same_shape(t.value(a), t.value(b), "sub");
    Tensor out = t.value(a);
    const Tensor& bv = t.value(b);
    for (long i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return t.push(std::move(out), [a, b](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (long i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
    check_same_shape(t.value(a), t.value(b), "mul");
    Tensor out = t.value(a);
    const Tensor& bv = t.value(b);
    for (long i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return t.push(std::move(out), [a, b](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(a);
        const Tensor& bv2 = tp.value(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (long i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av[i];
        }
    });
}

NodeId scale(Tape& t, NodeId a, double c) {
    Tensor out = t.value(a);
    for (double& v : out.data) v *= c;
    return t.push(std::move(out), [a, c](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (long i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

NodeId relu(Tape& t, NodeId a) {
    Tensor out = t.value(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return t.push(std::move(out), [a](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(a);
        Tensor& ga = tp.grad(a);
        for (long i = 0; i < g.size(); ++i)
            if (av[i] > 0.0) ga[i] += g[i];
    });
}

NodeId exp_op(Tape& t, NodeId a) {
    Tensor out = t.value(a);
    for (double& v : out.data) v = std::exp(v);
    return t.push(std::move(out), [a](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& ov = tp.value(self);
        Tensor& ga = tp.grad(a);
        for (long i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i];
    });
}

NodeId sum(Tape& t, NodeId a) {
    double s = 0.0;
    for (double v : t.value(a).data) s += v;
    return t.push(Tensor::scalar(s), [a](Tape& tp, NodeId self) {
        double g = tp.grad(self)[0];
        Tensor& ga = tp.grad(a);
        for (long i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

NodeId dense(Tape& t, NodeId x, NodeId W, NodeId bias) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(W);
    const Tensor& bv = t.value(bias);
    if (xv.ndim() != 2 || wv.ndim() != 2)
        throw Error("dense: expected 2-d input and weight");
    int b = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(1);
    if (wv.dim(0) != in)
        throw Error("dense: input width " + std::to_string(in) + " != weight rows " +
                    std::to_string(wv.dim(0)));
    if (bv.size() != out_dim) throw Error("dense: bias length mismatch");
    Tensor out({b, out_dim});
    for (int i = 0; i < b; ++i) {
        const double* xr = &xv.data[static_cast<long>(i) * in];
        double* orow = &out.data[static_cast<long>(i) * out_dim];
        for (int o = 0; o < out_dim; ++o) orow[o] = bv[o];
        for (int j = 0; j < in; ++j) {
            double xij = xr[j];
            const double* wr = &wv.data[static_cast<long>(j) * out_dim];
            for (int o = 0; o < out_dim; ++o) orow[o] += xij * wr[o];
        }
    }
    return t.push(std::move(out), [x, W, bias, b, in, out_dim](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(x);
        const Tensor& wv2 = tp.value(W);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(W);
        Tensor& gb = tp.grad(bias);
        for (int i = 0; i < b; ++i) {
            const double* gr = &g.data[static_cast<long>(i) * out_dim];
            const double* xr = &xv2.data[static_cast<long>(i) * in];
            double* gxr = &gx.data[static_cast<long>(i) * in];
            for (int o = 0; o < out_dim; ++o) gb[o] += gr[o];
            for (int j = 0; j < in; ++j) {
                const double* wr = &wv2.data[static_cast<long>(j) * out_dim];
                double* gwr = &gw.data[static_cast<long>(j) * out_dim];
                double acc = 0.0;
                for (int o = 0; o < out_dim; ++o) {
                    acc += gr[o] * wr[o];
                    gwr[o] += gr[o] * xr[j];
                }
                gxr[j] += acc;
            }
        }
    });
}

NodeId conv2d(Tape& t, NodeId x, NodeId W, NodeId bias) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(W);
    const Tensor& bv = t.value(bias);
    if (xv.ndim() != 4 || wv.ndim() != 4) throw Error("conv2d: expected 4-d input and kernel");
    int b = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    int oc = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != c)
        throw Error("conv2d: kernel channels " + std::to_string(wv.dim(1)) +
                    " != input channels " + std::to_string(c));
    if (wv.dim(3) != k) throw Error("conv2d: non-square kernel");
    if (bv.size() != oc) throw Error("conv2d: bias length mismatch");
    int oh = h - k + 1, ow = w - k + 1;
    if (oh <= 0 || ow <= 0) throw Error("conv2d: kernel larger than input");
    Tensor out({b, oc, oh, ow});
    auto X = [&](int n, int ci, int y, int z) -> double {
        return xv.data[((static_cast<long>(n) * c + ci) * h + y) * w + z];
    };
    auto K = [&](int o, int ci, int y, int z) -> double {
        return wv.data[((static_cast<long>(o) * c + ci) * k + y) * k + z];
    };
    for (int n = 0; n < b; ++n)
        for (int o = 0; o < oc; ++o)
            for (int y = 0; y < oh; ++y)
                for (int z = 0; z < ow; ++z) {
                    double acc = bv[o];
                    for (int ci = 0; ci < c; ++ci)
                        for (int dy = 0; dy < k; ++dy)
                            for (int dz = 0; dz < k; ++dz)
                                acc += X(n, ci, y + dy, z + dz) * K(o, ci, dy, dz);
                    out.data[((static_cast<long>(n) * oc + o) * oh + y) * ow + z] = acc;
                }
    return t.push(std::move(out), [x, W, bias, b, c, h, w, oc, k, oh, ow](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(x);
        const Tensor& wv2 = tp.value(W);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(W);
        Tensor& gb = tp.grad(bias);
        for (int n = 0; n < b; ++n)
            for (int o = 0; o < oc; ++o)
                for (int y = 0; y < oh; ++y)
                    for (int z = 0; z < ow; ++z) {
                        double gv = g.data[((static_cast<long>(n) * oc + o) * oh + y) * ow + z];
                        if (gv == 0.0) continue;
                        gb[o] += gv;
                        for (int ci = 0; ci < c; ++ci)
                            for (int dy = 0; dy < k; ++dy)
                                for (int dz = 0; dz < k; ++dz) {
                                    long xi = ((static_cast<long>(n) * c + ci) * h + y + dy) * w +
                                              z + dz;
                                    long wi = ((static_cast<long>(o) * c + ci) * k + dy) * k + dz;
                                    gw.data[wi] += gv * xv2.data[xi];
                                    gx.data[xi] += gv * wv2.data[wi];
                                }
                    }
    });
}

NodeId maxpool2d(Tape& t, NodeId x, int window) {
    const Tensor& xv = t.value(x);
    if (xv.ndim() != 4) throw Error("maxpool2d: expected 4-d input");
    if (window <= 0) throw Error("maxpool2d: window must be positive");
    int b = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    if (h % window != 0 || w % window != 0)
        throw Error("maxpool2d: input " + shape_str(xv.shape) + " not divisible by window " +
                    std::to_string(window));
    int oh = h / window, ow = w / window;
    Tensor out({b, c, oh, ow});
    auto argmax = std::make_shared<std::vector<long>>(out.size());
    for (int n = 0; n < b; ++n)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < oh; ++y)
                for (int z = 0; z < ow; ++z) {
                    double best = -1e300;
                    long best_i = -1;
                    for (int dy = 0; dy < window; ++dy)
                        for (int dz = 0; dz < window; ++dz) {
                            long xi = ((static_cast<long>(n) * c + ci) * h + y * window + dy) * w +
                                      z * window + dz;
                            if (xv.data[xi] > best) {  // strict: first max wins ties
                                best = xv.data[xi];
                                best_i = xi;
                            }
                        }
                    long oi = ((static_cast<long>(n) * c + ci) * oh + y) * ow + z;
                    out.data[oi] = best;
                    (*argmax)[oi] = best_i;
                }
    return t.push(std::move(out), [x, argmax](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (long i = 0; i < g.size(); ++i) gx.data[(*argmax)[i]] += g[i];
    });
}

NodeId flatten(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    int b = xv.dim(0);
    int rest = static_cast<int>(xv.size() / b);
    Tensor out({b, rest}, xv.data);
    return t.push(std::move(out), [x](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (long i = 0; i < g.size(); ++i) gx.data[i] += g[i];
    });
}

NodeId softmax_rows(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    if (xv.ndim() != 2) throw Error("softmax: expected 2-d input");
    int b = xv.dim(0), n = xv.dim(1);
    Tensor out({b, n});
    for (int i = 0; i < b; ++i) {
        const double* r = &xv.data[static_cast<long>(i) * n];
        double mx = *std::max_element(r, r + n);
        double denom = 0.0;
        double* o = &out.data[static_cast<long>(i) * n];
        for (int j = 0; j < n; ++j) {
            o[j] = std::exp(r[j] - mx);
            denom += o[j];
        }
        for (int j = 0; j < n; ++j) o[j] /= denom;
    }
    return t.push(std::move(out), [x, b, n](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& s = tp.value(self);
        Tensor& gx = tp.grad(x);
        for (int i = 0; i < b; ++i) {
            const double* gr = &g.data[static_cast<long>(i) * n];
            const double* sr = &s.data[static_cast<long>(i) * n];
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += gr[j] * sr[j];
            double* gxr = &gx.data[static_cast<long>(i) * n];
            for (int j = 0; j < n; ++j) gxr[j] += sr[j] * (gr[j] - dot);
        }
    });
}

NodeId nll_loss(Tape& t, NodeId probs, const std::vector<int>& labels) {
    const Tensor& pv = t.value(probs);
    if (pv.ndim() != 2) throw Error("nll_loss: expected [batch x classes] probabilities");
    int b = pv.dim(0), classes = pv.dim(1);
    if (static_cast<int>(labels.size()) != b) throw Error("nll_loss: label count mismatch");
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
        int y = labels[i];
        if (y < 0 || y >= classes)
            throw Error("nll_loss: label " + std::to_string(y) + " out of range");
        double p = std::max(pv.data[static_cast<long>(i) * classes + y], 1e-12);
        loss -= std::log(p);
    }
    loss /= b;
    auto lab = std::make_shared<std::vector<int>>(labels);
    return t.push(Tensor::scalar(loss), [probs, lab, b, classes](Tape& tp, NodeId self) {
        double g = tp.grad(self)[0];
        const Tensor& pv2 = tp.value(probs);
        Tensor& gp = tp.grad(probs);
        for (int i = 0; i < b; ++i) {
            long idx = static_cast<long>(i) * classes + (*lab)[i];
            double p = std::max(pv2.data[idx], 1e-12);
            gp.data[idx] += g * (-1.0 / p) / b;
        }
    });
}

NodeId gather_external(Tape& t, const Tensor& M, const std::vector<int>& ids,
                       Tensor* grad_accum) {
    if (M.ndim() != 2) throw Error("gather: expected 2-d table");
    int R = M.dim(0), d = M.dim(1);
    int b = static_cast<int>(ids.size());
    Tensor out({b, d});
    for (int i = 0; i < b; ++i) {
        int id = ids[i];
        if (id < 0 || id >= R) throw Error("gather: id " + std::to_string(id) + " out of range");
        std::copy_n(&M.data[static_cast<long>(id) * d], d, &out.data[static_cast<long>(i) * d]);
    }
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    return t.push(std::move(out), [ids_copy, grad_accum, d](Tape& tp, NodeId self) {
        if (!grad_accum) return;
        const Tensor& g = tp.grad(self);
        for (std::size_t i = 0; i < ids_copy->size(); ++i) {
            double* dst = &grad_accum->data[static_cast<long>((*ids_copy)[i]) * d];
            const double* src = &g.data[static_cast<long>(i) * d];
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

NodeId pair_dist(Tape& t, NodeId rows, const std::vector<std::pair<int, int>>& pairs) {
    const Tensor& rv = t.value(rows);
    if (rv.ndim() != 2) throw Error("pair_dist: expected 2-d rows");
    int m = rv.dim(0), d = rv.dim(1);
    int P = static_cast<int>(pairs.size());
    Tensor out({std::max(P, 1)});
    if (P == 0) {
        return t.push(Tensor({1}, {0.0}));
    }
    for (int p = 0; p < P; ++p) {
        auto [i, j] = pairs[p];
        if (i < 0 || i >= m || j < 0 || j >= m) throw Error("pair_dist: index out of range");
        double s = 0.0;
        const double* a = &rv.data[static_cast<long>(i) * d];
        const double* b = &rv.data[static_cast<long>(j) * d];
        for (int q = 0; q < d; ++q) {
            double diff = a[q] - b[q];
            s += diff * diff;
        }
        out[p] = std::sqrt(s);
    }
    auto pr = std::make_shared<std::vector<std::pair<int, int>>>(pairs);
    return t.push(std::move(out), [rows, pr, d](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad(self);
        const Tensor& rv2 = tp.value(rows);
        const Tensor& dist = tp.value(self);
        Tensor& gr = tp.grad(rows);
        for (std::size_t p = 0; p < pr->size(); ++p) {
            double dv = dist[p];
            if (dv < 1e-12) continue;  // subgradient 0 at coincident rows
            double gscale = g[p] / dv;
            auto [i, j] = (*pr)[p];
            const double* a = &rv2.data[static_cast<long>(i) * d];
            const double* b = &rv2.data[static_cast<long>(j) * d];
            double* ga = &gr.data[static_cast<long>(i) * d];
            double* gb = &gr.data[static_cast<long>(j) * d];
            for (int q = 0; q < d; ++q) {
                double diff = (a[q] - b[q]) * gscale;
                ga[q] += diff;
                gb[q] -= diff;
            }
        }
    });
}

NodeId fuzzy_ce_from_dist(Tape& t, NodeId dists, const std::vector<double>& mu) {
    const Tensor& dv = t.value(dists);
    int P = static_cast<int>(mu.size());
    if (P == 0) return t.push(Tensor::scalar(0.0));
    if (dv.size() < P) throw Error("fuzzy_ce_from_dist: distance/target length mismatch");
    constexpr double kClampLo = 1e-6;
    constexpr double kClampHi = 1.0 - 1e-6;
    double loss = 0.0;
    for (int p = 0; p < P; ++p) {
        double nu = std::clamp(std::exp(-dv[p]), kClampLo, kClampHi);
        double m = std::clamp(mu[p], kClampLo, kClampHi);
        if (mu[p] > 0.0) loss += mu[p] * std::log(m / nu);
        if (mu[p] < 1.0) loss += (1.0 - mu[p]) * std::log((1.0 - m) / (1.0 - nu));
    }
    auto mu_copy = std::make_shared<std::vector<double>>(mu);
    return t.push(Tensor::scalar(loss), [dists, mu_copy, P](Tape& tp, NodeId self) {
        double g = tp.grad(self)[0];
        const Tensor& dv2 = tp.value(dists);
        Tensor& gd = tp.grad(dists);
        for (int p = 0; p < P; ++p) {
            double raw = std::exp(-dv2[p]);
            if (raw <= kClampLo || raw >= kClampHi) continue;  // flat region of clamp
            double m = (*mu_copy)[p];
            // dC/dnu = -mu/nu + (1-mu)/(1-nu); dnu/ddist = -nu
            double dc_dnu = -m / raw + (1.0 - m) / (1.0 - raw);
            gd[p] += g * dc_dnu * (-raw);
        }
    });
}

}  // namespace npnet
