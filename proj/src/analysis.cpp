#include "npnet/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace npnet {

namespace {

Tensor random_unit(int p, Rng& rng) {
    Tensor u({p});
    double norm = 0.0;
    do {
        norm = 0.0;
        for (int i = 0; i < p; ++i) {
            u[i] = rng.normal(0.0, 1.0);
            norm += u[i] * u[i];
        }
        norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (int i = 0; i < p; ++i) u[i] /= norm;
    return u;
}

double l2(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (long i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

double empirical_lipschitz(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                           int n_dirs, double h_step, Rng& rng) {
    if (n_dirs < 1) throw Error("empirical_lipschitz: n_dirs must be >= 1");
    if (h_step <= 0.0) throw Error("empirical_lipschitz: h_step must be positive");
    int p = static_cast<int>(x0.size());
    Tensor f0 = f(x0);
    if (!f0.all_finite()) throw Error("empirical_lipschitz: f non-finite at x0");

    double best = 0.0;
    auto probe = [&](const Tensor& u) {
        Tensor x1 = x0;
        for (int i = 0; i < p; ++i) x1.data[i] += h_step * u[i];
        Tensor f1 = f(x1);
        if (!f1.all_finite()) throw Error("empirical_lipschitz: f non-finite at probe");
        best = std::max(best, l2(f1, f0) / h_step);
    };
    for (int d = 0; d < n_dirs; ++d) probe(random_unit(p, rng));
    for (int i = 0; i < p; ++i) {
        for (double s : {1.0, -1.0}) {
            Tensor u({p});
            u[i] = s;
            probe(u);
        }
    }
    return best;
}

BoundReport np_bound_check(const EmbeddingTable& table, const Tensor& sample_points,
                           double h_step, int n_dirs, std::uint64_t seed) {
    table.validate();
    if (sample_points.ndim() != 2 || sample_points.dim(0) == 0)
        throw Error("np_bound_check: expected a non-empty [m x p] sample matrix");
    if (sample_points.dim(1) != table.high_dim())
        throw Error("np_bound_check: sample dim does not match the table");
    if (h_step <= 0.0) throw Error("np_bound_check: h_step must be positive");

    int m = sample_points.dim(0);
    int p = table.high_dim();
    int d = table.low_dim();
    Rng rng(seed);
    BoundReport rep;
    rep.points = m;
    double sum_c1 = 0.0, sum_c2 = 0.0;

    for (int s = 0; s < m; ++s) {
        const double* x0 = &sample_points.data[static_cast<long>(s) * p];
        BottleneckOutput base = predict_embed(table, x0);

        // Per-point constants from the selected neighborhood. With
        // h(t) = exp(-t) the |h'| average coincides with the weight average.
        double c1 = 0.0, c4 = 0.0;
        for (std::size_t t = 0; t < base.neighbor_ids.size(); ++t) {
            int rid = base.neighbor_ids[t];
            double dist = 0.0;
            for (int j = 0; j < p; ++j) {
                double dv = x0[j] - table.ref_high[static_cast<long>(rid) * p + j];
                dist += dv * dv;
            }
            c1 += std::exp(-std::sqrt(dist));
            double norm = 0.0;
            for (int j = 0; j < d; ++j) {
                double v = table.ref_low[static_cast<long>(rid) * d + j];
                norm += v * v;
            }
            c4 = std::max(c4, std::sqrt(norm));
        }
        c1 /= static_cast<double>(base.neighbor_ids.size());
        double c2 = c1;
        double bound = 2.0 * c4 * (c2 / c1) * 1.05;  // delta = 5% of the bound
        sum_c1 += c1;
        sum_c2 += c2;
        rep.C4 = std::max(rep.C4, c4);
        rep.T1 = std::max(rep.T1, bound);

        std::vector<int> base_ids = base.neighbor_ids;
        std::sort(base_ids.begin(), base_ids.end());

        auto probe = [&](const Tensor& u) {
            std::vector<double> x1(p);
            for (int j = 0; j < p; ++j) x1[j] = x0[j] + h_step * u[j];
            BottleneckOutput out = predict_embed(table, x1.data());
            ++rep.probes;
            std::vector<int> ids = out.neighbor_ids;
            std::sort(ids.begin(), ids.end());
            if (ids != base_ids) {
                ++rep.excluded;
                return;
            }
            double diff = 0.0;
            for (int j = 0; j < d; ++j)
                diff += (out.low[j] - base.low[j]) * (out.low[j] - base.low[j]);
            if (std::sqrt(diff) / h_step > bound) ++rep.violations;
        };
        for (int t = 0; t < n_dirs; ++t) probe(random_unit(p, rng));
        for (int i = 0; i < p; ++i) {
            for (double sg : {1.0, -1.0}) {
                Tensor u({p});
                u[i] = sg;
                probe(u);
            }
        }
    }
    rep.C1 = sum_c1 / m;
    rep.C2 = sum_c2 / m;
    return rep;
}

namespace {

// Cholesky solve of A W = B for symmetric positive-definite A [p x p],
// B [p x d]. Returns false if a pivot is not positive.
bool cholesky_solve(Tensor A, Tensor B, Tensor& W) {
    int p = A.dim(0), d = B.dim(1);
    for (int j = 0; j < p; ++j) {
        double diag = A[static_cast<long>(j) * p + j];
        for (int k = 0; k < j; ++k) {
            double l = A[static_cast<long>(j) * p + k];
            diag -= l * l;
        }
        if (diag <= 0.0) return false;
        diag = std::sqrt(diag);
        A[static_cast<long>(j) * p + j] = diag;
        for (int i = j + 1; i < p; ++i) {
            double v = A[static_cast<long>(i) * p + j];
            for (int k = 0; k < j; ++k)
                v -= A[static_cast<long>(i) * p + k] * A[static_cast<long>(j) * p + k];
            A[static_cast<long>(i) * p + j] = v / diag;
        }
    }
    // Forward then back substitution per right-hand side.
    W = B;
    for (int c = 0; c < d; ++c) {
        for (int i = 0; i < p; ++i) {
            double v = W[static_cast<long>(i) * d + c];
            for (int k = 0; k < i; ++k)
                v -= A[static_cast<long>(i) * p + k] * W[static_cast<long>(k) * d + c];
            W[static_cast<long>(i) * d + c] = v / A[static_cast<long>(i) * p + i];
        }
        for (int i = p - 1; i >= 0; --i) {
            double v = W[static_cast<long>(i) * d + c];
            for (int k = i + 1; k < p; ++k)
                v -= A[static_cast<long>(k) * p + i] * W[static_cast<long>(k) * d + c];
            W[static_cast<long>(i) * d + c] = v / A[static_cast<long>(i) * p + i];
        }
    }
    return true;
}

double top_eigenvalue(const Tensor& A, int iters = 300) {
    int p = A.dim(0);
    std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p)));
    std::vector<double> w(p);
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        for (int i = 0; i < p; ++i) {
            double s = 0.0;
            for (int j = 0; j < p; ++j) s += A[static_cast<long>(i) * p + j] * v[j];
            w[i] = s;
        }
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-300) return 0.0;
        lambda = norm;
        for (int i = 0; i < p; ++i) v[i] = w[i] / norm;
    }
    return lambda;
}

}  // namespace

BoundReport fc_bound_check(const Tensor& X_in, const Tensor& Y_in, Tensor* W_out) {
    if (X_in.ndim() != 2 || Y_in.ndim() != 2) throw Error("fc_bound_check: expected matrices");
    int n = X_in.dim(0), p = X_in.dim(1), d = Y_in.dim(1);
    if (Y_in.dim(0) != n) throw Error("fc_bound_check: row counts differ");
    if (n <= p) throw Error("fc_bound_check: need n > p for a well-posed fit");

    Tensor X = X_in, Y = Y_in;
    auto center = [](Tensor& M) {
        int rows = M.dim(0), cols = M.dim(1);
        for (int c = 0; c < cols; ++c) {
            double mean = 0.0;
            for (int i = 0; i < rows; ++i) mean += M[static_cast<long>(i) * cols + c];
            mean /= rows;
            for (int i = 0; i < rows; ++i) M[static_cast<long>(i) * cols + c] -= mean;
        }
    };
    center(X);
    center(Y);

    Tensor XtX({p, p});
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
            double s = 0.0;
            for (int t = 0; t < n; ++t)
                s += X[static_cast<long>(t) * p + i] * X[static_cast<long>(t) * p + j];
            XtX[static_cast<long>(i) * p + j] = s;
            XtX[static_cast<long>(j) * p + i] = s;
        }
    Tensor XtY({p, d});
    for (int i = 0; i < p; ++i)
        for (int c = 0; c < d; ++c) {
            double s = 0.0;
            for (int t = 0; t < n; ++t)
                s += X[static_cast<long>(t) * p + i] * Y[static_cast<long>(t) * d + c];
            XtY[static_cast<long>(i) * d + c] = s;
        }

    BoundReport rep;
    Tensor W;
    if (!cholesky_solve(XtX, XtY, W)) {
        rep.ridge_applied = true;
        Tensor ridged = XtX;
        double tr = 0.0;
        for (int i = 0; i < p; ++i) tr += XtX[static_cast<long>(i) * p + i];
        double lam = 1e-8 * std::max(tr / p, 1.0);
        for (int i = 0; i < p; ++i) ridged[static_cast<long>(i) * p + i] += lam;
        if (!cholesky_solve(ridged, XtY, W))
            throw Error("fc_bound_check: singular X^T X even with ridge");
    }
    if (W_out) *W_out = W;

    Tensor cov({p, p});
    for (long i = 0; i < cov.size(); ++i) cov[i] = XtX[i] / n;
    rep.C5 = top_eigenvalue(cov);

    std::vector<double> sdx(p);
    for (int i = 0; i < p; ++i) sdx[i] = std::sqrt(XtX[static_cast<long>(i) * p + i] / n);

    const double delta = 0.1;
    rep.T2 = -1e300;
    rep.points = d;
    for (int j = 0; j < d; ++j) {
        double sdy = 0.0;
        for (int t = 0; t < n; ++t) {
            double v = Y[static_cast<long>(t) * d + j];
            sdy += v * v;
        }
        sdy = std::sqrt(sdy / n);
        double acc = 0.0;
        std::vector<double> Dj(p), rj(p);
        for (int i = 0; i < p; ++i) {
            double cov_xy = XtY[static_cast<long>(i) * d + j] / n;
            Dj[i] = sdx[i] * sdy;
            rj[i] = (sdx[i] > 0.0 && sdy > 0.0) ? cov_xy / (sdx[i] * sdy) : 0.0;
            acc += Dj[i] * Dj[i] * rj[i] * rj[i];
        }
        double bound = std::sqrt(acc) / (rep.C5 + delta) - delta;
        double wn = 0.0;
        for (int i = 0; i < p; ++i) {
            double v = W[static_cast<long>(i) * d + j];
            wn += v * v;
        }
        wn = std::sqrt(wn);
        if (wn < bound) ++rep.violations;
        if (bound > rep.T2) {
            rep.T2 = bound;
            rep.D = std::move(Dj);
            rep.r = std::move(rj);
        }
    }
    return rep;
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    const double eps = 1e-15, tiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, dd = 1.0 - qab * x / qap;
    if (std::abs(dd) < tiny) dd = tiny;
    dd = 1.0 / dd;
    double h = dd;
    for (int m = 1; m <= 400; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        dd = 1.0 + aa * dd;
        if (std::abs(dd) < tiny) dd = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        dd = 1.0 / dd;
        h *= dd * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        dd = 1.0 + aa * dd;
        if (std::abs(dd) < tiny) dd = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        dd = 1.0 / dd;
        double del = dd * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw Error("reg_incomplete_beta: a, b must be positive");
    if (x < 0.0 || x > 1.0) throw Error("reg_incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x);
    double bt = std::exp(lbt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double ball_overlap_fraction(int p, double r, double eps) {
    if (p < 1) throw Error("ball_overlap_fraction: dimension must be >= 1");
    if (r <= 0.0) throw Error("ball_overlap_fraction: radius must be positive");
    if (eps < 0.0) throw Error("ball_overlap_fraction: offset must be >= 0");
    if (eps > 2.0 * r) throw Error("ball_overlap_fraction: balls disjoint (eps > 2r)");
    double u = eps / (2.0 * r);
    return reg_incomplete_beta(0.5, (p + 1) / 2.0, u * u);
}

double measure_distortion_gap(const Model& model, const Dataset& ds, const AttackConfig& cfg,
                              Rng* rng) {
    cfg.validate();
    if (ds.n() == 0) throw Error("measure_distortion_gap: empty dataset");
    double gap = 0.0;
    for (int i = 0; i < ds.n(); ++i) {
        AttackResult res = pgd_attack_full(model, ds.sample(i), ds.labels[i], cfg, rng);
        gap += res.best_loss - res.clean_loss;
    }
    return gap / ds.n();
}

}  // namespace npnet
