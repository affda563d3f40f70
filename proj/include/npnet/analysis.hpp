#pragma once

#include <functional>
#include <vector>

#include "npnet/attack.hpp"
#include "npnet/bottleneck.hpp"

namespace npnet {

// Empirical constants and bound values for the Lipschitz comparisons.
struct BoundReport {
    double C1 = 0.0;  // mean neighbor weight (lower-bound estimate of E h(d))
    double C2 = 0.0;  // mean |h'(d)| over neighbors
    double C4 = 0.0;  // max neighbor low-embedding norm
    double C5 = 0.0;  // top eigenvalue of cov(x)
    std::vector<double> D;  // per-coordinate sd products, worst output coord
    std::vector<double> r;  // per-coordinate correlations, worst output coord
    double T1 = 0.0;        // upper bound on the embedding layer's local gain
    double T2 = 0.0;        // lower bound on the dense layer's gain
    int points = 0;
    int probes = 0;
    int excluded = 0;  // probes that switched the neighbor set
    int violations = 0;
    bool ridge_applied = false;
};

// Max over n_dirs random unit directions plus the +-coordinate axes of
// ||f(x0 + h u) - f(x0)|| / h.
double empirical_lipschitz(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                           int n_dirs, double h_step, Rng& rng);

// Probes the embedding table around each sample point and counts probes whose
// finite-difference gain exceeds the per-point bound 2*C4*(C2/C1)*1.05.
// Probes that change the k-nearest reference set are excluded.
BoundReport np_bound_check(const EmbeddingTable& table, const Tensor& sample_points,
                           double h_step, int n_dirs, std::uint64_t seed);

// Fits least-squares weights Y ~ X W and checks the per-output-column norm
// lower bound (1/(C5+0.1)) * sqrt(sum_i D_i^2 r_i^2) - 0.1. Columns of X and
// Y are centered internally. Returns the fitted W through *W_out if given.
BoundReport fc_bound_check(const Tensor& X, const Tensor& Y, Tensor* W_out = nullptr);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double reg_incomplete_beta(double a, double b, double x);

// Fraction vol(B_r(x0) \ B_r(x0 + eps)) / vol(B_r(x0)) for p-dimensional
// balls: I_{(eps/2r)^2}(1/2, (p+1)/2). Requires 0 <= eps <= 2r.
double ball_overlap_fraction(int p, double r, double eps);

// Mean over the dataset of (best-of-trajectory attack loss - clean loss).
double measure_distortion_gap(const Model& model, const Dataset& ds, const AttackConfig& cfg,
                              Rng* rng = nullptr);

}  // namespace npnet
