#include "npnet/attack.hpp"

#include <algorithm>
#include <cmath>

namespace npnet {

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw Error("attack: epsilon must be >= 0");
    if (iters > 0 && step <= 0.0) throw Error("attack: step must be positive");
    if (!(clamp_lo < clamp_hi)) throw Error("attack: empty clamp box");
    if (iters < 0) throw Error("attack: negative iteration count");
}

static double sample_loss(const Model& model, const Tensor& x, int label, Tensor* input_grad) {
    Tape t;
    NodeId in = leaf(t, x);
    NodeId probs = model.forward_probs(t, in);
    NodeId loss = nll_loss(t, probs, {label});
    double lv = t.value(loss)[0];
    if (input_grad) {
        t.backward(loss);
        *input_grad = t.grad(in);
    }
    return lv;
}

static void project(Tensor& x, const Tensor& x0, const AttackConfig& cfg) {
    for (long i = 0; i < x.size(); ++i) {
        double v = std::clamp(x[i], x0[i] - cfg.epsilon, x0[i] + cfg.epsilon);
        x[i] = std::clamp(v, cfg.clamp_lo, cfg.clamp_hi);
    }
}

AttackResult pgd_attack_full(const Model& model, const Tensor& x, int label,
                             const AttackConfig& cfg, Rng* rng) {
    cfg.validate();
    for (double v : x.data)
        if (v < cfg.clamp_lo - 1e-12 || v > cfg.clamp_hi + 1e-12)
            throw Error("attack: input outside the clamp box");

    AttackResult res;
    res.clean_loss = sample_loss(model, x, label, nullptr);
    res.best_loss = res.clean_loss;
    res.x_best = x;

    Tensor cur = x;
    if (cfg.random_start && cfg.epsilon > 0.0) {
        if (!rng) throw Error("attack: random_start requires an rng");
        for (long i = 0; i < cur.size(); ++i)
            cur[i] += rng->uniform(-cfg.epsilon, cfg.epsilon);
        project(cur, x, cfg);
    }
    for (int it = 0; it < cfg.iters; ++it) {
        Tensor grad;
        double lv = sample_loss(model, cur, label, &grad);
        if (lv > res.best_loss) {
            res.best_loss = lv;
            res.x_best = cur;
        }
        for (long i = 0; i < cur.size(); ++i) {
            double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
            cur[i] += cfg.step * s;
        }
        project(cur, x, cfg);
    }
    if (cfg.iters > 0) {
        double lv = sample_loss(model, cur, label, nullptr);
        if (lv > res.best_loss) {
            res.best_loss = lv;
            res.x_best = cur;
        }
    }
    res.x_adv = std::move(cur);

    // Constraint invariant, asserted on every call.
    for (long i = 0; i < res.x_adv.size(); ++i) {
        if (std::abs(res.x_adv[i] - x[i]) > cfg.epsilon + 1e-9)
            throw Error("attack: eps-ball constraint violated");
        if (res.x_adv[i] < cfg.clamp_lo - 1e-9 || res.x_adv[i] > cfg.clamp_hi + 1e-9)
            throw Error("attack: box constraint violated");
    }
    return res;
}

Tensor pgd_attack(const Model& model, const Tensor& x, int label, const AttackConfig& cfg,
                  Rng* rng) {
    return pgd_attack_full(model, x, label, cfg, rng).x_adv;
}

double evaluate_under_attack(const Model& model, const Dataset& ds, const AttackConfig& cfg,
                             Rng* rng) {
    cfg.validate();
    if (ds.n() == 0) throw Error("evaluate_under_attack: empty dataset");
    int hit = 0;
    for (int i = 0; i < ds.n(); ++i) {
        Tensor x = ds.sample(i);
        Tensor adv = cfg.epsilon > 0.0 ? pgd_attack(model, x, ds.labels[i], cfg, rng) : x;
        if (model.predict_labels(adv)[0] == ds.labels[i]) ++hit;
    }
    return static_cast<double>(hit) / ds.n();
}

}  // namespace npnet
