#pragma once

#include <optional>

#include "npnet/data.hpp"
#include "npnet/model.hpp"
#include "npnet/rng.hpp"

namespace npnet {

struct AttackConfig {
    double epsilon = 0.1;  // l-inf radius in normalized pixel units
    double step = 0.01;    // per-iteration magnitude
    int iters = 40;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;
    bool random_start = false;

    static AttackConfig standard(double eps, int iters = 40) {
        AttackConfig c;
        c.epsilon = eps;
        c.step = eps / 10.0;
        c.iters = iters;
        return c;
    }
    void validate() const;
};

struct AttackResult {
    Tensor x_adv;            // final iterate, inside the eps-ball and the box
    Tensor x_best;           // best-of-trajectory under the loss
    double clean_loss = 0.0;
    double best_loss = 0.0;
};

// Sign-gradient ascent on the classification loss with projection into the
// eps-ball around x and the data box after every step. sign(0) = 0.
AttackResult pgd_attack_full(const Model& model, const Tensor& x, int label,
                             const AttackConfig& cfg, Rng* rng = nullptr);
Tensor pgd_attack(const Model& model, const Tensor& x, int label, const AttackConfig& cfg,
                  Rng* rng = nullptr);

// Fraction of samples still classified correctly after attack.
double evaluate_under_attack(const Model& model, const Dataset& ds, const AttackConfig& cfg,
                             Rng* rng = nullptr);

}  // namespace npnet
