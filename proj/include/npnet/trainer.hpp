#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npnet/attack.hpp"
#include "npnet/data.hpp"
#include "npnet/graph.hpp"
#include "npnet/model.hpp"

namespace npnet {

struct TrainConfig {
    double alpha = 1.0;  // weight of the graph loss in the full loss
    double lr = 0.05;
    int epochs = 30;
    int batch = 64;
    int graph_k = 15;
    int graph_refresh_epochs = 5;
    int neg_samples = 5;  // negative pairs per positive pair, target mu = 0
    std::uint64_t seed = 0;
    std::optional<AttackConfig> adversarial;
    bool momentum = true;  // SGD+momentum(0.9) vs plain SGD
    int init_embed_epochs = 50;
    double init_embed_lr = 0.2;  // per-edge rate for the embedding init phase
    double early_stop_tol = 1e-5;
    // Checkpoint prefix of a trained model whose encoder weights seed (and,
    // for the embedding path, permanently provide) the encoder. Empty means
    // random init.
    std::string encoder_from;

    void validate() const;
    std::map<std::string, std::string> to_kv() const;
};

struct EpochLoss {
    double lc = 0.0;
    double lg = 0.0;
    double lfull = 0.0;
};

struct TrainState {
    Model model;
    FuzzyGraph graph;  // (A, mu) over the training set; empty for FC runs
    int epoch = 0;
    std::vector<EpochLoss> history;
};

// Encoder forward in fixed-size chunks to bound tape memory.
Tensor encode_all(const Model& model, const Dataset& ds, int chunk = 256);

// Optimize embeddings against the graph loss alone from a seeded Gaussian
// init (scale 1e-2); returns the [n x d] low matrix.
Tensor init_embeddings(const Tensor& u_high, int d, const TrainConfig& cfg);
// Same, over a prebuilt graph of the points.
Tensor init_embeddings_with_graph(const FuzzyGraph& graph, int n, int d,
                                  const TrainConfig& cfg);

TrainState train_fc(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg);
TrainState train_np(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg);
// Dispatches on spec.bottleneck; cfg.adversarial must be set.
TrainState train_adversarial(const Dataset& ds, const NetworkSpec& spec,
                             const TrainConfig& cfg);

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history);

}  // namespace npnet
