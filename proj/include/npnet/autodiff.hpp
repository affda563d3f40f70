#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "npnet/tensor.hpp"

namespace npnet {

struct NodeId {
    int v = -1;
    bool valid() const { return v >= 0; }
};

// Append-only tape of recorded operations. Node inputs always precede the
// node itself; backward visits nodes once in reverse append order.
class Tape {
public:
    NodeId push(Tensor value, std::function<void(Tape&, NodeId)> backward = nullptr);

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    Tensor& value_mut(NodeId id) { return nodes_[check(id)].value; }

    // Gradient accumulator for a node, zero-initialized on first access.
    Tensor& grad(NodeId id);
    bool has_grad(NodeId id) const;

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
    void backward(NodeId loss);

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Tensor value;
        std::function<void(Tape&, NodeId)> backward;
    };
    int check(NodeId id) const {
        if (!id.valid() || id.v >= static_cast<int>(nodes_.size()))
            throw Error("Tape: node id not on tape");
        return id.v;
    }
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// Leaves and elementwise ops
NodeId leaf(Tape& t, Tensor value);
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId scale(Tape& t, NodeId a, double c);
NodeId relu(Tape& t, NodeId a);
NodeId exp_op(Tape& t, NodeId a);
NodeId sum(Tape& t, NodeId a);

// Layer ops. x is [batch x in]; W is [in x out]; bias is [out].
NodeId dense(Tape& t, NodeId x, NodeId W, NodeId bias);
// x [b,c,h,w], W [oc,c,k,k], bias [oc]; stride 1, no padding.
NodeId conv2d(Tape& t, NodeId x, NodeId W, NodeId bias);
// Non-overlapping window pooling; ties broken by lowest flat index.
NodeId maxpool2d(Tape& t, NodeId x, int window);
NodeId flatten(Tape& t, NodeId x);
NodeId softmax_rows(Tape& t, NodeId x);
// probs [b x classes]; mean of -log p_true, probabilities clamped at 1e-12.
NodeId nll_loss(Tape& t, NodeId probs, const std::vector<int>& labels);

// Rows gathered from an external matrix [R x d] (not a tape node); gradient
// rows accumulate into *grad_accum, which must match M's shape.
NodeId gather_external(Tape& t, const Tensor& M, const std::vector<int>& ids,
                       Tensor* grad_accum);

// Euclidean distances between row pairs of a [m x d] node; output [P].
NodeId pair_dist(Tape& t, NodeId rows, const std::vector<std::pair<int, int>>& pairs);

// Fuzzy cross-entropy against fixed targets mu, with nu = exp(-dist) clamped
// into [1e-6, 1-1e-6]. Output scalar.
NodeId fuzzy_ce_from_dist(Tape& t, NodeId dists, const std::vector<double>& mu);

}  // namespace npnet
