#pragma once
// Minimal reverse-mode tape over Tensor. Nodes are appended in topological
// order; backward() walks them in reverse. The loss heads (binary
// cross-entropy, the attention-teacher barrier, the contrastive objective)
// are fused ops with hand-derived adjoints; everything is validated against
// central differences (gradcheck.hpp).

#include "kgmc/tensor.hpp"

#include <functional>
#include <vector>

namespace kgmc {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Per-feature batch-norm running statistics (not trained by the optimizer).
struct BnStats {
    std::vector<double> mean;
    std::vector<double> var;

    explicit BnStats(std::size_t dim = 0) : mean(dim, 0.0), var(dim, 1.0) {}
};

class Tape {
public:
    Var input(Tensor value);

    // x:[B,I] * w:[I,O] -> [B,O]
    Var matmul(Var x, Var w);
    // x:[B,D] * y:[G,D]^T -> [B,G]
    Var matmul_nt(Var x, Var y);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var x, double c);
    Var add_rowvec(Var x, Var b);  // broadcast [D] over rows of [B,D]
    Var sigmoid(Var x);
    Var sum(Var x);        // -> [1]
    Var mean_rows(Var x);  // [B,D] -> [B]
    Var rowwise_dot(Var a, Var b);

    Var affine(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

    // Train-mode batch norm: normalizes with batch statistics (biased
    // variance) and updates `running` in place (unbiased variance,
    // new = (1-momentum)*old + momentum*batch). Requires >= 2 rows.
    Var batchnorm_train(Var x, Var gain, Var bias, BnStats& running, double eps,
                        double momentum);
    // Eval-mode batch norm: uses running statistics, any batch size.
    Var batchnorm_eval(Var x, Var gain, Var bias, const BnStats& running, double eps);

    // -sum_{i,j} [ y log p + (1-y) log(1-p) ], p clamped to [1e-7, 1-1e-7].
    Var bce_loss(Var probs, const Tensor& labels);

    // -sum_i log(1 - min(|a_i - t_i|, 1 - 1e-6)) over a:[B] and targets [B].
    Var teacher_loss(Var a, const Tensor& targets);

    // Per sample i: -log( exp(pos_i/tau) / (exp(pos_i/tau) + q_i) ) with
    // q_i = sum over neg_sets[i] of exp(negs[i][g]/tau), summed over the
    // batch, computed via log-sum-exp. Empty negative set contributes 0.
    Var contrastive_loss(Var pos, Var negs, const std::vector<std::vector<int>>& neg_sets,
                         double tau);

    void backward(Var root);

    const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    Tensor& mutable_value(Var v) { return nodes_[static_cast<std::size_t>(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, int)> back;  // accumulates into parent grads
    };

    Var push(Tensor value, std::function<void(Tape&, int)> back);
    Tensor& g(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
    const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    std::vector<Node> nodes_;
};

}  // namespace kgmc
