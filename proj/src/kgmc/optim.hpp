#pragma once
// Named parameter store with plain SGD and decoupled-weight-decay AdamW.

#include "kgmc/tensor.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgmc {

struct OptimConfig {
    enum class Kind { sgd, adamw };
    Kind kind = Kind::adamw;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    static OptimConfig sgd(double lr) {
        OptimConfig c;
        c.kind = Kind::sgd;
        c.lr = lr;
        c.weight_decay = 0.0;
        return c;
    }
    static OptimConfig adamw(double lr, double weight_decay = 0.01) {
        OptimConfig c;
        c.kind = Kind::adamw;
        c.lr = lr;
        c.weight_decay = weight_decay;
        return c;
    }
};

class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init);
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    std::uint64_t step_count() const { return step_; }

    // One optimizer step over the parameters named in `grads` (insertion
    // order; parameters without a gradient entry are left untouched).
    // Throws on non-finite gradients, naming the parameter.
    void step(const std::unordered_map<std::string, Tensor>& grads, const OptimConfig& cfg);

private:
    struct Slot {
        Tensor value;
        Tensor m;  // first moment (adamw)
        Tensor v;  // second moment (adamw)
        bool moments_ready = false;
    };
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<Slot> slots_;
    std::uint64_t step_ = 0;
};

}  // namespace kgmc
