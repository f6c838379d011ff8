#include "kgmc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace kgmc {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::runtime_error("parameter already exists: " + name);
    index_[name] = slots_.size();
    order_.push_back(name);
    slots_.push_back(Slot{std::move(init), Tensor{}, Tensor{}, false});
    return slots_.back().value;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
    return slots_[it->second].value;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
    return slots_[it->second].value;
}

void ParamStore::step(const std::unordered_map<std::string, Tensor>& grads,
                      const OptimConfig& cfg) {
    ++step_;
    const double t = static_cast<double>(step_);
    for (const std::string& name : order_) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        Slot& slot = slots_[index_.at(name)];
        const Tensor& g = git->second;
        if (!g.same_shape(slot.value))
            throw std::runtime_error("gradient shape mismatch for parameter: " + name);
        for (double gv : g.v)
            if (!std::isfinite(gv))
                throw std::runtime_error("non-finite gradient for parameter: " + name);

        if (cfg.kind == OptimConfig::Kind::sgd) {
            for (std::size_t i = 0; i < slot.value.v.size(); ++i)
                slot.value.v[i] -= cfg.lr * g.v[i];
            continue;
        }

        if (!slot.moments_ready) {
            slot.m = Tensor(slot.value.shape);
            slot.v = Tensor(slot.value.shape);
            slot.moments_ready = true;
        }
        const double bc1 = 1.0 - std::pow(cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t i = 0; i < slot.value.v.size(); ++i) {
            double& m = slot.m.v[i];
            double& v = slot.v.v[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g.v[i];
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.v[i] * g.v[i];
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            // decoupled weight decay
            slot.value.v[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) +
                                         cfg.weight_decay * slot.value.v[i]);
        }
    }
}

}  // namespace kgmc
