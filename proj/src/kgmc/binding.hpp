#pragma once
// Bridges ParamStore and Tape for one training step: each parameter becomes
// a tape leaf exactly once (so gradients of shared parameters accumulate),
// and the gradient map can be read back after backward().

#include "kgmc/optim.hpp"
#include "kgmc/tape.hpp"

#include <string>
#include <unordered_map>

namespace kgmc {

class BoundParams {
public:
    BoundParams(Tape& tape, ParamStore& params) : tape_(tape), params_(params) {}

    Var bind(const std::string& name) {
        auto it = vars_.find(name);
        if (it != vars_.end()) return it->second;
        const Var v = tape_.input(params_.get(name));
        vars_.emplace(name, v);
        return v;
    }

    bool bound(const std::string& name) const { return vars_.count(name) != 0; }

    // Valid after tape.backward().
    std::unordered_map<std::string, Tensor> grads() const {
        std::unordered_map<std::string, Tensor> out;
        for (const auto& [name, var] : vars_) out.emplace(name, tape_.grad(var));
        return out;
    }

private:
    Tape& tape_;
    ParamStore& params_;
    std::unordered_map<std::string, Var> vars_;
};

}  // namespace kgmc
