#include "kgmc/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace kgmc {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::text: return "text";
        case Modality::image: return "image";
        case Modality::kg: return "kg";
    }
    return "?";
}

namespace {
Tensor glorot(std::size_t in, std::size_t out, Rng& rng) {
    Tensor w({in, out});
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& v : w.v) v = rng.uniform(-bound, bound);
    return w;
}

Tensor ones(std::size_t n) {
    Tensor t({n});
    for (double& v : t.v) v = 1.0;
    return t;
}
}  // namespace

void add_linear_params(ParamStore& params, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng) {
    params.add(name + ".w", glorot(in, out, rng));
    params.add(name + ".b", Tensor({out}));
}

void init_fusion(ParamStore& params, FusionState& state, const FusionDims& dims,
                 const ModalitySet& active, Rng& rng) {
    state.dims = dims;
    state.active = active;
    if (active.count() == 0) throw std::runtime_error("fusion: no active modalities");
    for (int mi = 0; mi < 3; ++mi) {
        const auto m = static_cast<Modality>(mi);
        if (!active.active(m)) continue;
        const std::size_t in = dims.input_width(m);
        if (in == 0) throw std::runtime_error(std::string("fusion: zero width for modality ") +
                                              modality_name(m));
        const std::string tag = modality_name(m);
        params.add("bn_" + tag + ".gain", ones(in));
        params.add("bn_" + tag + ".bias", Tensor({in}));
        params.add("proj_" + tag + ".w", glorot(in, dims.proj, rng));
        params.add("proj_" + tag + ".b", Tensor({dims.proj}));
        state.bn[mi] = BnStats(in);
    }
    // one attention affine shared by all modalities
    params.add("atten.w", glorot(dims.proj, dims.proj, rng));
    params.add("atten.b", Tensor({dims.proj}));
}

void project_modalities(Tape& tape, BoundParams& params, FusionState& state,
                        const Tensor* inputs[3], bool train_mode, FusionVars& out) {
    for (int mi = 0; mi < 3; ++mi) {
        const auto m = static_cast<Modality>(mi);
        out.h[mi] = Var{};
        if (!state.active.active(m)) continue;
        if (inputs[mi] == nullptr)
            throw std::runtime_error(std::string("fusion: missing input for modality ") +
                                     modality_name(m));
        const std::string tag = modality_name(m);
        const Var x = tape.input(*inputs[mi]);
        const Var gain = params.bind("bn_" + tag + ".gain");
        const Var bias = params.bind("bn_" + tag + ".bias");
        const Var normed =
            train_mode
                ? tape.batchnorm_train(x, gain, bias, state.bn[mi], state.bn_eps, state.bn_momentum)
                : tape.batchnorm_eval(x, gain, bias, state.bn[mi], state.bn_eps);
        const Var w = params.bind("proj_" + tag + ".w");
        const Var b = params.bind("proj_" + tag + ".b");
        out.h[mi] = tape.affine(normed, w, b);
    }
}

void attend_and_fuse(Tape& tape, BoundParams& params, FusionVars& vars) {
    const Var aw = params.bind("atten.w");
    const Var ab = params.bind("atten.b");
    Var fused{};
    for (int mi = 0; mi < 3; ++mi) {
        vars.gate[mi] = Var{};
        if (!vars.h[mi].valid()) continue;
        vars.gate[mi] = tape.sigmoid(tape.affine(vars.h[mi], aw, ab));
        const Var weighted = tape.mul(vars.h[mi], vars.gate[mi]);
        fused = fused.valid() ? tape.add(fused, weighted) : weighted;
    }
    if (!fused.valid()) throw std::runtime_error("fusion: nothing to fuse");
    vars.fused = fused;
}

Var attention_teacher_loss(Tape& tape, Var kg_gate, const Tensor& pseudo_labels) {
    if (!kg_gate.valid())
        throw std::runtime_error("attention_teacher_loss: KG modality is not active");
    const Var scalarized = tape.mean_rows(kg_gate);
    return tape.teacher_loss(scalarized, pseudo_labels);
}

std::vector<std::string> fusion_param_names(const ModalitySet& active) {
    std::vector<std::string> names;
    for (int mi = 0; mi < 3; ++mi) {
        const auto m = static_cast<Modality>(mi);
        if (!active.active(m)) continue;
        const std::string tag = modality_name(m);
        names.push_back("bn_" + tag + ".gain");
        names.push_back("bn_" + tag + ".bias");
        names.push_back("proj_" + tag + ".w");
        names.push_back("proj_" + tag + ".b");
    }
    names.push_back("atten.w");
    names.push_back("atten.b");
    return names;
}

}  // namespace kgmc
