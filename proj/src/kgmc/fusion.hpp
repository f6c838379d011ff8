#pragma once
// Modality fusion: per-modality batch-norm + linear projection to a common
// width, a single shared linear+sigmoid attention module gating all
// modalities, weighted-sum fusion, and the self-supervised attention-teacher
// loss that regresses the mean KG gate onto the pseudo-labels.

#include "kgmc/binding.hpp"
#include "kgmc/optim.hpp"
#include "kgmc/tape.hpp"
#include "kgmc/util/rng.hpp"

#include <string>
#include <vector>

namespace kgmc {

enum class Modality { text = 0, image = 1, kg = 2 };

struct ModalitySet {
    bool text = true;
    bool image = true;
    bool kg = true;

    bool active(Modality m) const {
        switch (m) {
            case Modality::text: return text;
            case Modality::image: return image;
            case Modality::kg: return kg;
        }
        return false;
    }
    std::size_t count() const {
        return static_cast<std::size_t>(text) + static_cast<std::size_t>(image) +
               static_cast<std::size_t>(kg);
    }
};

const char* modality_name(Modality m);

struct FusionDims {
    std::size_t text = 0;
    std::size_t image = 0;
    std::size_t kg = 0;
    std::size_t proj = 512;  // D_p

    std::size_t input_width(Modality m) const {
        switch (m) {
            case Modality::text: return text;
            case Modality::image: return image;
            case Modality::kg: return kg;
        }
        return 0;
    }
};

// Batch-norm running statistics per active modality. Trainable weights live
// in the ParamStore under "bn_<mod>.*", "proj_<mod>.*", "atten.*".
struct FusionState {
    FusionDims dims;
    ModalitySet active;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
    BnStats bn[3];
};

// Registers fusion parameters (Glorot-uniform projections, unit-gain
// batch norm, shared attention affine) and sizes the running stats.
void init_fusion(ParamStore& params, FusionState& state, const FusionDims& dims,
                 const ModalitySet& active, Rng& rng);

// Registers "<name>.w" (Glorot) and "<name>.b" (zeros).
void add_linear_params(ParamStore& params, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng);

struct FusionVars {
    Var h[3];      // projected features per modality (invalid when inactive)
    Var gate[3];   // attention gates in (0,1)
    Var fused;     // B x D_p
};

// batchnorm (train or eval) + projection for each active modality.
// Train mode requires batch >= 2 (batchnorm_train throws otherwise).
void project_modalities(Tape& tape, BoundParams& params, FusionState& state,
                        const Tensor* inputs[3], bool train_mode, FusionVars& out);

// Shared attention gates + weighted-sum fusion over the active modalities.
void attend_and_fuse(Tape& tape, BoundParams& params, FusionVars& vars);

// L_atten over the scalarized KG gate: mean over D_p of A^K per sample,
// then -sum_i log(1 - min(|a_i - pseudo_i|, 1 - 1e-6)). Gradient reaches the
// attention affine only through A^K.
Var attention_teacher_loss(Tape& tape, Var kg_gate, const Tensor& pseudo_labels);

// Parameter names that exist for a given active set (fusion only).
std::vector<std::string> fusion_param_names(const ModalitySet& active);

}  // namespace kgmc
