#pragma once
// Translate-model embeddings over the domain KG: TransE / TransH / TransR /
// RotatE scoring, uniform negative sampling, margin-ranking SGD training,
// and filtered link-prediction evaluation. Gradients are hand-derived per
// model and verified against central differences in the tests.

#include "kgmc/kg.hpp"
#include "kgmc/tensor.hpp"
#include "kgmc/util/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgmc {

enum class KgeModelKind { transe, transh, transr, rotate };

const char* kge_model_name(KgeModelKind k);
KgeModelKind kge_model_from_string(const std::string& s);

struct KgeConfig {
    KgeModelKind model = KgeModelKind::transe;
    std::size_t dim = 200;       // D_k
    std::size_t epochs = 500;
    std::size_t batch_size = 100;
    double lr = 0.5;             // SGD
    double margin = 1.0;
    std::size_t negatives = 1;
    std::uint64_t seed = 42;
    double holdout_frac = 0.0;   // fraction of triples held out of training
};

struct KgeModel {
    KgeModelKind kind = KgeModelKind::transe;
    std::size_t dim = 0;          // entity row width in reals (even for rotate)
    Tensor entities;              // N x dim (Mat_e)
    Tensor relations;             // 6 x dim; rotate: 6 x dim/2 phases
    Tensor hyperplanes;           // transh: 6 x dim unit normals
    Tensor projections;           // transr: 6 x (dim*dim), row-major per relation

    // Distance-style score; lower means more plausible. Non-negative for
    // all four models.
    double score(std::uint32_t head, RelationKind rel, std::uint32_t tail) const;
    double score(const Triple& t) const { return score(t.head, t.relation, t.tail); }
};

KgeModel init_kge_model(KgeModelKind kind, std::size_t n_entities, std::size_t dim, Rng& rng);

// Sparse gradient accumulator for one minibatch.
struct KgeGrads {
    std::unordered_map<std::uint32_t, std::vector<double>> entities;
    std::unordered_map<std::uint32_t, std::vector<double>> relations;
    std::unordered_map<std::uint32_t, std::vector<double>> hyperplanes;
    std::unordered_map<std::uint32_t, std::vector<double>> projections;
    void clear();
};

// Adds scale * d(score)/d(params) into `grads` and returns the score.
double score_and_grad(const KgeModel& model, std::uint32_t head, RelationKind rel,
                      std::uint32_t tail, double scale, KgeGrads* grads);

struct Corruption {
    Triple triple;
    bool collision = false;  // could not avoid a known triple within the cap
};

// Replaces head or tail (fair coin) with a uniform same-kind entity,
// resampling up to 100 times while the result is a known triple.
Corruption corrupt_triple(const DomainKg& kg, const Triple& triple, Rng& rng);

struct KgeTrainResult {
    KgeModel model;
    std::vector<Triple> holdout;       // empty unless holdout_frac > 0
    std::vector<double> epoch_losses;  // mean hinge loss per epoch
};

// Margin-ranking training over the KG triples (minus holdout) with uniform
// corruption and per-epoch renormalization of entity rows (and TransH
// normals) to unit L2 norm. Throws on a non-finite epoch loss.
KgeTrainResult train_embeddings(const DomainKg& kg, const KgeConfig& cfg, Rng& rng);

struct LinkPredReport {
    double hits_at_k = 0.0;
    double mrr = 0.0;
    std::size_t n_queries = 0;
};

// Ranks the true tail and true head of each test triple against all
// same-kind entities (lower score ranks first; rank = 1 + number of
// strictly better candidates). Filtered mode drops candidates that form a
// known triple (training KG plus the test list itself).
LinkPredReport eval_link_prediction(const DomainKg& kg, const KgeModel& model,
                                    const std::vector<Triple>& test_triples, std::size_t k,
                                    bool filtered);

// Checkpoint directory: entities.jsonl, mat_e.tns, relations.tns, model
// extras, holdout.bin (if any) and manifest.json.
void save_kge(const std::filesystem::path& dir, const KgeModel& model, const KgeConfig& cfg,
              const DomainKg& kg, const std::vector<Triple>& holdout,
              const std::string& kg_manifest_hash);
struct KgeCheckpoint {
    KgeModel model;
    KgeConfig config;
    std::vector<Triple> holdout;
    std::string kg_manifest_hash;
    std::string manifest_hash;  // hash of manifest.json bytes
};
KgeCheckpoint load_kge(const std::filesystem::path& dir);

}  // namespace kgmc
