#pragma once
// KG modality feature per sample: look up the sample's director/cast
// entities, sum their embedding rows (zero vector when nothing matches),
// and derive the attention-teacher pseudo-label from entity counts and
// degrees relative to the corpus means.

#include "kgmc/kg.hpp"
#include "kgmc/tensor.hpp"

#include <cstdint>
#include <vector>

namespace kgmc {

struct EntityMatch {
    std::vector<std::uint32_t> indices;  // matched directors first, then casts
    std::size_t n_directors = 0;         // matched director count
    std::size_t n_casts = 0;             // matched cast count
    std::uint64_t degree_sum = 0;        // sum of KG degrees over matches
};

// Unseen names are dropped (normal at test time).
EntityMatch collect_entities(const MetadataRecord& rec, const DomainKg& kg);

struct KgFeature {
    std::vector<double> values;  // length D_k
    bool present = false;        // false iff no entity matched (zero vector)
};

KgFeature form_kg_feature(const EntityMatch& match, const Tensor& mat_e);

// (N*S) / ((N + mean_dc) * (S + mean_V)) with N the matched entity count and
// S the degree sum. A zero corpus mean degenerates its factor to N>0 ? 1 : 0
// (resp. S), keeping the value defined and monotone.
double pseudo_label(const EntityMatch& match, const CorpusStats& stats);

}  // namespace kgmc
