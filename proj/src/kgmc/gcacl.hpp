#pragma once
// Genre-centroid anchored contrastive learning. The positive anchor for each
// sample is the centroid of its genre embedding rows; negatives are the
// batch union of genres minus the sample's own set. A single learned affine
// maps both centroids and genre rows to the fused-feature width before the
// dot-product similarity.

#include "kgmc/binding.hpp"
#include "kgmc/tape.hpp"
#include "kgmc/tensor.hpp"
#include "kgmc/util/rng.hpp"

#include <cstddef>
#include <vector>

namespace kgmc {

enum class GenreInit { kg, random };

const char* genre_init_name(GenreInit g);
GenreInit genre_init_from_string(const std::string& s);

struct GenreSpace {
    Tensor rows;       // M x D_k, frozen during stage-2 training
    double tau = 0.1;  // temperature
};

using GenreSet = std::vector<std::size_t>;  // sorted unique genre indices

// Arithmetic mean of the sample's genre rows. Throws on an empty set.
std::vector<double> genre_centroid(const GenreSet& genres, const Tensor& rows);

struct BatchNegatives {
    std::vector<std::size_t> batch_union;   // sorted unique genres in the batch
    std::vector<GenreSet> negatives;        // per sample: union minus own set
    std::vector<std::vector<int>> union_positions;  // same sets as positions into batch_union
};

BatchNegatives batch_negatives(const std::vector<GenreSet>& genre_sets);

// Builds the contrastive loss node. `fused` is [B x D_p]; the affine
// ("gcacl.w"/"gcacl.b") maps D_k -> D_p and is shared between centroids and
// negatives. Genre rows enter as frozen leaves.
Var gcacl_loss(Tape& tape, BoundParams& params, Var fused,
               const std::vector<GenreSet>& genre_sets, const GenreSpace& space);

}  // namespace kgmc
