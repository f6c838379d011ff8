#pragma once
// Planted synthetic KG for link-prediction recoverability tests: 50
// directors and 50 genres in 10 clusters of 5. Each director links to 4 of
// its cluster's genres (training edges); the 5th is held out. A competent
// embedding places the held-out genre among the director's cluster, so
// filtered hits@10 should approach 1.0, against a 10/50 = 0.2 random
// baseline (50 same-kind candidates per query side).

#include "kgmc/kg.hpp"
#include "kgmc/util/rng.hpp"

#include <string>
#include <vector>

namespace testkit {

struct PlantedKg {
    kgmc::DomainKg kg;                 // training edges only
    std::vector<kgmc::Triple> holdout; // one per director
};

inline PlantedKg make_planted_kg(std::uint64_t seed, std::size_t n_per_kind = 50,
                                 std::size_t cluster_size = 5) {
    PlantedKg out;
    kgmc::Rng rng(seed);
    const std::size_t n_clusters = n_per_kind / cluster_size;
    std::vector<std::uint32_t> directors, genres;
    for (std::size_t i = 0; i < n_per_kind; ++i) {
        directors.push_back(out.kg.intern(kgmc::EntityKind::director, "d" + std::to_string(i)));
        genres.push_back(out.kg.intern(kgmc::EntityKind::genre, "g" + std::to_string(i)));
    }
    for (std::size_t d = 0; d < n_per_kind; ++d) {
        const std::size_t cluster = d % n_clusters;
        const std::size_t held = rng.below(cluster_size);
        for (std::size_t j = 0; j < cluster_size; ++j) {
            const kgmc::Triple t{directors[d], kgmc::RelationKind::director_genre,
                                 genres[cluster * cluster_size + j]};
            if (j == held)
                out.holdout.push_back(t);
            else
                out.kg.add_triple(t.head, t.relation, t.tail);
        }
    }
    return out;
}

}  // namespace testkit
