#pragma once
// Multi-label F1 in the four reported averaging modes.

#include <cstddef>
#include <string>
#include <vector>

namespace kgmc {

struct GenreScore {
    std::size_t tp = 0, fp = 0, fn = 0;
    std::size_t support = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    double samples_f1 = 0.0;
    std::vector<GenreScore> per_genre;

    std::string to_json() const;
};

using LabelSet = std::vector<std::size_t>;  // genre indices, each < M

// Conventions: per-genre F1 is 0 when undefined (zero_division=0); weighted
// mean skips zero-support genres (weight 0); a sample with empty prediction
// and empty truth scores 1, empty prediction against nonempty truth 0.
MetricsReport f1_report(const std::vector<LabelSet>& predicted,
                        const std::vector<LabelSet>& truth, std::size_t n_genres);

}  // namespace kgmc
