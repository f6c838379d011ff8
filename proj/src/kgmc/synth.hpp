#pragma once
// Deterministic synthetic corpus generator. Personnel are drawn from latent
// genre-affinity pools (with probability kg_signal), so the KG carries a
// plantable amount of genre signal; text/image features are noisy mixtures
// of per-genre prototype vectors. A configurable fraction of test movies
// gets entirely fresh personnel to exercise the zero-vector KG-feature path.

#include "kgmc/metadata.hpp"
#include "kgmc/util/io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kgmc {

struct SynthConfig {
    std::size_t n_movies = 500;
    std::size_t n_genres = 8;
    std::size_t n_directors = 60;
    std::size_t n_casts = 200;
    std::size_t d_text = 64;
    std::size_t d_image = 64;
    double kg_signal = 0.9;   // P(person drawn from an affinity pool of the movie's genres)
    double feat_noise = 0.8;  // isotropic noise scale on prototype mixtures
    double train_frac = 0.6;
    double test_frac = 0.3;
    double valid_frac = 0.1;
    double unseen_frac = 0.15;  // fraction of test movies given fresh personnel
    std::uint64_t seed = 42;
};

struct SynthCorpus {
    std::vector<MetadataRecord> records;
    io::FeatureFile text_features;
    io::FeatureFile image_features;
    std::vector<std::string> genre_names;
    double realized_unseen_fraction = 0.0;  // test movies with no train personnel
};

SynthCorpus generate_corpus(const SynthConfig& cfg);

struct SynthPaths {
    std::filesystem::path metadata;
    std::filesystem::path text_features;
    std::filesystem::path image_features;
    std::filesystem::path manifest;
};

// Writes metadata.jsonl, text.feat, image.feat and manifest.json under dir.
SynthPaths write_corpus(const SynthCorpus& corpus, const SynthConfig& cfg,
                        const std::filesystem::path& dir);

}  // namespace kgmc
