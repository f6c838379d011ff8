#pragma once
// Stage-2 training: classifier head, total-loss assembly (BCE + attention
// teacher + contrastive, unit weights), the optimizer loop over fusion,
// contrastive affine and classifier parameters (embeddings stay frozen),
// checkpointing, and thresholded prediction.

#include "kgmc/fusion.hpp"
#include "kgmc/gcacl.hpp"
#include "kgmc/kgfeature.hpp"
#include "kgmc/metrics.hpp"
#include "kgmc/util/io.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kgmc {

struct TrainConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    OptimConfig::Kind optimizer = OptimConfig::Kind::adamw;
    double weight_decay = 0.01;
    double tau = 0.1;
    bool use_atten = true;
    bool use_contra = true;
    ModalitySet modalities{};
    GenreInit genre_init = GenreInit::kg;
    std::uint64_t seed = 42;
    double threshold = 0.5;
    std::size_t d_proj = 512;
};

struct Sample {
    std::string id;
    Split split = Split::train;
    std::vector<double> text;
    std::vector<double> image;
    std::vector<double> kg;  // F^K, zero vector when nothing matched
    bool kg_present = false;
    double pseudo = 0.0;
    std::size_t n_matched = 0;
    std::uint64_t degree_sum = 0;
    GenreSet genres;  // indices into the train vocabulary
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> vocab;  // sorted unique train genres
    CorpusStats stats;
    std::size_t d_text = 0, d_image = 0, d_kg = 0;
    std::array<std::vector<std::size_t>, 3> by_split;  // indexed by Split

    const std::vector<std::size_t>& split_indices(Split s) const {
        return by_split[static_cast<std::size_t>(s)];
    }
    std::size_t genre_index(const std::string& name) const;  // throws if unknown
};

// Joins metadata with the two feature files and the KG/embedding artifacts:
// computes per-sample F^K, pseudo-labels (cached on the sample) and label
// vectors. Every metadata id must have a row in both feature files. At eval
// time the training vocabulary and corpus stats are passed in from the
// checkpoint; by default both are derived from the train split.
Dataset assemble_dataset(const std::vector<MetadataRecord>& records,
                         const io::FeatureFile& text_features,
                         const io::FeatureFile& image_features, const DomainKg& kg,
                         const Tensor& mat_e,
                         const std::vector<std::string>* vocab_override = nullptr,
                         const CorpusStats* stats_override = nullptr);

struct StepLosses {
    double classification = 0.0;
    double attention = 0.0;
    double contrastive = 0.0;
    double total = 0.0;
};

struct EpochReport {
    StepLosses mean;     // per-pair means over the epoch's batches
    std::size_t steps = 0;
};

struct LoadedModel;

class StageTwoModel {
public:
    // Genre rows: taken from mat_e (vocab order) when genre_init is kg,
    // otherwise drawn at random from the model seed. Width D_k must match
    // the dataset.
    StageTwoModel(const TrainConfig& cfg, const Dataset& data, Tensor genre_rows);

    // One optimizer step on one batch (train-mode batch norm; batch >= 2).
    StepLosses train_step(const Dataset& data, const std::vector<std::size_t>& batch);

    // Full loop: shuffles train indices each epoch, drops a trailing batch
    // of size 1. Throws on non-finite loss naming the component.
    std::vector<EpochReport> fit(const Dataset& data);

    // Eval-mode probabilities, samples in `idx` order ([n x M]).
    Tensor predict_probs(const Dataset& data, const std::vector<std::size_t>& idx);
    std::vector<GenreSet> predict_labels(const Dataset& data, const std::vector<std::size_t>& idx,
                                         double threshold);

    // Mean over idx of |mean(A^K) - pseudo| in eval mode (KG must be active).
    double mean_gate_error(const Dataset& data, const std::vector<std::size_t>& idx);

    // Mean per-dimension KG gate in eval mode, sample-averaged over idx.
    double mean_kg_gate(const Dataset& data, const std::vector<std::size_t>& idx);

    void save(const std::filesystem::path& path, const std::string& kg_manifest_hash,
              const std::string& kge_manifest_hash, const CorpusStats& stats) const;
    static LoadedModel load(const std::filesystem::path& path);

    const TrainConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const GenreSpace& genre_space() const { return genres_; }
    std::size_t n_genres() const { return n_genres_; }

private:
    StageTwoModel() = default;
    struct Forward {
        FusionVars fusion;
        Var probs;
    };
    Forward forward(Tape& tape, BoundParams& bound, const Dataset& data,
                    const std::vector<std::size_t>& idx, bool train_mode);

    TrainConfig cfg_;
    ParamStore params_;
    FusionState fusion_;
    GenreSpace genres_;
    std::size_t n_genres_ = 0;
    std::vector<std::string> vocab_;
    Rng shuffle_rng_{0};
};

struct LoadedModel {
    StageTwoModel model;
    std::string kg_manifest_hash;
    std::string kge_manifest_hash;
    std::vector<std::string> vocab;
    CorpusStats stats;
};

// Thresholded label sets from a probability matrix.
std::vector<GenreSet> threshold_labels(const Tensor& probs, double threshold);

}  // namespace kgmc
