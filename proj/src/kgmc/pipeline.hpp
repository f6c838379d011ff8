#pragma once
// Command implementations shared by the CLI and the acceptance suite.
// Each stage writes its artifacts atomically plus a manifest carrying
// content hashes; downstream stages refuse inputs whose hashes do not chain.

#include "kgmc/kge.hpp"
#include "kgmc/synth.hpp"
#include "kgmc/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace kgmc::pipeline {

using json = nlohmann::json;

// synth: corpus + manifest under out_dir.
json run_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir);

// build-kg: entities.jsonl + triples.bin + manifest.json under out_dir.
json run_build_kg(const std::filesystem::path& metadata_path,
                  const std::filesystem::path& out_dir);

// Accepts the KG directory or its manifest path; verifies file hashes.
struct LoadedKg {
    DomainKg kg;
    std::string manifest_hash;          // hash of manifest.json bytes
    std::string source_metadata_hash;   // recorded at build time
};
LoadedKg load_kg_artifacts(const std::filesystem::path& kg_path);

// train-kge: embedding checkpoint directory.
json run_train_kge(const std::filesystem::path& kg_path, const KgeConfig& cfg,
                   const std::filesystem::path& out_dir);

// eval-kge over the checkpoint's holdout (or an explicit KGT1 triple file).
json run_eval_kge(const std::filesystem::path& kge_dir, const std::filesystem::path& kg_path,
                  std::size_t k, bool filtered,
                  const std::optional<std::filesystem::path>& triples_path);

struct DataPaths {
    std::filesystem::path metadata;
    std::filesystem::path text_features;
    std::filesystem::path image_features;
};

// stage-2 train: model checkpoint file (+ optional pseudo-label cache).
json run_train(const DataPaths& data_paths, const std::filesystem::path& kg_path,
               const std::filesystem::path& kge_dir, const TrainConfig& cfg,
               const std::filesystem::path& ckpt_out,
               const std::optional<std::filesystem::path>& pseudo_cache_out);

// eval: metrics JSON (the returned object is exactly the report schema).
struct EvalExtras {
    double empty_kg_fraction = 0.0;     // samples in split with empty K_i
    double mean_gate_empty = 0.0;       // mean KG gate over those samples
    double mean_gate_error = 0.0;       // mean |a - pseudo| over the split
    bool kg_active = false;
};
json run_eval(const std::filesystem::path& ckpt_path, const DataPaths& data_paths,
              const std::filesystem::path& kg_path, const std::filesystem::path& kge_dir,
              Split split, std::optional<double> threshold, EvalExtras* extras = nullptr);

// predict: JSON Lines {id, genres:[names]} written to out_path.
json run_predict(const std::filesystem::path& ckpt_path, const DataPaths& data_paths,
                 const std::filesystem::path& kg_path, const std::filesystem::path& kge_dir,
                 Split split, std::optional<double> threshold,
                 const std::filesystem::path& out_path);

// Shared helper: genre embedding rows for the stage-2 contrastive head,
// either looked up from the trained entity matrix or drawn at random.
Tensor make_genre_rows(const std::vector<std::string>& vocab, const DomainKg& kg,
                       const Tensor& mat_e, GenreInit init, std::uint64_t seed);

}  // namespace kgmc::pipeline
