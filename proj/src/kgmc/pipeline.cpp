#include "kgmc/pipeline.hpp"

#include "kgmc/util/io.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace kgmc::pipeline {

namespace fs = std::filesystem;

json run_synth(const SynthConfig& cfg, const fs::path& out_dir) {
    const SynthCorpus corpus = generate_corpus(cfg);
    const SynthPaths paths = write_corpus(corpus, cfg, out_dir);
    json summary;
    summary["command"] = "synth";
    summary["out_dir"] = out_dir.string();
    summary["n_movies"] = corpus.records.size();
    summary["n_genres"] = corpus.genre_names.size();
    summary["realized_unseen_fraction"] = corpus.realized_unseen_fraction;
    summary["manifest"] = paths.manifest.string();
    summary["manifest_hash"] = io::file_hash(paths.manifest);
    return summary;
}

json run_build_kg(const fs::path& metadata_path, const fs::path& out_dir) {
    const auto records = parse_metadata_file(metadata_path.string());
    const DomainKg kg = build_kg(records);
    fs::create_directories(out_dir);
    write_kg_entities(out_dir / "entities.jsonl", kg);
    write_kg_triples(out_dir / "triples.bin", kg);

    json manifest;
    manifest["files"] = {{"entities.jsonl", io::file_hash(out_dir / "entities.jsonl")},
                         {"triples.bin", io::file_hash(out_dir / "triples.bin")}};
    manifest["counts"] = {{"entities", kg.entity_count()}, {"triples", kg.triple_count()}};
    manifest["source_metadata_hash"] = io::file_hash(metadata_path);
    manifest["empty"] = kg.triple_count() == 0;
    std::size_t n_train = 0;
    for (const auto& r : records)
        if (r.split == Split::train) ++n_train;
    if (n_train > 0) {
        const CorpusStats stats = corpus_stats(records, kg);
        manifest["stats"] = {{"n_train", stats.n_train},
                             {"mean_dc", stats.mean_dc},
                             {"mean_degree_sum", stats.mean_degree_sum}};
    }
    io::atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");

    json summary;
    summary["command"] = "build-kg";
    summary["out_dir"] = out_dir.string();
    summary["entities"] = kg.entity_count();
    summary["triples"] = kg.triple_count();
    summary["empty"] = kg.triple_count() == 0;
    summary["manifest_hash"] = io::file_hash(out_dir / "manifest.json");
    return summary;
}

LoadedKg load_kg_artifacts(const fs::path& kg_path) {
    fs::path manifest_path = kg_path;
    if (fs::is_directory(kg_path)) manifest_path = kg_path / "manifest.json";
    if (!fs::exists(manifest_path))
        throw std::runtime_error("KG manifest not found: " + manifest_path.string());
    const fs::path dir = manifest_path.parent_path();
    const std::string bytes = io::read_file(manifest_path);
    const json manifest = json::parse(bytes);
    for (const auto& [name, hash] : manifest.at("files").items()) {
        const std::string actual = io::file_hash(dir / name);
        if (actual != hash.get<std::string>())
            throw std::runtime_error("KG artifact hash mismatch for " + (dir / name).string());
    }
    LoadedKg out{load_kg(dir / "entities.jsonl", dir / "triples.bin"), io::fnv1a_hex(bytes),
                 manifest.at("source_metadata_hash").get<std::string>()};
    return out;
}

json run_train_kge(const fs::path& kg_path, const KgeConfig& cfg, const fs::path& out_dir) {
    const LoadedKg loaded = load_kg_artifacts(kg_path);
    Rng rng(cfg.seed);
    const KgeTrainResult result = train_embeddings(loaded.kg, cfg, rng);
    save_kge(out_dir, result.model, cfg, loaded.kg, result.holdout, loaded.manifest_hash);

    json summary;
    summary["command"] = "train-kge";
    summary["model"] = kge_model_name(cfg.model);
    summary["dim"] = cfg.dim;
    summary["epochs"] = cfg.epochs;
    summary["out_dir"] = out_dir.string();
    summary["final_epoch_loss"] =
        result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back();
    summary["holdout_triples"] = result.holdout.size();
    summary["manifest_hash"] = io::file_hash(out_dir / "manifest.json");
    return summary;
}

json run_eval_kge(const fs::path& kge_dir, const fs::path& kg_path, std::size_t k, bool filtered,
                  const std::optional<fs::path>& triples_path) {
    const LoadedKg loaded = load_kg_artifacts(kg_path);
    const KgeCheckpoint ckpt = load_kge(kge_dir);
    if (ckpt.kg_manifest_hash != loaded.manifest_hash)
        throw std::runtime_error("embedding checkpoint was trained against a different KG (hash " +
                                 ckpt.kg_manifest_hash + " != " + loaded.manifest_hash + ")");
    std::vector<Triple> test = ckpt.holdout;
    if (triples_path) {
        const std::string data = io::read_file(*triples_path);
        io::ByteReader r(data, triples_path->string());
        r.expect_magic("KGT1");
        const std::uint32_t count = r.u32();
        test.clear();
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint32_t h = r.u32();
            const std::uint8_t rel = r.u8();
            const std::uint32_t t = r.u32();
            test.push_back(Triple{h, static_cast<RelationKind>(rel), t});
        }
    }
    if (test.empty())
        throw std::runtime_error(
            "eval-kge: no test triples (checkpoint has no holdout; pass --triples)");
    const LinkPredReport rep = eval_link_prediction(loaded.kg, ckpt.model, test, k, filtered);

    json summary;
    summary["command"] = "eval-kge";
    summary["model"] = kge_model_name(ckpt.model.kind);
    summary["k"] = k;
    summary["filtered"] = filtered;
    summary["hits_at_k"] = rep.hits_at_k;
    summary["mrr"] = rep.mrr;
    summary["n_queries"] = rep.n_queries;
    return summary;
}

Tensor make_genre_rows(const std::vector<std::string>& vocab, const DomainKg& kg,
                       const Tensor& mat_e, GenreInit init, std::uint64_t seed) {
    const std::size_t dk = mat_e.cols();
    Tensor rows({vocab.size(), dk});
    if (init == GenreInit::random) {
        Rng rng(seed ^ 0x67656e7265ULL);
        const double bound = 6.0 / std::sqrt(static_cast<double>(dk));
        for (double& v : rows.v) v = rng.uniform(-bound, bound);
        for (std::size_t g = 0; g < rows.rows(); ++g) {
            double n2 = 0.0;
            for (std::size_t d = 0; d < dk; ++d) n2 += rows.at(g, d) * rows.at(g, d);
            if (n2 > 0.0)
                for (std::size_t d = 0; d < dk; ++d) rows.at(g, d) /= std::sqrt(n2);
        }
        return rows;
    }
    for (std::size_t g = 0; g < vocab.size(); ++g) {
        const auto idx = kg.find(EntityKind::genre, vocab[g]);
        if (!idx)
            throw std::runtime_error("genre '" + vocab[g] + "' has no entity in the KG");
        const double* row = mat_e.row(*idx);
        std::copy(row, row + dk, rows.row(g));
    }
    return rows;
}

namespace {

struct Loaded {
    std::vector<MetadataRecord> records;
    io::FeatureFile text;
    io::FeatureFile image;
};

Loaded load_data(const DataPaths& paths) {
    Loaded out;
    out.records = parse_metadata_file(paths.metadata.string());
    out.text = io::read_features(paths.text_features);
    out.image = io::read_features(paths.image_features);
    return out;
}

}  // namespace

json run_train(const DataPaths& data_paths, const fs::path& kg_path, const fs::path& kge_dir,
               const TrainConfig& cfg, const fs::path& ckpt_out,
               const std::optional<fs::path>& pseudo_cache_out) {
    const LoadedKg kg = load_kg_artifacts(kg_path);
    const std::string metadata_hash = io::file_hash(data_paths.metadata);
    if (kg.source_metadata_hash != metadata_hash)
        throw std::runtime_error("KG was built from different metadata (hash " +
                                 kg.source_metadata_hash + " != " + metadata_hash + ")");
    const KgeCheckpoint kge = load_kge(kge_dir);
    if (kge.kg_manifest_hash != kg.manifest_hash)
        throw std::runtime_error("embedding checkpoint was trained against a different KG");
    const std::string kge_manifest_hash = io::file_hash(kge_dir / "manifest.json");

    Loaded data_files = load_data(data_paths);
    const Dataset data = assemble_dataset(data_files.records, data_files.text, data_files.image,
                                          kg.kg, kge.model.entities);

    Tensor genre_rows;
    if (cfg.use_contra)
        genre_rows = make_genre_rows(data.vocab, kg.kg, kge.model.entities, cfg.genre_init,
                                     cfg.seed);
    StageTwoModel model(cfg, data, std::move(genre_rows));
    const std::vector<EpochReport> reports = model.fit(data);
    for (std::size_t e = 0; e < reports.size(); ++e)
        std::cerr << "epoch " << (e + 1) << "/" << reports.size()
                  << " loss=" << reports[e].mean.total
                  << " class=" << reports[e].mean.classification
                  << " atten=" << reports[e].mean.attention
                  << " contra=" << reports[e].mean.contrastive << "\n";

    model.save(ckpt_out, kg.manifest_hash, kge_manifest_hash, data.stats);

    if (pseudo_cache_out) {
        std::string cache;
        for (const Sample& s : data.samples) {
            json line;
            line["movie_id"] = s.id;
            line["pseudo_label"] = s.pseudo;
            line["n_matched"] = s.n_matched;
            line["degree_sum"] = s.degree_sum;
            cache += line.dump();
            cache += '\n';
        }
        io::atomic_write(*pseudo_cache_out, cache);
    }

    json summary;
    summary["command"] = "train";
    summary["checkpoint"] = ckpt_out.string();
    summary["checkpoint_hash"] = io::file_hash(ckpt_out);
    summary["epochs"] = reports.size();
    summary["n_genres"] = data.vocab.size();
    summary["train_samples"] = data.split_indices(Split::train).size();
    if (!reports.empty()) {
        summary["final_loss"] = {{"total", reports.back().mean.total},
                                 {"classification", reports.back().mean.classification},
                                 {"attention", reports.back().mean.attention},
                                 {"contrastive", reports.back().mean.contrastive}};
    }
    return summary;
}

namespace {

struct EvalSetup {
    LoadedModel loaded;
    Dataset data;
};

EvalSetup prepare_eval(const fs::path& ckpt_path, const DataPaths& data_paths,
                       const fs::path& kg_path, const fs::path& kge_dir) {
    LoadedModel loaded = StageTwoModel::load(ckpt_path);
    const LoadedKg kg = load_kg_artifacts(kg_path);
    if (loaded.kg_manifest_hash != kg.manifest_hash)
        throw std::runtime_error("checkpoint was trained against a different KG (manifest hash " +
                                 loaded.kg_manifest_hash + " != " + kg.manifest_hash + ")");
    const std::string kge_hash = io::file_hash(kge_dir / "manifest.json");
    if (loaded.kge_manifest_hash != kge_hash)
        throw std::runtime_error(
            "checkpoint was trained against different embeddings (manifest hash " +
            loaded.kge_manifest_hash + " != " + kge_hash + ")");
    const KgeCheckpoint kge = load_kge(kge_dir);

    Loaded data_files = load_data(data_paths);
    Dataset data = assemble_dataset(data_files.records, data_files.text, data_files.image, kg.kg,
                                    kge.model.entities, &loaded.vocab, &loaded.stats);
    return EvalSetup{std::move(loaded), std::move(data)};
}

}  // namespace

json run_eval(const fs::path& ckpt_path, const DataPaths& data_paths, const fs::path& kg_path,
              const fs::path& kge_dir, Split split, std::optional<double> threshold,
              EvalExtras* extras) {
    EvalSetup setup = prepare_eval(ckpt_path, data_paths, kg_path, kge_dir);
    const auto& idx = setup.data.split_indices(split);
    if (idx.empty())
        throw std::runtime_error(std::string("eval: no samples in split ") + split_name(split));

    StageTwoModel& model = setup.loaded.model;
    const double thr = threshold.value_or(model.config().threshold);
    const std::vector<GenreSet> pred = model.predict_labels(setup.data, idx, thr);
    std::vector<GenreSet> truth;
    truth.reserve(idx.size());
    for (std::size_t i : idx) truth.push_back(setup.data.samples[i].genres);
    const MetricsReport rep = f1_report(pred, truth, setup.data.vocab.size());

    if (extras != nullptr) {
        extras->kg_active = model.config().modalities.kg;
        std::vector<std::size_t> empty_idx;
        for (std::size_t i : idx)
            if (!setup.data.samples[i].kg_present) empty_idx.push_back(i);
        extras->empty_kg_fraction =
            static_cast<double>(empty_idx.size()) / static_cast<double>(idx.size());
        if (extras->kg_active) {
            extras->mean_gate_error = model.mean_gate_error(setup.data, idx);
            if (!empty_idx.empty())
                extras->mean_gate_empty = model.mean_kg_gate(setup.data, empty_idx);
        }
    }
    return json::parse(rep.to_json());
}

json run_predict(const fs::path& ckpt_path, const DataPaths& data_paths, const fs::path& kg_path,
                 const fs::path& kge_dir, Split split, std::optional<double> threshold,
                 const fs::path& out_path) {
    EvalSetup setup = prepare_eval(ckpt_path, data_paths, kg_path, kge_dir);
    const auto& idx = setup.data.split_indices(split);
    if (idx.empty())
        throw std::runtime_error(std::string("predict: no samples in split ") +
                                 split_name(split));
    StageTwoModel& model = setup.loaded.model;
    const double thr = threshold.value_or(model.config().threshold);
    const std::vector<GenreSet> pred = model.predict_labels(setup.data, idx, thr);

    std::string out;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        json line;
        line["id"] = setup.data.samples[idx[r]].id;
        json names = json::array();
        for (std::size_t g : pred[r]) names.push_back(setup.data.vocab[g]);
        line["genres"] = names;
        out += line.dump();
        out += '\n';
    }
    io::atomic_write(out_path, out);

    json summary;
    summary["command"] = "predict";
    summary["out"] = out_path.string();
    summary["split"] = split_name(split);
    summary["n_samples"] = idx.size();
    summary["threshold"] = thr;
    return summary;
}

}  // namespace kgmc::pipeline
