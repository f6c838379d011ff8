// kgmc command-line interface: synth, build-kg, train-kge, eval-kge, train,
// eval, predict. Prints a one-line JSON summary on stdout on success; logs
// go to stderr. Exit codes: 0 success, 1 operational failure, 2 usage error.

#include "kgmc/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;

json load_config_file(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw std::runtime_error(std::string("cannot open config file: ") + argv[i + 1]);
            json j;
            in >> j;
            return j;
        }
    }
    return json::object();
}

template <typename T>
void from_config(const json& section, const char* key, T& target) {
    if (section.contains(key)) target = section.at(key).get<T>();
}

kgmc::ModalitySet parse_modalities(const std::string& spec) {
    kgmc::ModalitySet set;
    set.text = set.image = set.kg = false;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "text")
            set.text = true;
        else if (item == "image")
            set.image = true;
        else if (item == "kg")
            set.kg = true;
        else
            throw CLI::ValidationError("--modalities", "unknown modality '" + item + "'");
    }
    if (set.count() == 0) throw CLI::ValidationError("--modalities", "empty modality set");
    return set;
}

bool parse_on_off(const std::string& v, const char* flag) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw CLI::ValidationError(flag, "expected on|off");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph-grounded multimodal genre classification"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    json cfg_file;
    try {
        cfg_file = load_config_file(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    const json synth_cfg_json = cfg_file.value("synth", json::object());
    const json kge_cfg_json = cfg_file.value("kge", json::object());
    const json train_cfg_json = cfg_file.value("train", json::object());

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    kgmc::SynthConfig synth_cfg;
    from_config(synth_cfg_json, "n_movies", synth_cfg.n_movies);
    from_config(synth_cfg_json, "n_genres", synth_cfg.n_genres);
    from_config(synth_cfg_json, "n_directors", synth_cfg.n_directors);
    from_config(synth_cfg_json, "n_casts", synth_cfg.n_casts);
    from_config(synth_cfg_json, "d_text", synth_cfg.d_text);
    from_config(synth_cfg_json, "d_image", synth_cfg.d_image);
    from_config(synth_cfg_json, "kg_signal", synth_cfg.kg_signal);
    from_config(synth_cfg_json, "feat_noise", synth_cfg.feat_noise);
    from_config(synth_cfg_json, "unseen_frac", synth_cfg.unseen_frac);
    from_config(synth_cfg_json, "seed", synth_cfg.seed);
    std::string synth_out;
    synth->add_option("--out-dir", synth_out, "output directory")->required();
    synth->add_option("--n-movies", synth_cfg.n_movies, "number of movies");
    synth->add_option("--n-genres", synth_cfg.n_genres, "number of genres");
    synth->add_option("--n-directors", synth_cfg.n_directors, "director pool size");
    synth->add_option("--n-casts", synth_cfg.n_casts, "cast pool size");
    synth->add_option("--d-text", synth_cfg.d_text, "text feature width");
    synth->add_option("--d-image", synth_cfg.d_image, "image feature width");
    synth->add_option("--kg-signal", synth_cfg.kg_signal, "personnel/genre coupling in [0,1]");
    synth->add_option("--feat-noise", synth_cfg.feat_noise, "feature noise scale");
    synth->add_option("--train-frac", synth_cfg.train_frac, "train split fraction");
    synth->add_option("--test-frac", synth_cfg.test_frac, "test split fraction");
    synth->add_option("--valid-frac", synth_cfg.valid_frac, "validation split fraction");
    synth->add_option("--unseen-frac", synth_cfg.unseen_frac,
                      "fraction of test movies given personnel unseen in train");
    synth->add_option("--seed", synth_cfg.seed, "corpus seed");

    // --- build-kg ---
    auto* buildkg = app.add_subcommand("build-kg", "construct the domain KG from metadata");
    std::string bk_metadata, bk_out;
    buildkg->add_option("--metadata", bk_metadata, "metadata JSONL path")->required();
    buildkg->add_option("--out-dir", bk_out, "output directory")->required();

    // --- train-kge ---
    auto* trainkge = app.add_subcommand("train-kge", "train translate-model embeddings");
    kgmc::KgeConfig kge_cfg;
    from_config(kge_cfg_json, "dim", kge_cfg.dim);
    from_config(kge_cfg_json, "epochs", kge_cfg.epochs);
    from_config(kge_cfg_json, "batch_size", kge_cfg.batch_size);
    from_config(kge_cfg_json, "lr", kge_cfg.lr);
    from_config(kge_cfg_json, "margin", kge_cfg.margin);
    from_config(kge_cfg_json, "negatives", kge_cfg.negatives);
    from_config(kge_cfg_json, "seed", kge_cfg.seed);
    from_config(kge_cfg_json, "holdout_frac", kge_cfg.holdout_frac);
    std::string tk_kg, tk_out, tk_model = "transe";
    from_config(kge_cfg_json, "model", tk_model);
    trainkge->add_option("--kg", tk_kg, "KG directory or manifest path")->required();
    trainkge->add_option("--out-dir", tk_out, "checkpoint directory")->required();
    trainkge->add_option("--model", tk_model, "transe|transh|transr|rotate");
    trainkge->add_option("--dim", kge_cfg.dim, "embedding dimension");
    trainkge->add_option("--epochs", kge_cfg.epochs, "training epochs");
    trainkge->add_option("--batch-size", kge_cfg.batch_size, "minibatch size");
    trainkge->add_option("--lr", kge_cfg.lr, "SGD learning rate");
    trainkge->add_option("--margin", kge_cfg.margin, "ranking margin");
    trainkge->add_option("--negatives", kge_cfg.negatives, "negatives per positive");
    trainkge->add_option("--holdout-frac", kge_cfg.holdout_frac,
                         "triple fraction held out for link-prediction eval");
    trainkge->add_option("--seed", kge_cfg.seed, "training seed");

    // --- eval-kge ---
    auto* evalkge = app.add_subcommand("eval-kge", "link-prediction evaluation");
    std::string ek_kge, ek_kg, ek_triples;
    std::size_t ek_k = 10;
    bool ek_raw = false;
    evalkge->add_option("--kge", ek_kge, "embedding checkpoint directory")->required();
    evalkge->add_option("--kg", ek_kg, "KG directory or manifest path")->required();
    evalkge->add_option("--k", ek_k, "hits@K cutoff");
    evalkge->add_flag("--raw", ek_raw, "raw ranking (default is filtered)");
    evalkge->add_option("--triples", ek_triples, "explicit KGT1 test-triple file");

    // --- train ---
    auto* train = app.add_subcommand("train", "stage-2 training over fusion and classifier");
    kgmc::TrainConfig train_cfg;
    from_config(train_cfg_json, "epochs", train_cfg.epochs);
    from_config(train_cfg_json, "batch_size", train_cfg.batch_size);
    from_config(train_cfg_json, "lr", train_cfg.lr);
    from_config(train_cfg_json, "weight_decay", train_cfg.weight_decay);
    from_config(train_cfg_json, "tau", train_cfg.tau);
    from_config(train_cfg_json, "seed", train_cfg.seed);
    from_config(train_cfg_json, "threshold", train_cfg.threshold);
    from_config(train_cfg_json, "d_proj", train_cfg.d_proj);
    std::string tr_metadata, tr_text, tr_image, tr_kg, tr_kge, tr_out, tr_pseudo_cache;
    std::string tr_optimizer = "adamw", tr_atten = "on", tr_gcacl = "on", tr_genre_init = "kg";
    std::string tr_modalities = "text,image,kg";
    from_config(train_cfg_json, "optimizer", tr_optimizer);
    from_config(train_cfg_json, "atten", tr_atten);
    from_config(train_cfg_json, "gcacl", tr_gcacl);
    from_config(train_cfg_json, "genre_init", tr_genre_init);
    from_config(train_cfg_json, "modalities", tr_modalities);
    train->add_option("--metadata", tr_metadata, "metadata JSONL path")->required();
    train->add_option("--text-features", tr_text, "text FEAT file")->required();
    train->add_option("--image-features", tr_image, "image FEAT file")->required();
    train->add_option("--kg", tr_kg, "KG directory or manifest path")->required();
    train->add_option("--kge", tr_kge, "embedding checkpoint directory")->required();
    train->add_option("--out", tr_out, "model checkpoint output path")->required();
    train->add_option("--epochs", train_cfg.epochs, "training epochs");
    train->add_option("--batch-size", train_cfg.batch_size, "minibatch size (>= 2)");
    train->add_option("--lr", train_cfg.lr, "learning rate");
    train->add_option("--optimizer", tr_optimizer, "adamw|sgd");
    train->add_option("--weight-decay", train_cfg.weight_decay, "adamw weight decay");
    train->add_option("--tau", train_cfg.tau, "contrastive temperature");
    train->add_option("--atten", tr_atten, "attention-teacher loss on|off");
    train->add_option("--gcacl", tr_gcacl, "contrastive loss on|off");
    train->add_option("--genre-init", tr_genre_init, "genre anchor source kg|random");
    train->add_option("--modalities", tr_modalities, "comma list from {text,image,kg}");
    train->add_option("--d-proj", train_cfg.d_proj, "shared projection width");
    train->add_option("--threshold", train_cfg.threshold, "prediction threshold");
    train->add_option("--seed", train_cfg.seed, "training seed");
    train->add_option("--pseudo-cache", tr_pseudo_cache, "write pseudo-label cache JSONL here");

    // --- eval / predict ---
    auto add_eval_options = [](CLI::App* cmd, std::string& ckpt, std::string& metadata,
                               std::string& text, std::string& image, std::string& kg,
                               std::string& kge, std::string& split, double& threshold,
                               bool& has_threshold) {
        cmd->add_option("--ckpt", ckpt, "model checkpoint path")->required();
        cmd->add_option("--metadata", metadata, "metadata JSONL path")->required();
        cmd->add_option("--text-features", text, "text FEAT file")->required();
        cmd->add_option("--image-features", image, "image FEAT file")->required();
        cmd->add_option("--kg", kg, "KG directory or manifest path")->required();
        cmd->add_option("--kge", kge, "embedding checkpoint directory")->required();
        cmd->add_option("--split", split, "train|valid|test");
        cmd->add_option("--threshold", threshold, "prediction threshold")
            ->each([&has_threshold](const std::string&) { has_threshold = true; });
    };

    auto* eval = app.add_subcommand("eval", "compute F1 metrics on a split");
    std::string ev_ckpt, ev_metadata, ev_text, ev_image, ev_kg, ev_kge, ev_split = "test", ev_out;
    double ev_threshold = 0.5;
    bool ev_has_threshold = false;
    add_eval_options(eval, ev_ckpt, ev_metadata, ev_text, ev_image, ev_kg, ev_kge, ev_split,
                     ev_threshold, ev_has_threshold);
    eval->add_option("--out", ev_out, "also write the metrics JSON here");

    auto* predict = app.add_subcommand("predict", "write thresholded predictions");
    std::string pr_ckpt, pr_metadata, pr_text, pr_image, pr_kg, pr_kge, pr_split = "test", pr_out;
    double pr_threshold = 0.5;
    bool pr_has_threshold = false;
    add_eval_options(predict, pr_ckpt, pr_metadata, pr_text, pr_image, pr_kg, pr_kge, pr_split,
                     pr_threshold, pr_has_threshold);
    predict->add_option("--out", pr_out, "predictions JSONL output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exits 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        json summary;
        if (synth->parsed()) {
            summary = kgmc::pipeline::run_synth(synth_cfg, synth_out);
        } else if (buildkg->parsed()) {
            summary = kgmc::pipeline::run_build_kg(bk_metadata, bk_out);
        } else if (trainkge->parsed()) {
            kge_cfg.model = kgmc::kge_model_from_string(tk_model);
            summary = kgmc::pipeline::run_train_kge(tk_kg, kge_cfg, tk_out);
        } else if (evalkge->parsed()) {
            std::optional<std::filesystem::path> triples;
            if (!ek_triples.empty()) triples = ek_triples;
            summary = kgmc::pipeline::run_eval_kge(ek_kge, ek_kg, ek_k, !ek_raw, triples);
        } else if (train->parsed()) {
            train_cfg.optimizer = tr_optimizer == "sgd" ? kgmc::OptimConfig::Kind::sgd
                                                        : kgmc::OptimConfig::Kind::adamw;
            if (tr_optimizer != "sgd" && tr_optimizer != "adamw")
                throw std::runtime_error("--optimizer must be adamw or sgd");
            train_cfg.use_atten = parse_on_off(tr_atten, "--atten");
            train_cfg.use_contra = parse_on_off(tr_gcacl, "--gcacl");
            train_cfg.genre_init = kgmc::genre_init_from_string(tr_genre_init);
            train_cfg.modalities = parse_modalities(tr_modalities);
            std::optional<std::filesystem::path> cache;
            if (!tr_pseudo_cache.empty()) cache = tr_pseudo_cache;
            summary = kgmc::pipeline::run_train({tr_metadata, tr_text, tr_image}, tr_kg, tr_kge,
                                                train_cfg, tr_out, cache);
        } else if (eval->parsed()) {
            kgmc::pipeline::EvalExtras extras;
            summary = kgmc::pipeline::run_eval(
                ev_ckpt, {ev_metadata, ev_text, ev_image}, ev_kg, ev_kge,
                kgmc::split_from_string(ev_split),
                ev_has_threshold ? std::optional<double>(ev_threshold) : std::nullopt, &extras);
            std::cerr << "empty_kg_fraction=" << extras.empty_kg_fraction;
            if (extras.kg_active)
                std::cerr << " mean_gate_error=" << extras.mean_gate_error
                          << " mean_gate_on_empty=" << extras.mean_gate_empty;
            std::cerr << "\n";
            if (!ev_out.empty()) kgmc::io::atomic_write(ev_out, summary.dump() + "\n");
        } else if (predict->parsed()) {
            summary = kgmc::pipeline::run_predict(
                pr_ckpt, {pr_metadata, pr_text, pr_image}, pr_kg, pr_kge,
                kgmc::split_from_string(pr_split),
                pr_has_threshold ? std::optional<double>(pr_threshold) : std::nullopt, pr_out);
        }
        std::cout << summary.dump() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
