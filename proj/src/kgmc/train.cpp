#include "kgmc/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace kgmc {

using nlohmann::json;

std::size_t Dataset::genre_index(const std::string& name) const {
    const auto it = std::lower_bound(vocab.begin(), vocab.end(), name);
    if (it == vocab.end() || *it != name) throw std::runtime_error("unknown genre: " + name);
    return static_cast<std::size_t>(it - vocab.begin());
}

Dataset assemble_dataset(const std::vector<MetadataRecord>& records,
                         const io::FeatureFile& text_features,
                         const io::FeatureFile& image_features, const DomainKg& kg,
                         const Tensor& mat_e, const std::vector<std::string>* vocab_override,
                         const CorpusStats* stats_override) {
    Dataset data;
    data.d_text = text_features.dim;
    data.d_image = image_features.dim;
    data.d_kg = mat_e.cols();
    data.stats = stats_override ? *stats_override : corpus_stats(records, kg);

    if (vocab_override) {
        data.vocab = *vocab_override;
        if (!std::is_sorted(data.vocab.begin(), data.vocab.end()))
            throw std::runtime_error("assemble_dataset: vocabulary override must be sorted");
    } else {
        // vocabulary: sorted unique train-split genres
        for (const MetadataRecord& rec : records)
            if (rec.split == Split::train)
                data.vocab.insert(data.vocab.end(), rec.genres.begin(), rec.genres.end());
        std::sort(data.vocab.begin(), data.vocab.end());
        data.vocab.erase(std::unique(data.vocab.begin(), data.vocab.end()), data.vocab.end());
    }
    if (data.vocab.empty()) throw std::runtime_error("assemble_dataset: no train genres");

    std::unordered_map<std::string, std::size_t> text_idx, image_idx;
    for (std::size_t i = 0; i < text_features.ids.size(); ++i) text_idx[text_features.ids[i]] = i;
    for (std::size_t i = 0; i < image_features.ids.size(); ++i) image_idx[image_features.ids[i]] = i;

    for (const MetadataRecord& rec : records) {
        Sample s;
        s.id = rec.movie_id;
        s.split = rec.split;
        const auto ti = text_idx.find(rec.movie_id);
        if (ti == text_idx.end())
            throw std::runtime_error("no text feature row for movie id '" + rec.movie_id + "'");
        const auto ii = image_idx.find(rec.movie_id);
        if (ii == image_idx.end())
            throw std::runtime_error("no image feature row for movie id '" + rec.movie_id + "'");
        s.text = text_features.rows[ti->second];
        s.image = image_features.rows[ii->second];

        const EntityMatch match = collect_entities(rec, kg);
        const KgFeature f = form_kg_feature(match, mat_e);
        s.kg = f.values;
        s.kg_present = f.present;
        s.n_matched = match.n_directors + match.n_casts;
        s.degree_sum = match.degree_sum;
        s.pseudo = pseudo_label(match, data.stats);

        for (const std::string& g : rec.genres) {
            const auto it = std::lower_bound(data.vocab.begin(), data.vocab.end(), g);
            if (it != data.vocab.end() && *it == g)
                s.genres.push_back(static_cast<std::size_t>(it - data.vocab.begin()));
            // genres unseen in train are dropped (no classifier output exists)
        }
        std::sort(s.genres.begin(), s.genres.end());

        data.by_split[static_cast<std::size_t>(rec.split)].push_back(data.samples.size());
        data.samples.push_back(std::move(s));
    }
    return data;
}

namespace {
// separate stream so batch shuffling does not perturb init draws
constexpr std::uint64_t kShuffleSalt = 0xa02bdbf7bb3c0a7ULL;
}  // namespace

StageTwoModel::StageTwoModel(const TrainConfig& cfg, const Dataset& data, Tensor genre_rows)
    : cfg_(cfg), vocab_(data.vocab), shuffle_rng_(cfg.seed ^ kShuffleSalt) {
    n_genres_ = data.vocab.size();
    if (cfg.batch_size < 2) throw std::runtime_error("train: batch size must be >= 2");
    if (cfg.threshold <= 0.0 || cfg.threshold >= 1.0)
        throw std::runtime_error("train: threshold must be inside (0,1)");
    if (cfg.use_atten && !cfg.modalities.kg)
        throw std::runtime_error("train: attention teacher requires the kg modality");

    Rng rng(cfg.seed);
    FusionDims dims;
    dims.text = data.d_text;
    dims.image = data.d_image;
    dims.kg = data.d_kg;
    dims.proj = cfg.d_proj;
    init_fusion(params_, fusion_, dims, cfg.modalities, rng);
    add_linear_params(params_, "cls", cfg.d_proj, n_genres_, rng);
    if (cfg.use_contra) {
        if (genre_rows.rows() != n_genres_)
            throw std::runtime_error("train: genre row count does not match vocabulary");
        add_linear_params(params_, "gcacl", genre_rows.cols(), cfg.d_proj, rng);
        genres_.rows = std::move(genre_rows);
        genres_.tau = cfg.tau;
    }
}

StageTwoModel::Forward StageTwoModel::forward(Tape& tape, BoundParams& bound, const Dataset& data,
                                              const std::vector<std::size_t>& idx,
                                              bool train_mode) {
    const std::size_t B = idx.size();
    Tensor text({B, data.d_text}), image({B, data.d_image}), kgf({B, data.d_kg});
    for (std::size_t r = 0; r < B; ++r) {
        const Sample& s = data.samples[idx[r]];
        std::copy(s.text.begin(), s.text.end(), text.row(r));
        std::copy(s.image.begin(), s.image.end(), image.row(r));
        std::copy(s.kg.begin(), s.kg.end(), kgf.row(r));
    }
    const Tensor* inputs[3] = {&text, &image, &kgf};
    Forward fwd;
    project_modalities(tape, bound, fusion_, inputs, train_mode, fwd.fusion);
    attend_and_fuse(tape, bound, fwd.fusion);
    const Var logits = tape.affine(fwd.fusion.fused, bound.bind("cls.w"), bound.bind("cls.b"));
    fwd.probs = tape.sigmoid(logits);
    return fwd;
}

namespace {
Tensor batch_labels(const Dataset& data, const std::vector<std::size_t>& idx,
                    std::size_t n_genres) {
    Tensor labels({idx.size(), n_genres});
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t g : data.samples[idx[r]].genres) labels.at(r, g) = 1.0;
    return labels;
}

Tensor batch_pseudo(const Dataset& data, const std::vector<std::size_t>& idx) {
    Tensor pseudo({idx.size()});
    for (std::size_t r = 0; r < idx.size(); ++r) pseudo.v[r] = data.samples[idx[r]].pseudo;
    return pseudo;
}
}  // namespace

StepLosses StageTwoModel::train_step(const Dataset& data, const std::vector<std::size_t>& batch) {
    Tape tape;
    BoundParams bound(tape, params_);
    Forward fwd = forward(tape, bound, data, batch, /*train_mode=*/true);

    const Var l_class = tape.bce_loss(fwd.probs, batch_labels(data, batch, n_genres_));
    Var total = l_class;
    Var l_atten{}, l_contra{};
    if (cfg_.use_atten) {
        l_atten = attention_teacher_loss(tape, fwd.fusion.gate[static_cast<int>(Modality::kg)],
                                         batch_pseudo(data, batch));
        total = tape.add(total, l_atten);
    }
    if (cfg_.use_contra) {
        std::vector<GenreSet> genre_sets;
        genre_sets.reserve(batch.size());
        for (std::size_t i : batch) genre_sets.push_back(data.samples[i].genres);
        l_contra = gcacl_loss(tape, bound, fwd.fusion.fused, genre_sets, genres_);
        total = tape.add(total, l_contra);
    }

    StepLosses losses;
    losses.classification = tape.value(l_class).v[0];
    losses.attention = l_atten.valid() ? tape.value(l_atten).v[0] : 0.0;
    losses.contrastive = l_contra.valid() ? tape.value(l_contra).v[0] : 0.0;
    losses.total = tape.value(total).v[0];
    if (!std::isfinite(losses.total)) {
        std::string which = !std::isfinite(losses.classification) ? "classification"
                            : !std::isfinite(losses.attention)    ? "attention"
                                                                  : "contrastive";
        throw std::runtime_error("train_step: non-finite loss in " + which + " component");
    }

    tape.backward(total);
    OptimConfig opt;
    opt.kind = cfg_.optimizer;
    opt.lr = cfg_.lr;
    opt.weight_decay = cfg_.optimizer == OptimConfig::Kind::adamw ? cfg_.weight_decay : 0.0;
    params_.step(bound.grads(), opt);
    return losses;
}

std::vector<EpochReport> StageTwoModel::fit(const Dataset& data) {
    std::vector<std::size_t> train_idx = data.split_indices(Split::train);
    if (train_idx.size() < 2) throw std::runtime_error("fit: need at least 2 train samples");
    std::vector<EpochReport> reports;
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        shuffle_rng_.shuffle(train_idx);
        EpochReport rep;
        double sum_cls = 0, sum_att = 0, sum_con = 0, sum_tot = 0;
        std::size_t samples_seen = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg_.batch_size) {
            const std::size_t end = std::min(train_idx.size(), start + cfg_.batch_size);
            if (end - start < 2) break;  // batch norm needs >= 2; drop the leftover sample
            const std::vector<std::size_t> batch(train_idx.begin() + static_cast<std::ptrdiff_t>(start),
                                                 train_idx.begin() + static_cast<std::ptrdiff_t>(end));
            const StepLosses l = train_step(data, batch);
            sum_cls += l.classification;
            sum_att += l.attention;
            sum_con += l.contrastive;
            sum_tot += l.total;
            samples_seen += batch.size();
            ++rep.steps;
        }
        const double inv = samples_seen ? 1.0 / static_cast<double>(samples_seen) : 0.0;
        rep.mean.classification = sum_cls * inv;
        rep.mean.attention = sum_att * inv;
        rep.mean.contrastive = sum_con * inv;
        rep.mean.total = sum_tot * inv;
        reports.push_back(rep);
    }
    return reports;
}

Tensor StageTwoModel::predict_probs(const Dataset& data, const std::vector<std::size_t>& idx) {
    Tensor probs({idx.size(), n_genres_});
    for (std::size_t start = 0; start < idx.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(idx.size(), start + cfg_.batch_size);
        const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                             idx.begin() + static_cast<std::ptrdiff_t>(end));
        Tape tape;
        BoundParams bound(tape, params_);
        Forward fwd = forward(tape, bound, data, chunk, /*train_mode=*/false);
        const Tensor& p = tape.value(fwd.probs);
        for (std::size_t r = 0; r < chunk.size(); ++r)
            std::copy(p.row(r), p.row(r) + n_genres_, probs.row(start + r));
    }
    return probs;
}

std::vector<GenreSet> threshold_labels(const Tensor& probs, double threshold) {
    std::vector<GenreSet> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r)
        for (std::size_t g = 0; g < probs.cols(); ++g)
            if (probs.at(r, g) >= threshold) out[r].push_back(g);
    return out;
}

std::vector<GenreSet> StageTwoModel::predict_labels(const Dataset& data,
                                                    const std::vector<std::size_t>& idx,
                                                    double threshold) {
    return threshold_labels(predict_probs(data, idx), threshold);
}

double StageTwoModel::mean_gate_error(const Dataset& data, const std::vector<std::size_t>& idx) {
    if (!cfg_.modalities.kg) throw std::runtime_error("mean_gate_error: kg modality inactive");
    if (idx.empty()) throw std::runtime_error("mean_gate_error: empty index list");
    double acc = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(idx.size(), start + cfg_.batch_size);
        const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                             idx.begin() + static_cast<std::ptrdiff_t>(end));
        Tape tape;
        BoundParams bound(tape, params_);
        Forward fwd = forward(tape, bound, data, chunk, /*train_mode=*/false);
        const Var mean_gate = tape.mean_rows(fwd.fusion.gate[static_cast<int>(Modality::kg)]);
        const Tensor& a = tape.value(mean_gate);
        for (std::size_t r = 0; r < chunk.size(); ++r)
            acc += std::fabs(a.v[r] - data.samples[chunk[r]].pseudo);
    }
    return acc / static_cast<double>(idx.size());
}

double StageTwoModel::mean_kg_gate(const Dataset& data, const std::vector<std::size_t>& idx) {
    if (!cfg_.modalities.kg) throw std::runtime_error("mean_kg_gate: kg modality inactive");
    if (idx.empty()) throw std::runtime_error("mean_kg_gate: empty index list");
    double acc = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(idx.size(), start + cfg_.batch_size);
        const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                             idx.begin() + static_cast<std::ptrdiff_t>(end));
        Tape tape;
        BoundParams bound(tape, params_);
        Forward fwd = forward(tape, bound, data, chunk, /*train_mode=*/false);
        const Var mean_gate = tape.mean_rows(fwd.fusion.gate[static_cast<int>(Modality::kg)]);
        for (double v : tape.value(mean_gate).v) acc += v;
    }
    return acc / static_cast<double>(idx.size());
}

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void StageTwoModel::save(const std::filesystem::path& path, const std::string& kg_manifest_hash,
                         const std::string& kge_manifest_hash, const CorpusStats& stats) const {
    json manifest;
    manifest["format"] = kCheckpointVersion;
    manifest["epochs"] = cfg_.epochs;
    manifest["batch_size"] = cfg_.batch_size;
    manifest["lr"] = cfg_.lr;
    manifest["optimizer"] = cfg_.optimizer == OptimConfig::Kind::adamw ? "adamw" : "sgd";
    manifest["weight_decay"] = cfg_.weight_decay;
    manifest["tau"] = cfg_.tau;
    manifest["use_atten"] = cfg_.use_atten;
    manifest["use_contra"] = cfg_.use_contra;
    manifest["modalities"] = {{"text", cfg_.modalities.text},
                              {"image", cfg_.modalities.image},
                              {"kg", cfg_.modalities.kg}};
    manifest["genre_init"] = genre_init_name(cfg_.genre_init);
    manifest["seed"] = cfg_.seed;
    manifest["threshold"] = cfg_.threshold;
    manifest["d_proj"] = cfg_.d_proj;
    manifest["dims"] = {{"text", fusion_.dims.text},
                        {"image", fusion_.dims.image},
                        {"kg", fusion_.dims.kg}};
    manifest["bn_eps"] = fusion_.bn_eps;
    manifest["bn_momentum"] = fusion_.bn_momentum;
    manifest["vocab"] = vocab_;
    manifest["kg_manifest_hash"] = kg_manifest_hash;
    manifest["kge_manifest_hash"] = kge_manifest_hash;
    manifest["stats"] = {{"n_train", stats.n_train},
                         {"mean_dc", stats.mean_dc},
                         {"mean_degree_sum", stats.mean_degree_sum}};

    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const std::string& name : params_.names())
        tensors.emplace_back(name, &params_.get(name));
    // running stats ride along as tensors
    std::vector<Tensor> extra;
    extra.reserve(8);
    for (int mi = 0; mi < 3; ++mi) {
        const auto m = static_cast<Modality>(mi);
        if (!cfg_.modalities.active(m)) continue;
        extra.push_back(Tensor::vec(std::vector<double>(fusion_.bn[mi].mean)));
        tensors.emplace_back(std::string("run_mean_") + modality_name(m), &extra.back());
        extra.push_back(Tensor::vec(std::vector<double>(fusion_.bn[mi].var)));
        tensors.emplace_back(std::string("run_var_") + modality_name(m), &extra.back());
    }
    if (cfg_.use_contra) tensors.emplace_back("genre_rows", &genres_.rows);

    io::ByteWriter w;
    w.magic("CKPT");
    w.u32(kCheckpointVersion);
    const std::string mjson = manifest.dump();
    w.u32(static_cast<std::uint32_t>(mjson.size()));
    w.bytes(mjson.data(), mjson.size());
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        const std::string block = io::encode_tensor(tensor->shape, tensor->v);
        w.u32(static_cast<std::uint32_t>(block.size()));
        w.bytes(block.data(), block.size());
    }
    io::atomic_write(path, w.data());
}

LoadedModel StageTwoModel::load(const std::filesystem::path& path) {
    const std::string data = io::read_file(path);
    io::ByteReader r(data, path.string());
    r.expect_magic("CKPT");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));
    const std::uint32_t mlen = r.u32();
    const json manifest = json::parse(r.bytes(mlen));

    StageTwoModel model;
    TrainConfig cfg;
    cfg.epochs = manifest.at("epochs").get<std::size_t>();
    cfg.batch_size = manifest.at("batch_size").get<std::size_t>();
    cfg.lr = manifest.at("lr").get<double>();
    cfg.optimizer = manifest.at("optimizer").get<std::string>() == "adamw"
                        ? OptimConfig::Kind::adamw
                        : OptimConfig::Kind::sgd;
    cfg.weight_decay = manifest.at("weight_decay").get<double>();
    cfg.tau = manifest.at("tau").get<double>();
    cfg.use_atten = manifest.at("use_atten").get<bool>();
    cfg.use_contra = manifest.at("use_contra").get<bool>();
    cfg.modalities.text = manifest.at("modalities").at("text").get<bool>();
    cfg.modalities.image = manifest.at("modalities").at("image").get<bool>();
    cfg.modalities.kg = manifest.at("modalities").at("kg").get<bool>();
    cfg.genre_init = genre_init_from_string(manifest.at("genre_init").get<std::string>());
    cfg.seed = manifest.at("seed").get<std::uint64_t>();
    cfg.threshold = manifest.at("threshold").get<double>();
    cfg.d_proj = manifest.at("d_proj").get<std::size_t>();
    model.cfg_ = cfg;
    model.vocab_ = manifest.at("vocab").get<std::vector<std::string>>();
    model.n_genres_ = model.vocab_.size();
    model.shuffle_rng_ = Rng(cfg.seed ^ kShuffleSalt);

    model.fusion_.dims.text = manifest.at("dims").at("text").get<std::size_t>();
    model.fusion_.dims.image = manifest.at("dims").at("image").get<std::size_t>();
    model.fusion_.dims.kg = manifest.at("dims").at("kg").get<std::size_t>();
    model.fusion_.dims.proj = cfg.d_proj;
    model.fusion_.active = cfg.modalities;
    model.fusion_.bn_eps = manifest.at("bn_eps").get<double>();
    model.fusion_.bn_momentum = manifest.at("bn_momentum").get<double>();

    const std::uint32_t n_tensors = r.u32();
    std::unordered_map<std::string, Tensor> blocks;
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const std::uint16_t nlen = r.u16();
        const std::string name = r.bytes(nlen);
        const std::uint32_t blen = r.u32();
        io::TensorFile tf = io::decode_tensor(r.bytes(blen), path.string() + ":" + name);
        blocks.emplace(name, Tensor(tf.shape, std::move(tf.values)));
    }
    auto take = [&](const std::string& name) -> Tensor {
        auto it = blocks.find(name);
        if (it == blocks.end())
            throw std::runtime_error(path.string() + ": missing tensor block '" + name + "'");
        Tensor t = std::move(it->second);
        blocks.erase(it);
        return t;
    };

    for (int mi = 0; mi < 3; ++mi) {
        const auto m = static_cast<Modality>(mi);
        if (!cfg.modalities.active(m)) continue;
        const std::string tag = modality_name(m);
        model.params_.add("bn_" + tag + ".gain", take("bn_" + tag + ".gain"));
        model.params_.add("bn_" + tag + ".bias", take("bn_" + tag + ".bias"));
        model.params_.add("proj_" + tag + ".w", take("proj_" + tag + ".w"));
        model.params_.add("proj_" + tag + ".b", take("proj_" + tag + ".b"));
        const Tensor rm = take("run_mean_" + tag);
        const Tensor rv = take("run_var_" + tag);
        model.fusion_.bn[mi] = BnStats(rm.count());
        model.fusion_.bn[mi].mean = rm.v;
        model.fusion_.bn[mi].var = rv.v;
    }
    model.params_.add("atten.w", take("atten.w"));
    model.params_.add("atten.b", take("atten.b"));
    model.params_.add("cls.w", take("cls.w"));
    model.params_.add("cls.b", take("cls.b"));
    if (cfg.use_contra) {
        model.params_.add("gcacl.w", take("gcacl.w"));
        model.params_.add("gcacl.b", take("gcacl.b"));
        model.genres_.rows = take("genre_rows");
        model.genres_.tau = cfg.tau;
    }

    LoadedModel out{std::move(model), manifest.at("kg_manifest_hash").get<std::string>(),
               manifest.at("kge_manifest_hash").get<std::string>(),
               {},
               {}};
    out.vocab = out.model.vocab_;
    out.stats.n_train = manifest.at("stats").at("n_train").get<std::size_t>();
    out.stats.mean_dc = manifest.at("stats").at("mean_dc").get<double>();
    out.stats.mean_degree_sum = manifest.at("stats").at("mean_degree_sum").get<double>();
    return out;
}

}  // namespace kgmc
