#include "kgmc/kge.hpp"

#include "kgmc/kernels/kernels.hpp"
#include "kgmc/util/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace kgmc {

using nlohmann::json;

const char* kge_model_name(KgeModelKind k) {
    switch (k) {
        case KgeModelKind::transe: return "transe";
        case KgeModelKind::transh: return "transh";
        case KgeModelKind::transr: return "transr";
        case KgeModelKind::rotate: return "rotate";
    }
    return "?";
}

KgeModelKind kge_model_from_string(const std::string& s) {
    if (s == "transe") return KgeModelKind::transe;
    if (s == "transh") return KgeModelKind::transh;
    if (s == "transr") return KgeModelKind::transr;
    if (s == "rotate") return KgeModelKind::rotate;
    throw std::runtime_error("unknown translate model: '" + s + "' (transe|transh|transr|rotate)");
}

namespace {

void renorm_rows(Tensor& t) {
    const std::size_t rows = t.rows(), cols = t.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = t.row(r);
        const double n2 = kern::ops().dot(p, p, cols);
        if (n2 > 0.0) kern::ops().scale(p, 1.0 / std::sqrt(n2), cols);
    }
}

}  // namespace

KgeModel init_kge_model(KgeModelKind kind, std::size_t n_entities, std::size_t dim, Rng& rng) {
    if (dim < 1) throw std::runtime_error("kge: dim must be >= 1");
    if (kind == KgeModelKind::rotate && dim % 2 != 0)
        throw std::runtime_error("rotate: dim must be even (interleaved re/im entity entries)");
    KgeModel m;
    m.kind = kind;
    m.dim = dim;
    const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    m.entities = Tensor({n_entities, dim});
    for (double& v : m.entities.v) v = rng.uniform(-bound, bound);
    renorm_rows(m.entities);

    if (kind == KgeModelKind::rotate) {
        m.relations = Tensor({kRelationKindCount, dim / 2});
        for (double& v : m.relations.v) v = rng.uniform(0.0, 6.283185307179586476925286766559);
    } else {
        m.relations = Tensor({kRelationKindCount, dim});
        for (double& v : m.relations.v) v = rng.uniform(-bound, bound);
    }
    if (kind == KgeModelKind::transh) {
        m.hyperplanes = Tensor({kRelationKindCount, dim});
        for (double& v : m.hyperplanes.v) v = rng.uniform(-bound, bound);
        renorm_rows(m.hyperplanes);
    }
    if (kind == KgeModelKind::transr) {
        // identity projections; relations learn the translation first
        m.projections = Tensor({kRelationKindCount, dim * dim});
        for (std::size_t r = 0; r < kRelationKindCount; ++r)
            for (std::size_t i = 0; i < dim; ++i) m.projections.v[r * dim * dim + i * dim + i] = 1.0;
    }
    return m;
}

void KgeGrads::clear() {
    entities.clear();
    relations.clear();
    hyperplanes.clear();
    projections.clear();
}

namespace {

std::vector<double>& slot(std::unordered_map<std::uint32_t, std::vector<double>>& m,
                          std::uint32_t key, std::size_t n) {
    auto& v = m[key];
    if (v.empty()) v.assign(n, 0.0);
    return v;
}

double score_transe(const KgeModel& m, std::uint32_t h, std::uint32_t r, std::uint32_t t,
                    double scale, KgeGrads* g) {
    const std::size_t D = m.dim;
    const double* hp = m.entities.row(h);
    const double* rp = m.relations.row(r);
    const double* tp = m.entities.row(t);
    double score = 0.0;
    if (g == nullptr) {
        for (std::size_t i = 0; i < D; ++i) score += std::fabs(hp[i] + rp[i] - tp[i]);
        return score;
    }
    auto& gh = slot(g->entities, h, D);
    auto& gr = slot(g->relations, r, D);
    auto& gt = slot(g->entities, t, D);
    for (std::size_t i = 0; i < D; ++i) {
        const double d = hp[i] + rp[i] - tp[i];
        score += std::fabs(d);
        const double s = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
        gh[i] += s;
        gr[i] += s;
        gt[i] -= s;
    }
    return score;
}

double score_transh(const KgeModel& m, std::uint32_t h, std::uint32_t r, std::uint32_t t,
                    double scale, KgeGrads* g) {
    const std::size_t D = m.dim;
    const double* hp = m.entities.row(h);
    const double* dp = m.relations.row(r);
    const double* tp = m.entities.row(t);
    const double* wp = m.hyperplanes.row(r);
    const double wh = kern::ops().dot(wp, hp, D);
    const double wt = kern::ops().dot(wp, tp, D);
    std::vector<double> u(D);
    for (std::size_t i = 0; i < D; ++i)
        u[i] = (hp[i] - wh * wp[i]) + dp[i] - (tp[i] - wt * wp[i]);
    const double score = kern::ops().dot(u.data(), u.data(), D);
    if (g == nullptr) return score;

    std::vector<double> du(D);
    for (std::size_t i = 0; i < D; ++i) du[i] = 2.0 * scale * u[i];
    const double w_du = kern::ops().dot(wp, du.data(), D);
    auto& gh = slot(g->entities, h, D);
    auto& gt = slot(g->entities, t, D);
    auto& gd = slot(g->relations, r, D);
    auto& gw = slot(g->hyperplanes, r, D);
    for (std::size_t i = 0; i < D; ++i) {
        const double proj = du[i] - w_du * wp[i];  // (I - w w^T) du
        gh[i] += proj;
        gt[i] -= proj;
        gd[i] += du[i];
        gw[i] += (wt - wh) * du[i] + w_du * (tp[i] - hp[i]);
    }
    return score;
}

double score_transr(const KgeModel& m, std::uint32_t h, std::uint32_t r, std::uint32_t t,
                    double scale, KgeGrads* g) {
    const std::size_t D = m.dim;
    const double* hp = m.entities.row(h);
    const double* rp = m.relations.row(r);
    const double* tp = m.entities.row(t);
    const double* M = m.projections.v.data() + static_cast<std::size_t>(r) * D * D;
    std::vector<double> diff(D), u(D);
    for (std::size_t i = 0; i < D; ++i) diff[i] = hp[i] - tp[i];
    for (std::size_t i = 0; i < D; ++i)
        u[i] = kern::ops().dot(M + i * D, diff.data(), D) + rp[i];
    const double score = kern::ops().dot(u.data(), u.data(), D);
    if (g == nullptr) return score;

    auto& gh = slot(g->entities, h, D);
    auto& gt = slot(g->entities, t, D);
    auto& gr = slot(g->relations, r, D);
    auto& gM = slot(g->projections, r, D * D);
    for (std::size_t i = 0; i < D; ++i) {
        const double du = 2.0 * scale * u[i];
        gr[i] += du;
        // dM row i += du * diff ; dh/dt via M^T du
        kern::ops().axpy(du, diff.data(), gM.data() + i * D, D);
        kern::ops().axpy(du, M + i * D, gh.data(), D);
        kern::ops().axpy(-du, M + i * D, gt.data(), D);
    }
    return score;
}

double score_rotate(const KgeModel& m, std::uint32_t h, std::uint32_t r, std::uint32_t t,
                    double scale, KgeGrads* g) {
    const std::size_t half = m.dim / 2;
    const double* hp = m.entities.row(h);
    const double* tp = m.entities.row(t);
    const double* ph = m.relations.row(r);
    double score = 0.0;
    std::vector<double>* gh = nullptr;
    std::vector<double>* gt = nullptr;
    std::vector<double>* gph = nullptr;
    if (g != nullptr) {
        gh = &slot(g->entities, h, m.dim);
        gt = &slot(g->entities, t, m.dim);
        gph = &slot(g->relations, r, half);
    }
    for (std::size_t j = 0; j < half; ++j) {
        const double hre = hp[2 * j], him = hp[2 * j + 1];
        const double c = std::cos(ph[j]), s = std::sin(ph[j]);
        const double pre = hre * c - him * s;
        const double pim = hre * s + him * c;
        const double dre = pre - tp[2 * j];
        const double dim_ = pim - tp[2 * j + 1];
        const double mod = std::sqrt(dre * dre + dim_ * dim_);
        score += mod;
        if (g == nullptr || mod < 1e-12) continue;
        const double gre = scale * dre / mod;
        const double gim = scale * dim_ / mod;
        (*gh)[2 * j] += gre * c + gim * s;
        (*gh)[2 * j + 1] += -gre * s + gim * c;
        (*gt)[2 * j] -= gre;
        (*gt)[2 * j + 1] -= gim;
        (*gph)[j] += gre * (-pim) + gim * pre;
    }
    return score;
}

}  // namespace

double score_and_grad(const KgeModel& model, std::uint32_t head, RelationKind rel,
                      std::uint32_t tail, double scale, KgeGrads* grads) {
    const auto r = static_cast<std::uint32_t>(rel);
    switch (model.kind) {
        case KgeModelKind::transe: return score_transe(model, head, r, tail, scale, grads);
        case KgeModelKind::transh: return score_transh(model, head, r, tail, scale, grads);
        case KgeModelKind::transr: return score_transr(model, head, r, tail, scale, grads);
        case KgeModelKind::rotate: return score_rotate(model, head, r, tail, scale, grads);
    }
    throw std::runtime_error("bad model kind");
}

double KgeModel::score(std::uint32_t head, RelationKind rel, std::uint32_t tail) const {
    return score_and_grad(*this, head, rel, tail, 0.0, nullptr);
}

Corruption corrupt_triple(const DomainKg& kg, const Triple& triple, Rng& rng) {
    if (kg.triple_count() == 0) throw std::runtime_error("corrupt_triple: empty KG");
    const bool corrupt_head = rng.coin();
    const EntityKind kind = corrupt_head ? relation_head_kind(triple.relation)
                                         : relation_tail_kind(triple.relation);
    const auto& pool = kg.entities_of_kind(kind);
    Triple cand = triple;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const std::uint32_t pick = pool[static_cast<std::size_t>(rng.below(pool.size()))];
        if (corrupt_head)
            cand.head = pick;
        else
            cand.tail = pick;
        if (!kg.has_triple(cand.head, cand.relation, cand.tail)) return {cand, false};
    }
    return {cand, true};
}

KgeTrainResult train_embeddings(const DomainKg& kg, const KgeConfig& cfg, Rng& rng) {
    if (kg.triple_count() == 0) throw std::runtime_error("train_embeddings: KG has no triples");
    if (cfg.margin <= 0.0) throw std::runtime_error("train_embeddings: margin must be > 0");
    if (cfg.negatives < 1) throw std::runtime_error("train_embeddings: negatives must be >= 1");
    if (cfg.batch_size < 1) throw std::runtime_error("train_embeddings: batch size must be >= 1");

    KgeTrainResult result;
    std::vector<Triple> train = kg.triples();
    if (cfg.holdout_frac > 0.0) {
        if (cfg.holdout_frac >= 1.0)
            throw std::runtime_error("train_embeddings: holdout fraction must be < 1");
        rng.shuffle(train);
        const auto n_hold = static_cast<std::size_t>(
            cfg.holdout_frac * static_cast<double>(train.size()));
        result.holdout.assign(train.end() - static_cast<std::ptrdiff_t>(n_hold), train.end());
        train.resize(train.size() - n_hold);
        if (train.empty()) throw std::runtime_error("train_embeddings: holdout leaves no triples");
    }

    result.model = init_kge_model(cfg.model, kg.entity_count(), cfg.dim, rng);
    KgeModel& m = result.model;
    KgeGrads grads;
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t pairs = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            grads.clear();
            for (std::size_t b = start; b < end; ++b) {
                const Triple& pos = train[order[b]];
                for (std::size_t k = 0; k < cfg.negatives; ++k) {
                    const Corruption neg = corrupt_triple(kg, pos, rng);
                    const double d_pos = m.score(pos);
                    const double d_neg = m.score(neg.triple);
                    const double hinge = cfg.margin + d_pos - d_neg;
                    ++pairs;
                    if (hinge <= 0.0) continue;
                    epoch_loss += hinge;
                    score_and_grad(m, pos.head, pos.relation, pos.tail, 1.0, &grads);
                    score_and_grad(m, neg.triple.head, neg.triple.relation, neg.triple.tail, -1.0,
                                   &grads);
                }
            }
            for (const auto& [idx, gv] : grads.entities)
                kern::ops().axpy(-cfg.lr, gv.data(), m.entities.row(idx), m.dim);
            for (const auto& [idx, gv] : grads.relations)
                kern::ops().axpy(-cfg.lr, gv.data(), m.relations.row(idx), m.relations.cols());
            for (const auto& [idx, gv] : grads.hyperplanes)
                kern::ops().axpy(-cfg.lr, gv.data(), m.hyperplanes.row(idx), m.dim);
            for (const auto& [idx, gv] : grads.projections)
                kern::ops().axpy(-cfg.lr, gv.data(),
                                 m.projections.v.data() + static_cast<std::size_t>(idx) * m.dim * m.dim,
                                 m.dim * m.dim);
        }
        renorm_rows(m.entities);
        if (m.kind == KgeModelKind::transh) renorm_rows(m.hyperplanes);
        const double mean_loss = pairs ? epoch_loss / static_cast<double>(pairs) : 0.0;
        if (!std::isfinite(mean_loss))
            throw std::runtime_error("train_embeddings: non-finite loss at epoch " +
                                     std::to_string(epoch));
        result.epoch_losses.push_back(mean_loss);
    }
    return result;
}

namespace {
struct TripleSet {
    std::unordered_set<std::uint64_t> keys;
    static std::uint64_t key(std::uint32_t h, RelationKind r, std::uint32_t t) {
        return (static_cast<std::uint64_t>(h) << 35) ^ (static_cast<std::uint64_t>(t) << 3) ^
               static_cast<std::uint64_t>(r);
    }
    void add(const Triple& t) { keys.insert(key(t.head, t.relation, t.tail)); }
    bool has(std::uint32_t h, RelationKind r, std::uint32_t t) const {
        return keys.count(key(h, r, t)) != 0;
    }
};
}  // namespace

LinkPredReport eval_link_prediction(const DomainKg& kg, const KgeModel& model,
                                    const std::vector<Triple>& test_triples, std::size_t k,
                                    bool filtered) {
    if (test_triples.empty()) throw std::runtime_error("eval_link_prediction: empty test set");
    TripleSet known;
    if (filtered) {
        for (const Triple& t : kg.triples()) known.add(t);
        for (const Triple& t : test_triples) known.add(t);
    }
    std::size_t hits = 0, queries = 0;
    double rr_sum = 0.0;
    for (const Triple& t : test_triples) {
        // tail query
        {
            const auto& pool = kg.entities_of_kind(relation_tail_kind(t.relation));
            const double true_score = model.score(t.head, t.relation, t.tail);
            std::size_t better = 0;
            for (std::uint32_t cand : pool) {
                if (cand == t.tail) continue;
                if (filtered && known.has(t.head, t.relation, cand)) continue;
                if (model.score(t.head, t.relation, cand) < true_score) ++better;
            }
            const std::size_t rank = 1 + better;
            ++queries;
            if (rank <= k) ++hits;
            rr_sum += 1.0 / static_cast<double>(rank);
        }
        // head query
        {
            const auto& pool = kg.entities_of_kind(relation_head_kind(t.relation));
            const double true_score = model.score(t.head, t.relation, t.tail);
            std::size_t better = 0;
            for (std::uint32_t cand : pool) {
                if (cand == t.head) continue;
                if (filtered && known.has(cand, t.relation, t.tail)) continue;
                if (model.score(cand, t.relation, t.tail) < true_score) ++better;
            }
            const std::size_t rank = 1 + better;
            ++queries;
            if (rank <= k) ++hits;
            rr_sum += 1.0 / static_cast<double>(rank);
        }
    }
    LinkPredReport rep;
    rep.n_queries = queries;
    rep.hits_at_k = static_cast<double>(hits) / static_cast<double>(queries);
    rep.mrr = rr_sum / static_cast<double>(queries);
    return rep;
}

namespace {
std::string encode_holdout(const std::vector<Triple>& holdout) {
    io::ByteWriter w;
    w.magic("KGT1");
    w.u32(static_cast<std::uint32_t>(holdout.size()));
    for (const Triple& t : holdout) {
        w.u32(t.head);
        w.u8(static_cast<std::uint8_t>(t.relation));
        w.u32(t.tail);
    }
    return w.data();
}

std::vector<Triple> decode_holdout(const std::string& data, const std::string& name) {
    io::ByteReader r(data, name);
    r.expect_magic("KGT1");
    const std::uint32_t count = r.u32();
    std::vector<Triple> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t h = r.u32();
        const std::uint8_t rel = r.u8();
        const std::uint32_t t = r.u32();
        out.push_back(Triple{h, static_cast<RelationKind>(rel), t});
    }
    return out;
}
}  // namespace

void save_kge(const std::filesystem::path& dir, const KgeModel& model, const KgeConfig& cfg,
              const DomainKg& kg, const std::vector<Triple>& holdout,
              const std::string& kg_manifest_hash) {
    std::filesystem::create_directories(dir);
    write_kg_entities(dir / "entities.jsonl", kg);
    io::write_tensor(dir / "mat_e.tns", model.entities.shape, model.entities.v);
    io::write_tensor(dir / "relations.tns", model.relations.shape, model.relations.v);
    json files;
    files["entities.jsonl"] = io::file_hash(dir / "entities.jsonl");
    files["mat_e.tns"] = io::file_hash(dir / "mat_e.tns");
    files["relations.tns"] = io::file_hash(dir / "relations.tns");
    if (model.kind == KgeModelKind::transh) {
        io::write_tensor(dir / "hyperplanes.tns", model.hyperplanes.shape, model.hyperplanes.v);
        files["hyperplanes.tns"] = io::file_hash(dir / "hyperplanes.tns");
    }
    if (model.kind == KgeModelKind::transr) {
        io::write_tensor(dir / "projections.tns", model.projections.shape, model.projections.v);
        files["projections.tns"] = io::file_hash(dir / "projections.tns");
    }
    if (!holdout.empty()) {
        io::atomic_write(dir / "holdout.bin", encode_holdout(holdout));
        files["holdout.bin"] = io::file_hash(dir / "holdout.bin");
    }
    json manifest;
    manifest["model"] = kge_model_name(model.kind);
    manifest["dim"] = cfg.dim;
    manifest["seed"] = cfg.seed;
    manifest["epochs"] = cfg.epochs;
    manifest["batch_size"] = cfg.batch_size;
    manifest["lr"] = cfg.lr;
    manifest["margin"] = cfg.margin;
    manifest["negatives"] = cfg.negatives;
    manifest["holdout_frac"] = cfg.holdout_frac;
    manifest["kg_manifest_hash"] = kg_manifest_hash;
    manifest["files"] = files;
    io::atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

KgeCheckpoint load_kge(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    const std::string manifest_bytes = io::read_file(manifest_path);
    json manifest = json::parse(manifest_bytes);

    KgeCheckpoint ckpt;
    ckpt.manifest_hash = io::fnv1a_hex(manifest_bytes);
    ckpt.kg_manifest_hash = manifest.at("kg_manifest_hash").get<std::string>();
    ckpt.config.model = kge_model_from_string(manifest.at("model").get<std::string>());
    ckpt.config.dim = manifest.at("dim").get<std::size_t>();
    ckpt.config.seed = manifest.at("seed").get<std::uint64_t>();
    ckpt.config.epochs = manifest.at("epochs").get<std::size_t>();
    ckpt.config.batch_size = manifest.at("batch_size").get<std::size_t>();
    ckpt.config.lr = manifest.at("lr").get<double>();
    ckpt.config.margin = manifest.at("margin").get<double>();
    ckpt.config.negatives = manifest.at("negatives").get<std::size_t>();
    ckpt.config.holdout_frac = manifest.at("holdout_frac").get<double>();

    for (const auto& [name, hash] : manifest.at("files").items()) {
        const std::string actual = io::file_hash(dir / name);
        if (actual != hash.get<std::string>())
            throw std::runtime_error("kge checkpoint hash mismatch for " + (dir / name).string());
    }

    KgeModel& m = ckpt.model;
    m.kind = ckpt.config.model;
    m.dim = ckpt.config.dim;
    auto mat_e = io::read_tensor(dir / "mat_e.tns");
    m.entities = Tensor(mat_e.shape, std::move(mat_e.values));
    auto rel = io::read_tensor(dir / "relations.tns");
    m.relations = Tensor(rel.shape, std::move(rel.values));
    if (m.kind == KgeModelKind::transh) {
        auto hp = io::read_tensor(dir / "hyperplanes.tns");
        m.hyperplanes = Tensor(hp.shape, std::move(hp.values));
    }
    if (m.kind == KgeModelKind::transr) {
        auto pr = io::read_tensor(dir / "projections.tns");
        m.projections = Tensor(pr.shape, std::move(pr.values));
    }
    if (std::filesystem::exists(dir / "holdout.bin"))
        ckpt.holdout = decode_holdout(io::read_file(dir / "holdout.bin"), "holdout.bin");
    return ckpt;
}

}  // namespace kgmc
