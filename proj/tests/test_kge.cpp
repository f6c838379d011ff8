#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kgmc/gradcheck.hpp"
#include "kgmc/kge.hpp"
#include "kgmc/util/io.hpp"
#include "kgmc/util/rng.hpp"
#include "planted_kg.hpp"

#include <cmath>
#include <filesystem>

using namespace kgmc;

namespace {

KgeModel blank_model(KgeModelKind kind, std::size_t n_entities, std::size_t dim) {
    KgeModel m;
    m.kind = kind;
    m.dim = dim;
    m.entities = Tensor({n_entities, dim});
    m.relations = Tensor({kRelationKindCount, kind == KgeModelKind::rotate ? dim / 2 : dim});
    if (kind == KgeModelKind::transh) m.hyperplanes = Tensor({kRelationKindCount, dim});
    if (kind == KgeModelKind::transr) m.projections = Tensor({kRelationKindCount, dim * dim});
    return m;
}

void set_row(Tensor& t, std::size_t r, std::initializer_list<double> vals) {
    std::copy(vals.begin(), vals.end(), t.row(r));
}

DomainKg small_kg(std::size_t per_kind = 3) {
    // directors, casts and genres in a triangle of relations
    DomainKg kg;
    std::vector<std::uint32_t> d, c, g;
    for (std::size_t i = 0; i < per_kind; ++i) {
        d.push_back(kg.intern(EntityKind::director, "D" + std::to_string(i)));
        c.push_back(kg.intern(EntityKind::cast, "C" + std::to_string(i)));
        g.push_back(kg.intern(EntityKind::genre, "G" + std::to_string(i)));
    }
    for (std::size_t i = 0; i < per_kind; ++i) {
        kg.add_triple(d[i], RelationKind::director_cast, c[i]);
        kg.add_triple(c[i], RelationKind::cast_genre, g[(i + 1) % per_kind]);
        kg.add_triple(d[i], RelationKind::director_genre, g[i]);
    }
    return kg;
}

}  // namespace

TEST_CASE("TransE: exact translation scores zero") {
    KgeModel m = blank_model(KgeModelKind::transe, 2, 2);
    set_row(m.entities, 0, {1.0, 0.0});                                   // h
    set_row(m.entities, 1, {1.0, 1.0});                                   // t
    set_row(m.relations, static_cast<std::size_t>(RelationKind::director_genre), {0.0, 1.0});
    CHECK(m.score(0, RelationKind::director_genre, 1) == 0.0);
    // and the generic L1 distance otherwise
    set_row(m.entities, 1, {2.0, -1.0});
    CHECK(m.score(0, RelationKind::director_genre, 1) == doctest::Approx(1.0 + 2.0));
}

TEST_CASE("RotatE: zero phases reduce to the complex-modulus distance of h - t") {
    KgeModel m = blank_model(KgeModelKind::rotate, 2, 4);
    set_row(m.entities, 0, {1.0, 2.0, -0.5, 0.25});
    set_row(m.entities, 1, {0.0, 1.0, 0.5, 0.25});
    // phases already zero
    const double expect = std::hypot(1.0, 1.0) + std::hypot(-1.0, 0.0);
    CHECK(m.score(0, RelationKind::director_genre, 1) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("TransH: worked projection example scores zero") {
    KgeModel m = blank_model(KgeModelKind::transh, 2, 2);
    set_row(m.entities, 0, {1.0, 2.0});  // h
    set_row(m.entities, 1, {5.0, 2.0});  // t
    const auto rel = static_cast<std::size_t>(RelationKind::director_genre);
    set_row(m.hyperplanes, rel, {1.0, 0.0});  // w = e1
    // d_r = 0; projections of h and t are both (0,2)
    CHECK(m.score(0, RelationKind::director_genre, 1) == 0.0);
}

TEST_CASE("translation identity: each model scores ~0 on an exactly-consistent triple") {
    Rng rng(808);
    const std::size_t dim = 8;
    const auto rel = RelationKind::director_genre;
    const auto r = static_cast<std::size_t>(rel);

    SUBCASE("transe") {
        KgeModel m = init_kge_model(KgeModelKind::transe, 2, dim, rng);
        for (std::size_t i = 0; i < dim; ++i)
            m.entities.at(1, i) = m.entities.at(0, i) + m.relations.at(r, i);
        CHECK(m.score(0, rel, 1) <= 1e-9);
    }
    SUBCASE("transh") {
        KgeModel m = init_kge_model(KgeModelKind::transh, 2, dim, rng);
        const double* w = m.hyperplanes.row(r);
        // force d_r onto the hyperplane, then place t = h_perp + d_r
        double wd = 0.0;
        for (std::size_t i = 0; i < dim; ++i) wd += w[i] * m.relations.at(r, i);
        for (std::size_t i = 0; i < dim; ++i) m.relations.at(r, i) -= wd * w[i];
        double wh = 0.0;
        for (std::size_t i = 0; i < dim; ++i) wh += w[i] * m.entities.at(0, i);
        for (std::size_t i = 0; i < dim; ++i)
            m.entities.at(1, i) = (m.entities.at(0, i) - wh * w[i]) + m.relations.at(r, i);
        CHECK(m.score(0, rel, 1) <= 1e-9);
    }
    SUBCASE("transr") {
        KgeModel m = init_kge_model(KgeModelKind::transr, 2, dim, rng);
        for (double& v : m.projections.v) v += 0.05 * rng.uniform(-1.0, 1.0);
        // r := M (t - h)
        const double* M = m.projections.v.data() + r * dim * dim;
        for (std::size_t i = 0; i < dim; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j)
                acc += M[i * dim + j] * (m.entities.at(1, j) - m.entities.at(0, j));
            m.relations.at(r, i) = acc;
        }
        CHECK(m.score(0, rel, 1) <= 1e-9);
    }
    SUBCASE("rotate") {
        KgeModel m = init_kge_model(KgeModelKind::rotate, 2, dim, rng);
        for (std::size_t j = 0; j < dim / 2; ++j) {
            const double c = std::cos(m.relations.at(r, j)), s = std::sin(m.relations.at(r, j));
            const double hre = m.entities.at(0, 2 * j), him = m.entities.at(0, 2 * j + 1);
            m.entities.at(1, 2 * j) = hre * c - him * s;
            m.entities.at(1, 2 * j + 1) = hre * s + him * c;
        }
        CHECK(m.score(0, rel, 1) <= 1e-9);
    }
}

TEST_CASE("scores are non-negative for all models on random parameters") {
    Rng rng(90210);
    for (auto kind : {KgeModelKind::transe, KgeModelKind::transh, KgeModelKind::transr,
                      KgeModelKind::rotate}) {
        KgeModel m = init_kge_model(kind, 6, 8, rng);
        for (int trial = 0; trial < 20; ++trial) {
            const auto h = static_cast<std::uint32_t>(rng.below(6));
            const auto t = static_cast<std::uint32_t>(rng.below(6));
            const auto rel = static_cast<RelationKind>(rng.below(kRelationKindCount));
            CHECK(m.score(h, rel, t) >= 0.0);
        }
    }
}

namespace {

// flattens the parameter rows that participate in one triple's score
struct ScoreProbe {
    KgeModel model;
    std::uint32_t h = 0, t = 1;
    RelationKind rel = RelationKind::director_genre;

    std::vector<double> flatten() const {
        std::vector<double> p;
        const auto r = static_cast<std::size_t>(rel);
        p.insert(p.end(), model.entities.row(h), model.entities.row(h) + model.dim);
        p.insert(p.end(), model.entities.row(t), model.entities.row(t) + model.dim);
        p.insert(p.end(), model.relations.row(r), model.relations.row(r) + model.relations.cols());
        if (model.kind == KgeModelKind::transh)
            p.insert(p.end(), model.hyperplanes.row(r), model.hyperplanes.row(r) + model.dim);
        if (model.kind == KgeModelKind::transr) {
            const double* M = model.projections.v.data() + r * model.dim * model.dim;
            p.insert(p.end(), M, M + model.dim * model.dim);
        }
        return p;
    }

    void unflatten(const std::vector<double>& p, KgeModel& m) const {
        const auto r = static_cast<std::size_t>(rel);
        std::size_t off = 0;
        std::copy(p.begin(), p.begin() + m.dim, m.entities.row(h));
        off += m.dim;
        std::copy(p.begin() + off, p.begin() + off + m.dim, m.entities.row(t));
        off += m.dim;
        std::copy(p.begin() + off, p.begin() + off + m.relations.cols(), m.relations.row(r));
        off += m.relations.cols();
        if (m.kind == KgeModelKind::transh) {
            std::copy(p.begin() + off, p.begin() + off + m.dim, m.hyperplanes.row(r));
            off += m.dim;
        }
        if (m.kind == KgeModelKind::transr)
            std::copy(p.begin() + off, p.end(),
                      m.projections.v.data() + r * m.dim * m.dim);
    }

    std::vector<double> analytic_grad() const {
        KgeGrads grads;
        score_and_grad(model, h, rel, t, 1.0, &grads);
        const auto r = static_cast<std::uint32_t>(rel);
        std::vector<double> g;
        g.insert(g.end(), grads.entities[h].begin(), grads.entities[h].end());
        g.insert(g.end(), grads.entities[t].begin(), grads.entities[t].end());
        g.insert(g.end(), grads.relations[r].begin(), grads.relations[r].end());
        if (model.kind == KgeModelKind::transh)
            g.insert(g.end(), grads.hyperplanes[r].begin(), grads.hyperplanes[r].end());
        if (model.kind == KgeModelKind::transr)
            g.insert(g.end(), grads.projections[r].begin(), grads.projections[r].end());
        return g;
    }
};

}  // namespace

TEST_CASE("hand-derived score gradients match central differences for every model") {
    Rng rng(1618);
    for (auto kind : {KgeModelKind::transe, KgeModelKind::transh, KgeModelKind::transr,
                      KgeModelKind::rotate}) {
        ScoreProbe probe;
        probe.model = init_kge_model(kind, 4, 6, rng);
        // keep L1/modulus kinks away from the finite-difference window
        for (double& v : probe.model.entities.v) v += (v >= 0 ? 0.3 : -0.3);

        auto f = [&](const std::vector<double>& p) {
            KgeModel m = probe.model;
            probe.unflatten(p, m);
            return m.score(probe.h, probe.rel, probe.t);
        };
        const auto rep = grad_check(f, probe.analytic_grad(), probe.flatten(), 1e-5);
        INFO("model ", kge_model_name(kind));
        CHECK(rep.max_rel_err < 1e-6);
    }
}

TEST_CASE("margin-ranking hinge gradient (pos minus neg) matches central differences") {
    Rng rng(2718);
    KgeModel model = init_kge_model(KgeModelKind::transe, 4, 6, rng);
    for (double& v : model.entities.v) v += (v >= 0 ? 0.3 : -0.3);
    const auto rel = RelationKind::director_cast;
    const double margin = 1.0;
    // pos (0, rel, 1), neg (0, rel, 2); hinge assumed active at this point
    auto hinge = [&](const KgeModel& m) {
        return std::max(0.0, margin + m.score(0, rel, 1) - m.score(0, rel, 2));
    };
    REQUIRE(hinge(model) > 1e-3);

    std::vector<double> point;
    for (std::uint32_t e : {0u, 1u, 2u})
        point.insert(point.end(), model.entities.row(e), model.entities.row(e) + model.dim);
    auto f = [&](const std::vector<double>& p) {
        KgeModel m = model;
        std::size_t off = 0;
        for (std::uint32_t e : {0u, 1u, 2u}) {
            std::copy(p.begin() + off, p.begin() + off + m.dim, m.entities.row(e));
            off += m.dim;
        }
        return hinge(m);
    };

    KgeGrads grads;
    score_and_grad(model, 0, rel, 1, 1.0, &grads);
    score_and_grad(model, 0, rel, 2, -1.0, &grads);
    std::vector<double> analytic;
    for (std::uint32_t e : {0u, 1u, 2u}) {
        auto it = grads.entities.find(e);
        if (it == grads.entities.end())
            analytic.insert(analytic.end(), model.dim, 0.0);
        else
            analytic.insert(analytic.end(), it->second.begin(), it->second.end());
    }
    const auto rep = grad_check(f, analytic, point, 1e-5);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("corrupt_triple: same kind, avoids known triples, deterministic, fair coin") {
    const DomainKg kg = small_kg(4);
    const Triple probe = kg.triples()[0];

    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Corruption c = corrupt_triple(kg, probe, rng);
        CHECK(kg.entity(c.triple.head).kind == relation_head_kind(probe.relation));
        CHECK(kg.entity(c.triple.tail).kind == relation_tail_kind(probe.relation));
        if (!c.collision) CHECK(!kg.has_triple(c.triple.head, c.triple.relation, c.triple.tail));
    }

    Rng a(17), b(17);
    for (int i = 0; i < 50; ++i) {
        const Corruption ca = corrupt_triple(kg, probe, a);
        const Corruption cb = corrupt_triple(kg, probe, b);
        CHECK(ca.triple.head == cb.triple.head);
        CHECK(ca.triple.tail == cb.triple.tail);
    }

    Rng coin_rng(99);
    std::size_t heads = 0;
    const std::size_t trials = 10000;
    for (std::size_t i = 0; i < trials; ++i) {
        const Corruption c = corrupt_triple(kg, probe, coin_rng);
        if (c.triple.head != probe.head) ++heads;
    }
    const double freq = static_cast<double>(heads) / static_cast<double>(trials);
    CHECK(freq == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
}

TEST_CASE("corruption against a single-member kind flags the collision") {
    DomainKg kg;
    const auto d = kg.intern(EntityKind::director, "D");
    const auto g = kg.intern(EntityKind::genre, "G");
    kg.add_triple(d, RelationKind::director_genre, g);
    Rng rng(1);
    bool saw_collision = false;
    for (int i = 0; i < 20; ++i)
        saw_collision = saw_collision || corrupt_triple(kg, kg.triples()[0], rng).collision;
    CHECK(saw_collision);
}

TEST_CASE("tiny-KG training separates positive from corrupted distances") {
    const DomainKg kg = small_kg(3);
    KgeConfig cfg;
    cfg.model = KgeModelKind::transe;
    cfg.dim = 4;
    cfg.epochs = 200;
    cfg.batch_size = 4;
    cfg.lr = 0.02;
    cfg.seed = 3;
    Rng rng(cfg.seed);
    const KgeTrainResult result = train_embeddings(kg, cfg, rng);

    Rng eval_rng(77);
    double pos_sum = 0.0, neg_sum = 0.0;
    std::size_t n = 0;
    for (const Triple& t : kg.triples()) {
        pos_sum += result.model.score(t);
        for (int k = 0; k < 10; ++k) {
            neg_sum += result.model.score(corrupt_triple(kg, t, eval_rng).triple);
            ++n;
        }
    }
    const double mean_pos = pos_sum / static_cast<double>(kg.triple_count());
    const double mean_neg = neg_sum / static_cast<double>(n);
    CHECK(mean_pos < mean_neg);
}

TEST_CASE("initial hinge loss stays within the margin when parameters are tiny") {
    Rng rng(12);
    const DomainKg kg = small_kg(3);
    KgeModel m = init_kge_model(KgeModelKind::transe, kg.entity_count(), 8, rng);
    for (double& v : m.entities.v) v *= 1e-6;
    for (double& v : m.relations.v) v *= 1e-6;
    const double margin = 1.0;
    Rng crng(13);
    for (const Triple& t : kg.triples()) {
        const double pos = m.score(t);
        const double neg = m.score(corrupt_triple(kg, t, crng).triple);
        const double hinge = std::max(0.0, margin + pos - neg);
        CHECK(std::isfinite(hinge));
        CHECK(hinge <= margin + 1e-4);
    }
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
    const DomainKg kg = small_kg(3);
    KgeConfig cfg;
    cfg.model = KgeModelKind::transh;
    cfg.dim = 6;
    cfg.epochs = 30;
    cfg.batch_size = 5;
    cfg.lr = 0.05;
    Rng r1(42), r2(42);
    const KgeTrainResult a = train_embeddings(kg, cfg, r1);
    const KgeTrainResult b = train_embeddings(kg, cfg, r2);
    CHECK(a.model.entities.v == b.model.entities.v);
    CHECK(a.model.relations.v == b.model.relations.v);
    CHECK(a.epoch_losses == b.epoch_losses);
}

TEST_CASE("link prediction ranking arithmetic on crafted embeddings") {
    // directors {d0,d1,d2}, genres {g0,g1,g2}; relation translation is zero
    DomainKg kg;
    std::vector<std::uint32_t> d, g;
    for (int i = 0; i < 3; ++i) d.push_back(kg.intern(EntityKind::director, "d" + std::to_string(i)));
    for (int i = 0; i < 3; ++i) g.push_back(kg.intern(EntityKind::genre, "g" + std::to_string(i)));
    kg.add_triple(d[0], RelationKind::director_genre, g[0]);

    KgeModel m = blank_model(KgeModelKind::transe, 6, 2);

    SUBCASE("true entity ranked first everywhere: hits@1 = 1, MRR = 1") {
        set_row(m.entities, d[0], {0.0, 0.0});
        set_row(m.entities, g[0], {1.0, 0.0});   // dist 1, nearest genre to d0
        set_row(m.entities, g[1], {5.0, 5.0});
        set_row(m.entities, g[2], {-6.0, 2.0});
        set_row(m.entities, d[1], {9.0, 9.0});   // far from g0
        set_row(m.entities, d[2], {-9.0, 9.0});
        const LinkPredReport rep =
            eval_link_prediction(kg, m, {kg.triples()[0]}, 1, /*filtered=*/false);
        CHECK(rep.hits_at_k == 1.0);
        CHECK(rep.mrr == 1.0);
        CHECK(rep.n_queries == 2);
    }
    SUBCASE("true entity always ranked second: MRR = 0.5") {
        set_row(m.entities, d[0], {0.0, 0.0});
        set_row(m.entities, g[0], {1.0, 0.0});    // dist 1 from d0
        set_row(m.entities, g[1], {0.25, 0.0});   // dist 0.25: beats g0 on the tail query
        set_row(m.entities, g[2], {7.0, 7.0});
        set_row(m.entities, d[1], {0.9, 0.0});    // dist 0.1 from g0: beats d0 on the head query
        set_row(m.entities, d[2], {8.0, -8.0});
        const LinkPredReport rep =
            eval_link_prediction(kg, m, {kg.triples()[0]}, 1, /*filtered=*/false);
        CHECK(rep.mrr == 0.5);
        CHECK(rep.hits_at_k == 0.0);
    }
}

TEST_CASE("random embeddings rank near the 10/pool baseline on the planted KG") {
    const testkit::PlantedKg planted = testkit::make_planted_kg(4242);
    Rng rng(1);
    const KgeModel random_model =
        init_kge_model(KgeModelKind::transe, planted.kg.entity_count(), 16, rng);
    REQUIRE(planted.holdout.size() * 2 >= 100);
    const LinkPredReport rep =
        eval_link_prediction(planted.kg, random_model, planted.holdout, 10, /*filtered=*/false);
    CHECK(rep.hits_at_k == doctest::Approx(0.2).epsilon(0.5));  // 0.2 +- 0.1 at this query count
}

TEST_CASE("TransE recovers the planted structure: filtered hits@10 >= 0.8") {
    const testkit::PlantedKg planted = testkit::make_planted_kg(4242);
    KgeConfig cfg;
    cfg.model = KgeModelKind::transe;
    cfg.dim = 16;
    cfg.epochs = 200;
    cfg.batch_size = 50;
    cfg.lr = 0.05;
    cfg.seed = 9;
    Rng rng(cfg.seed);
    const KgeTrainResult result = train_embeddings(planted.kg, cfg, rng);
    const LinkPredReport rep =
        eval_link_prediction(planted.kg, result.model, planted.holdout, 10, /*filtered=*/true);
    CHECK(rep.hits_at_k >= 0.8);
}

TEST_CASE("empty test set is rejected") {
    const DomainKg kg = small_kg(3);
    Rng rng(2);
    const KgeModel m = init_kge_model(KgeModelKind::transe, kg.entity_count(), 4, rng);
    CHECK_THROWS_AS(eval_link_prediction(kg, m, {}, 10, true), std::runtime_error);
}

TEST_CASE("embedding checkpoints round-trip through f32 and verify hashes") {
    const DomainKg kg = small_kg(3);
    KgeConfig cfg;
    cfg.model = KgeModelKind::transr;
    cfg.dim = 4;
    cfg.epochs = 5;
    cfg.batch_size = 4;
    cfg.lr = 0.05;
    Rng rng(6);
    const KgeTrainResult result = train_embeddings(kg, cfg, rng);

    const auto dir = std::filesystem::temp_directory_path() / "kgmc_kge_ckpt";
    std::filesystem::remove_all(dir);
    save_kge(dir, result.model, cfg, kg, result.holdout, "f00d");
    const KgeCheckpoint back = load_kge(dir);
    CHECK(back.model.kind == KgeModelKind::transr);
    CHECK(back.kg_manifest_hash == "f00d");
    REQUIRE(back.model.entities.v.size() == result.model.entities.v.size());
    for (std::size_t i = 0; i < back.model.entities.v.size(); ++i)
        CHECK(back.model.entities.v[i] ==
              static_cast<double>(static_cast<float>(result.model.entities.v[i])));

    // corrupting a tensor file must be caught by the manifest hash
    auto bytes = io::read_file(dir / "mat_e.tns");
    bytes[bytes.size() - 1] = static_cast<char>(bytes[bytes.size() - 1] ^ 0x1);
    io::atomic_write(dir / "mat_e.tns", bytes);
    CHECK_THROWS_WITH_AS(load_kge(dir), doctest::Contains("hash mismatch"), std::runtime_error);
    std::filesystem::remove_all(dir);
}
