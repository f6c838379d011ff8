#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kgmc/gradcheck.hpp"
#include "kgmc/optim.hpp"
#include "kgmc/tape.hpp"
#include "kgmc/util/io.hpp"
#include "kgmc/util/rng.hpp"

#include <cmath>
#include <filesystem>
#include <functional>

using namespace kgmc;

namespace {
Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.v) v = scale * rng.uniform(-1.0, 1.0);
    return t;
}
}  // namespace

TEST_CASE("grad_check accepts the analytic gradient of 0.5*||w||^2") {
    Rng rng(7);
    std::vector<double> point(12);
    for (double& v : point) v = rng.uniform(-2.0, 2.0);
    auto f = [](const std::vector<double>& w) {
        double s = 0.0;
        for (double x : w) s += x * x;
        return 0.5 * s;
    };
    const auto rep = grad_check(f, point, point, 1e-5);  // gradient of f is w itself
    CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("grad_check flags a wrong gradient") {
    std::vector<double> point{1.0, 2.0};
    auto f = [](const std::vector<double>& w) { return w[0] * w[0] + w[1]; };
    std::vector<double> wrong{2.5, 1.0};  // true is {2.0, 1.0}
    const auto rep = grad_check(f, wrong, point, 1e-5);
    CHECK(rep.max_rel_err > 1e-2);
    CHECK(rep.worst_coord == 0);
}

TEST_CASE("grad_check reports non-finite evaluations with the coordinate") {
    std::vector<double> point{0.0};
    auto f = [](const std::vector<double>& w) { return std::log(w[0]); };
    CHECK_THROWS_WITH_AS(grad_check(f, {1.0}, point, 1e-5),
                         doctest::Contains("coordinate 0"), std::runtime_error);
}

TEST_CASE("sigmoid derivative at zero is exactly 1/4") {
    Tape tape;
    const Var x = tape.input(Tensor::scalar(0.0));
    const Var y = tape.sigmoid(x);
    tape.backward(y);
    CHECK(tape.value(y).v[0] == 0.5);
    CHECK(tape.grad(x).v[0] == 0.25);
}

TEST_CASE("batch norm train-mode gradient matches central differences on an 8x4 batch") {
    Rng rng(21);
    const std::size_t B = 8, D = 4;
    const Tensor x0 = random_tensor(rng, {B, D});
    const Tensor gain0 = random_tensor(rng, {D});
    const Tensor bias0 = random_tensor(rng, {D});
    const Tensor weights = random_tensor(rng, {B, D});  // fixed loss weights

    // flat layout: x | gain | bias
    auto unpack = [&](const std::vector<double>& p) {
        Tensor x = x0, g = gain0, b = bias0;
        std::copy(p.begin(), p.begin() + B * D, x.v.begin());
        std::copy(p.begin() + B * D, p.begin() + B * D + D, g.v.begin());
        std::copy(p.begin() + B * D + D, p.end(), b.v.begin());
        return std::tuple<Tensor, Tensor, Tensor>{x, g, b};
    };
    auto f = [&](const std::vector<double>& p) {
        auto [x, g, b] = unpack(p);
        Tape tape;
        BnStats stats(D);
        const Var vx = tape.input(x), vg = tape.input(g), vb = tape.input(b);
        const Var y = tape.batchnorm_train(vx, vg, vb, stats, 1e-5, 0.1);
        const Var loss = tape.sum(tape.mul(y, tape.input(weights)));
        return tape.value(loss).v[0];
    };

    std::vector<double> point;
    point.insert(point.end(), x0.v.begin(), x0.v.end());
    point.insert(point.end(), gain0.v.begin(), gain0.v.end());
    point.insert(point.end(), bias0.v.begin(), bias0.v.end());

    Tape tape;
    BnStats stats(D);
    const Var vx = tape.input(x0), vg = tape.input(gain0), vb = tape.input(bias0);
    const Var y = tape.batchnorm_train(vx, vg, vb, stats, 1e-5, 0.1);
    const Var loss = tape.sum(tape.mul(y, tape.input(weights)));
    tape.backward(loss);
    std::vector<double> analytic;
    analytic.insert(analytic.end(), tape.grad(vx).v.begin(), tape.grad(vx).v.end());
    analytic.insert(analytic.end(), tape.grad(vg).v.begin(), tape.grad(vg).v.end());
    analytic.insert(analytic.end(), tape.grad(vb).v.begin(), tape.grad(vb).v.end());

    const auto rep = grad_check(f, analytic, point, 1e-5);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("batch norm requires batch >= 2 in train mode and pushes running stats") {
    Tape tape;
    BnStats stats(2);
    const Var x1 = tape.input(Tensor({1, 2}, {1.0, 2.0}));
    const Var g = tape.input(Tensor({2}, {1.0, 1.0}));
    const Var b = tape.input(Tensor({2}, {0.0, 0.0}));
    CHECK_THROWS_WITH_AS(tape.batchnorm_train(x1, g, b, stats, 1e-5, 0.1),
                         doctest::Contains("eval mode"), std::runtime_error);

    // identical rows normalize to zero before gain/bias
    const Var x = tape.input(Tensor({4, 2}, {3.0, -1.0, 3.0, -1.0, 3.0, -1.0, 3.0, -1.0}));
    const Var y = tape.batchnorm_train(x, g, b, stats, 1e-5, 0.1);
    for (double v : tape.value(y).v) CHECK(v == 0.0);
    CHECK(stats.mean[0] == doctest::Approx(0.3));  // 0.9*0 + 0.1*3
}

TEST_CASE("tape composite ops match central differences") {
    Rng rng(31);
    const std::size_t B = 3, I = 4, O = 5;
    const Tensor a0 = random_tensor(rng, {B, I});
    const Tensor w0 = random_tensor(rng, {I, O});
    const Tensor b0 = random_tensor(rng, {O});
    const Tensor g0 = random_tensor(rng, {B, I});  // same shape as a0 for mul/rowwise ops
    const Tensor weights = random_tensor(rng, {B, O});

    auto build = [&](const Tensor& a, const Tensor& w, const Tensor& b, const Tensor& g, Tape& tape,
                     Var& va, Var& vw, Var& vb, Var& vg) {
        va = tape.input(a);
        vw = tape.input(w);
        vb = tape.input(b);
        vg = tape.input(g);
        const Var mm = tape.affine(va, vw, vb);                       // matmul + add_rowvec
        const Var sig = tape.sigmoid(mm);                             // [B,O]
        const Var weighted = tape.mul(sig, tape.input(weights));      // elementwise
        const Var rd = tape.rowwise_dot(va, vg);                      // [B]
        const Var mr = tape.mean_rows(tape.mul(va, vg));              // [B]
        const Var nt = tape.matmul_nt(va, vg);                        // [B,B]
        return tape.add(tape.add(tape.sum(weighted), tape.sum(rd)),
                        tape.add(tape.sum(mr), tape.sum(nt)));
    };

    const std::size_t na = a0.v.size(), nw = w0.v.size(), nb = b0.v.size();
    auto f = [&](const std::vector<double>& p) {
        Tensor a = a0, w = w0, b = b0, g = g0;
        std::copy(p.begin(), p.begin() + na, a.v.begin());
        std::copy(p.begin() + na, p.begin() + na + nw, w.v.begin());
        std::copy(p.begin() + na + nw, p.begin() + na + nw + nb, b.v.begin());
        std::copy(p.begin() + na + nw + nb, p.end(), g.v.begin());
        Tape tape;
        Var va, vw, vb, vg;
        const Var loss = build(a, w, b, g, tape, va, vw, vb, vg);
        return tape.value(loss).v[0];
    };

    std::vector<double> point;
    for (const Tensor* t : {&a0, &w0, &b0, &g0})
        point.insert(point.end(), t->v.begin(), t->v.end());

    Tape tape;
    Var va, vw, vb, vg;
    const Var loss = build(a0, w0, b0, g0, tape, va, vw, vb, vg);
    tape.backward(loss);
    std::vector<double> analytic;
    for (const Var* v : {&va, &vw, &vb, &vg})
        analytic.insert(analytic.end(), tape.grad(*v).v.begin(), tape.grad(*v).v.end());

    const auto rep = grad_check(f, analytic, point, 1e-5);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("SGD: quadratic descent example and fixed point") {
    ParamStore store;
    store.add("w", Tensor::scalar(1.0));
    // f(w) = w^2/2, grad = w
    store.step({{"w", Tensor::scalar(1.0)}}, OptimConfig::sgd(0.5));
    CHECK(store.get("w").v[0] == 0.5);

    ParamStore s2;
    s2.add("w", Tensor::scalar(0.7));
    s2.step({{"w", Tensor::scalar(0.0)}}, OptimConfig::sgd(0.5));
    CHECK(s2.get("w").v[0] == 0.7);

    ParamStore s3;
    s3.add("w", Tensor::scalar(0.7));
    s3.step({{"w", Tensor::scalar(0.0)}}, OptimConfig::adamw(1e-3, 0.0));
    CHECK(s3.get("w").v[0] == 0.7);
}

TEST_CASE("AdamW decoupled decay shrinks parameters exactly under zero gradients") {
    ParamStore store;
    store.add("w", Tensor({2}, {2.0, -4.0}));
    const double lr = 1e-3, wd = 0.01;
    store.step({{"w", Tensor({2}, {0.0, 0.0})}}, OptimConfig::adamw(lr, wd));
    CHECK(store.get("w").v[0] == 2.0 - lr * wd * 2.0);
    CHECK(store.get("w").v[1] == -4.0 - lr * wd * (-4.0));
}

TEST_CASE("AdamW decreases a convex quadratic monotonically after warm-up") {
    ParamStore store;
    store.add("w", Tensor({3}, {1.0, -2.0, 0.5}));
    auto value = [&]() {
        double s = 0.0;
        for (double v : store.get("w").v) s += v * v;
        return 0.5 * s;
    };
    double prev = value();
    for (int step = 1; step <= 200; ++step) {
        store.step({{"w", store.get("w")}}, OptimConfig::adamw(1e-3, 0.0));
        const double cur = value();
        if (step >= 2) CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("optimizer rejects non-finite gradients naming the parameter") {
    ParamStore store;
    store.add("theta", Tensor::scalar(1.0));
    CHECK_THROWS_WITH_AS(
        store.step({{"theta", Tensor::scalar(std::nan(""))}}, OptimConfig::sgd(0.1)),
        doctest::Contains("theta"), std::runtime_error);
}

TEST_CASE("seeded runs produce bit-identical trajectories") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        ParamStore store;
        store.add("w", Tensor({4}, {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()}));
        for (int i = 0; i < 50; ++i) {
            Tensor g({4});
            for (std::size_t j = 0; j < 4; ++j)
                g.v[j] = store.get("w").v[j] + 0.01 * rng.gaussian();
            store.step({{"w", g}}, OptimConfig::adamw(1e-3));
        }
        return store.get("w").v;
    };
    CHECK(run(5) == run(5));
    CHECK(run(5) != run(6));
}

TEST_CASE("TNS1 tensors round-trip through f32 persistence") {
    Rng rng(11);
    const auto dir = std::filesystem::temp_directory_path() / "kgmc_tns_test";
    std::filesystem::create_directories(dir);
    Tensor t = random_tensor(rng, {3, 5});
    for (double& v : t.v) v = static_cast<double>(static_cast<float>(v));  // f32-representable
    io::write_tensor(dir / "t.tns", t.shape, t.v);
    const io::TensorFile back = io::read_tensor(dir / "t.tns");
    CHECK(back.shape == t.shape);
    CHECK(back.values == t.v);
    std::filesystem::remove_all(dir);
}

TEST_CASE("FEAT files round-trip and validate") {
    const auto dir = std::filesystem::temp_directory_path() / "kgmc_feat_test";
    std::filesystem::create_directories(dir);
    io::FeatureFile f;
    f.dim = 3;
    f.ids = {"m1", "m2"};
    f.rows = {{1.0, 2.0, 3.0}, {-1.0, 0.5, 0.25}};
    io::write_features(dir / "x.feat", f);
    const io::FeatureFile back = io::read_features(dir / "x.feat");
    CHECK(back.dim == 3);
    CHECK(back.ids == f.ids);
    CHECK(back.rows == f.rows);
    std::filesystem::remove_all(dir);
}

TEST_CASE("FNV-1a hash matches the published test vectors") {
    CHECK(io::fnv1a_hex("") == "cbf29ce484222325");
    CHECK(io::fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(io::fnv1a_hex("foobar") == "85944171f73967e8");
}
