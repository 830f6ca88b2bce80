#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "deepknn/errors.hpp"
#include "deepknn/net.hpp"
#include "deepknn/rng.hpp"
#include "deepknn/theory.hpp"

using namespace deepknn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal();
    return m;
}

LossBatch random_plain_batch(std::size_t n, std::size_t d, int K, Rng& rng) {
    LossBatch b;
    b.features = random_matrix(n, d, rng);
    b.labels.resize(n);
    for (int& l : b.labels) l = static_cast<int>(rng.uniform_int(K));
    b.rows.assign(n, LossBatch::Row::Plain);
    return b;
}

Matrix random_row_stochastic(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            m(i, j) = rng.uniform() + 0.05;
            sum += m(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) m(i, j) /= sum;
    }
    return m;
}

bool nets_identical(const DenseNet& a, const DenseNet& b) {
    for (std::size_t l = 0; l < a.layer_count(); ++l) {
        if (!(a.weights[l] == b.weights[l])) return false;
        if (a.biases[l] != b.biases[l]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("init is deterministic and honors the architecture") {
    Architecture arch{3, {5, 4}, 2};
    DenseNet a = init(arch, 12);
    DenseNet b = init(arch, 12);
    CHECK(nets_identical(a, b));
    DenseNet c = init(arch, 13);
    CHECK(!nets_identical(a, c));
    CHECK(a.parameter_count() == 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);

    CHECK_THROWS_AS(init(Architecture{3, {0}, 2}, 1), std::invalid_argument);
}

TEST_CASE("no hidden layers gives a linear model") {
    Architecture arch{2, {}, 3};
    DenseNet net = init(arch, 5);
    double x[2] = {0.7, -1.3};
    auto z = logits(net, x);
    for (int c = 0; c < 3; ++c) {
        double expected = net.biases[0][c] + net.weights[0](c, 0) * x[0] +
                          net.weights[0](c, 1) * x[1];
        CHECK(z[c] == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("zero weights give a uniform softmax") {
    Architecture arch{2, {4}, 5};
    DenseNet net = init(arch, 1);
    for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    double x[2] = {3.0, -2.0};
    auto p = softmax_probs(net, x);
    for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("softmax shift invariance and normalization") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> z(6);
        for (double& v : z) v = 10.0 * rng.normal();
        auto p = stable_softmax(z);
        double sum = std::accumulate(p.begin(), p.end(), 0.0);
        CHECK(std::abs(sum - 1.0) < 1e-12);
        for (double v : p) CHECK(v > 0.0);

        std::vector<double> shifted = z;
        for (double& v : shifted) v += 123.456;
        auto ps = stable_softmax(shifted);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(ps[i] == doctest::Approx(p[i]).epsilon(1e-12));

        // long-double reference evaluation
        long double m = z[0];
        for (double v : z) m = std::max<long double>(m, v);
        long double denom = 0.0;
        for (double v : z) denom += expl((long double)v - m);
        for (std::size_t i = 0; i < z.size(); ++i) {
            long double ref = expl((long double)z[i] - m) / denom;
            CHECK(p[i] == doctest::Approx(static_cast<double>(ref)).epsilon(1e-13));
        }
    }
}

TEST_CASE("gradient check: plain cross-entropy") {
    Rng rng(7);
    DenseNet net = init(Architecture{3, {6}, 4}, 21);
    LossBatch batch = random_plain_batch(12, 3, 4, rng);
    auto report = gradient_check(net, batch);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("gradient check: corrected loss with a random matrix") {
    Rng rng(9);
    DenseNet net = init(Architecture{3, {6}, 4}, 22);
    LossBatch batch = random_plain_batch(12, 3, 4, rng);
    batch.rows.assign(12, LossBatch::Row::Corrected);
    batch.correction = random_row_stochastic(4, 4, rng);
    auto report = gradient_check(net, batch);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("gradient check: soft labels") {
    Rng rng(10);
    DenseNet net = init(Architecture{3, {6}, 4}, 23);
    LossBatch batch = random_plain_batch(12, 3, 4, rng);
    batch.rows.assign(12, LossBatch::Row::Soft);
    batch.soft = random_row_stochastic(12, 4, rng);
    auto report = gradient_check(net, batch);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("corrected loss with the identity matrix equals plain cross-entropy") {
    Rng rng(11);
    DenseNet net = init(Architecture{2, {5}, 3}, 24);
    LossBatch plain = random_plain_batch(10, 2, 3, rng);
    LossBatch corrected = plain;
    corrected.rows.assign(10, LossBatch::Row::Corrected);
    corrected.correction = Matrix(3, 3);
    for (int i = 0; i < 3; ++i) corrected.correction(i, i) = 1.0;
    CHECK(batch_loss(net, corrected) == doctest::Approx(batch_loss(net, plain)).epsilon(1e-12));
}

TEST_CASE("soft loss with one-hot targets equals plain cross-entropy") {
    Rng rng(12);
    DenseNet net = init(Architecture{2, {5}, 3}, 25);
    LossBatch plain = random_plain_batch(10, 2, 3, rng);
    LossBatch soft = plain;
    soft.rows.assign(10, LossBatch::Row::Soft);
    soft.soft = Matrix(10, 3);
    for (std::size_t i = 0; i < 10; ++i) soft.soft(i, plain.labels[i]) = 1.0;
    CHECK(batch_loss(net, soft) == doctest::Approx(batch_loss(net, plain)).epsilon(1e-14));
}

TEST_CASE("zero epochs leave the parameters unchanged") {
    Dataset d = gen_blobs(2, 40, 2, 4.0, 1.0, 3);
    Architecture arch{2, {4}, 2};
    DenseNet net = init(arch, 6);
    DenseNet before = net;
    TrainConfig cfg;
    cfg.epochs = 0;
    train(net, d, cfg);
    CHECK(nets_identical(net, before));
}

TEST_CASE("training is bit-for-bit deterministic") {
    Dataset d = gen_blobs(3, 120, 2, 5.0, 1.0, 4);
    Architecture arch{2, {8}, 3};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 99;
    DenseNet a = init(arch, 99);
    DenseNet b = init(arch, 99);
    train(a, d, cfg);
    train(b, d, cfg);
    CHECK(nets_identical(a, b));
}

TEST_CASE("XOR trains to perfect accuracy") {
    Dataset d;
    d.num_classes = 2;
    d.features = Matrix(4, 2);
    d.features(0, 0) = 0; d.features(0, 1) = 0;
    d.features(1, 0) = 0; d.features(1, 1) = 1;
    d.features(2, 0) = 1; d.features(2, 1) = 0;
    d.features(3, 0) = 1; d.features(3, 1) = 1;
    d.labels = {0, 1, 1, 0};

    Architecture arch{2, {8}, 2};
    DenseNet net = init(arch, 17);
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.seed = 17;
    train(net, d, cfg);
    CHECK(error_rate(net, d) == 0.0);
}

TEST_CASE("separable Gaussians reach 99% training accuracy within 50 epochs") {
    Dataset d = gen_blobs(2, 500, 2, 8.0, 1.0, 21);  // centers 16 sigma apart
    Architecture arch{2, {16}, 2};
    DenseNet net = init(arch, 22);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 22;
    train(net, d, cfg);
    CHECK(error_rate(net, d) <= 0.01);
}

TEST_CASE("diverging training reports the offending step") {
    Dataset d = gen_blobs(2, 64, 2, 1e6, 1.0, 5);
    Architecture arch{2, {8}, 2};
    DenseNet net = init(arch, 30);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 1e18;
    cfg.seed = 30;
    try {
        train(net, d, cfg);
        WARN("training stayed finite; divergence path not exercised");
    } catch (const TrainingDiverged& e) {
        CHECK(e.step() >= 0);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("model save/load round trip") {
    Architecture arch{3, {7, 5}, 4};
    DenseNet net = init(arch, 44);
    auto path = (std::filesystem::temp_directory_path() / "deepknn_model.json").string();
    save_model(net, path);
    DenseNet loaded = load_model(path);
    CHECK(nets_identical(net, loaded));
    CHECK(loaded.arch.hidden == arch.hidden);
    std::remove(path.c_str());
}

TEST_CASE("predict breaks logit ties toward the lowest class") {
    Architecture arch{1, {}, 3};
    DenseNet net = init(arch, 2);
    for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
    double x = 1.0;
    CHECK(predict(net, &x) == 0);
}
