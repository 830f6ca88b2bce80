#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "deepknn/knn.hpp"
#include "deepknn/seeds.hpp"
#include "deepknn/stats.hpp"
#include "deepknn/theory.hpp"

using namespace deepknn;

TEST_CASE("gaussian task: class means, boundary side, determinism") {
    Dataset big = gen_gaussian_task(100000, 5);
    double m0x = 0, m0y = 0, m1x = 0, m1y = 0;
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < big.size(); ++i) {
        if (big.labels[i] == 0) {
            m0x += big.features(i, 0);
            m0y += big.features(i, 1);
            ++n0;
        } else {
            m1x += big.features(i, 0);
            m1y += big.features(i, 1);
            ++n1;
        }
    }
    m0x /= n0; m0y /= n0; m1x /= n1; m1y /= n1;
    CHECK(std::abs(m0x - 0.0) < 0.02);
    CHECK(std::abs(m0y - -2.0) < 0.02);
    CHECK(std::abs(m1x - 0.0) < 0.02);
    CHECK(std::abs(m1y - 2.0) < 0.02);
    CHECK(m0y < 0.0);
    CHECK(std::abs(static_cast<double>(n0) - static_cast<double>(n1)) <= 1.0);

    Dataset a = gen_gaussian_task(500, 9);
    Dataset b = gen_gaussian_task(500, 9);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
}

TEST_CASE("grid corruption geometry") {
    SUBCASE("10x10 grid of width 0.5 achieves that spread") {
        CorruptedPlacement g = gen_grid_corruption(100, 0.5);
        CHECK(g.points.rows == 100);
        CHECK(g.spread == 0.5);
        CHECK(min_pairwise_distance(g.points) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("2x2 grid of width 1 centered at the origin") {
        CorruptedPlacement g = gen_grid_corruption(4, 1.0);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(std::abs(std::abs(g.points(i, 0)) - 0.5) < 1e-15);
            CHECK(std::abs(std::abs(g.points(i, 1)) - 0.5) < 1e-15);
        }
    }
    SUBCASE("labels are flipped Bayes labels") {
        CorruptedPlacement g = gen_grid_corruption(16, 0.8, 0.0, 0.0);
        for (std::size_t i = 0; i < 16; ++i) {
            int bayes = g.points(i, 1) >= 0.0 ? 1 : 0;
            CHECK(g.labels[i] == 1 - bayes);
        }
    }
    SUBCASE("non-square count rejected") {
        CHECK_THROWS_AS(gen_grid_corruption(10, 0.5), std::invalid_argument);
    }
}

TEST_CASE("ramp family: margins, Bayes risk, Tsybakov shape") {
    SyntheticFamilySpec ramp;
    ramp.family = EtaFamily::Ramp;
    ramp.dim = 1;
    ramp.alpha = 1.0;
    ramp.c_alpha = 1.0;
    double x = 0.8;
    CHECK(eta(ramp, &x) == doctest::Approx(0.8));
    CHECK(margin(ramp, &x) == doctest::Approx(0.3));
    CHECK(bayes_label(ramp, &x) == 1);
    CHECK(bayes_risk(ramp) == doctest::Approx(0.25));

    // quadrature oracle for the Bayes risk of a sublinear ramp
    SyntheticFamilySpec curved = ramp;
    curved.alpha = 0.5;
    curved.c_alpha = 0.6;
    double acc = 0.0;
    const int steps = 2000000;
    for (int i = 0; i < steps; ++i) {
        double t = (i + 0.5) / steps;
        double e = eta(curved, &t);
        acc += std::min(e, 1.0 - e);
    }
    CHECK(bayes_risk(curved) == doctest::Approx(acc / steps).epsilon(1e-6));
}

TEST_CASE("separated step family has margin 1/2 on its whole support") {
    SyntheticFamilySpec step;
    step.family = EtaFamily::SeparatedStep;
    step.dim = 2;
    step.gap = 0.2;
    Dataset d = sample_family(step, 2000, 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(margin(step, d.features.row(i)) == 0.5);
        CHECK(std::abs(d.features(i, 0) - 0.5) >= 0.1);
        CHECK(d.labels[i] == bayes_label(step, d.features.row(i)));
    }
}

TEST_CASE("spread experiment: accuracy rises with the grid width") {
    std::vector<double> widths{0.1, 0.5, 1.0, 2.0, 3.0};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    SpreadCurve curve = spread_experiment(widths, 100, 500, 10, seeds);
    CHECK(curve.mean_accuracy.size() == widths.size());
    CHECK(curve.mean_accuracy.back() > curve.mean_accuracy.front());

    // a collapsed grid near the boundary drags accuracy below the clean-only run
    SpreadCurve corrupted = spread_experiment({0.05}, 100, 500, 10, seeds);
    double clean_only = 0.0;
    for (std::uint64_t s : seeds) {
        Dataset train = gen_gaussian_task(100, s + seeds::kDataGen);
        Dataset test = gen_gaussian_task(500, s + seeds::kTestGen);
        KnnIndex idx(train.features, train.labels, 2, KnnBackend::KdTree);
        auto results = idx.query_batch(test.features, 10);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < results.size(); ++i)
            if (results[i].prediction == test.labels[i]) ++hits;
        clean_only += static_cast<double>(hits) / test.size();
    }
    clean_only /= seeds.size();
    CHECK(corrupted.mean_accuracy[0] < clean_only);

    SpreadCurve repaired = spread_experiment({0.05}, 100, 500, 10, seeds, 100, true);
    CHECK(corrupted.mean_accuracy[0] < repaired.mean_accuracy[0]);

    // repairing the labels can only help, at every width
    SpreadCurve repaired_all = spread_experiment(widths, 100, 500, 10, seeds, 100, true);
    for (std::size_t i = 0; i < widths.size(); ++i)
        CHECK(repaired_all.mean_accuracy[i] >= curve.mean_accuracy[i] - 1e-12);

    // determinism
    SpreadCurve again = spread_experiment(widths, 100, 500, 10, seeds);
    CHECK(again.mean_accuracy == curve.mean_accuracy);
}

TEST_CASE("clean-samples search honors its crossing contract") {
    std::vector<double> widths{0.3, 2.5};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    CleanSamplesCurve curve =
        clean_samples_to_target(widths, 0.90, 500, 10, seeds, 10, 1500);
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
        REQUIRE(curve.reachable[wi]);
        std::size_t n = curve.required_n[wi];
        auto acc_at = [&](std::size_t m) {
            std::vector<double> a;
            for (auto s : seeds) {
                SpreadCurve c = spread_experiment({widths[wi]}, m, 500, 10, {s});
                a.push_back(c.mean_accuracy[0]);
            }
            return mean(a);
        };
        CHECK(acc_at(n) >= 0.90);
        if (n > 10) CHECK(acc_at(n - 10) < 0.90);
    }
    // the wide grid needs no more clean data than the tight one
    CHECK(curve.required_n[1] <= curve.required_n[0]);
}

TEST_CASE("far-away corruption matches the corruption-free baseline") {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    // width 50 pushes every grid point far outside the data support;
    // a 2x2 grid at width 1000 serves as the corruption-free reference
    CleanSamplesCurve far =
        clean_samples_to_target({50.0}, 0.90, 500, 10, seeds, 10, 1500, 100);
    CleanSamplesCurve base =
        clean_samples_to_target({1000.0}, 0.90, 500, 10, seeds, 10, 1500, 4);
    REQUIRE(far.reachable[0]);
    REQUIRE(base.reachable[0]);
    double a = static_cast<double>(far.required_n[0]);
    double b = static_cast<double>(base.required_n[0]);
    CHECK(std::abs(a - b) <= 0.2 * b + 10.0);
}

TEST_CASE("margin agreement: fully separated labels give zero violations") {
    SyntheticFamilySpec step;
    step.family = EtaFamily::SeparatedStep;
    step.dim = 1;
    step.gap = 0.2;
    Matrix tests = sample_features(step, 1000, 77);
    AgreementReport rep = margin_agreement_check(step, 2000, 20, nullptr, tests, 0.5, 5);
    CHECK(rep.tested == 1000);
    CHECK(rep.violations == 0);
}

TEST_CASE("margin agreement: spread-out corruption is tolerated, a cluster is not") {
    SyntheticFamilySpec ramp;
    ramp.family = EtaFamily::Ramp;
    ramp.dim = 2;
    ramp.alpha = 1.0;
    ramp.c_alpha = 1.0;

    Matrix tests = sample_features(ramp, 1500, 33);
    CorruptedPlacement spread = make_grid_placement(ramp, 16, 0.25, 0.5);
    AgreementReport rep_spread = margin_agreement_check(ramp, 2000, 20, &spread, tests, 0.15, 6);
    CHECK(rep_spread.violation_fraction < 0.02);

    CorruptedPlacement cluster = make_cluster_placement(ramp, 40, {0.8, 0.5});
    AgreementReport rep_cluster = margin_agreement_check(ramp, 2000, 20, &cluster, tests, 0.15, 6);
    CHECK(rep_cluster.violation_fraction > rep_spread.violation_fraction);

    CHECK_THROWS_AS(margin_agreement_check(ramp, 200, 5, nullptr, tests, 0.9, 1),
                    std::invalid_argument);
}

TEST_CASE("margin thresholds shrink as the sample grows") {
    SyntheticFamilySpec ramp;
    ramp.family = EtaFamily::Ramp;
    ramp.dim = 1;
    RateCurve curve = rate_experiment(ramp, {500, 1000, 2000, 4000, 8000}, 2.0, {1, 2, 3}, 3000);
    CHECK(curve.values[0] > curve.values.back());
    // doubling n never doubles the threshold
    for (std::size_t i = 1; i < curve.values.size(); ++i)
        CHECK(curve.values[i] <= 2.0 * curve.values[i - 1]);
    CHECK(curve.nonincreasing_up_to_one_inversion);
    CHECK(curve.slope < 0.0);
}

TEST_CASE("excess risk shrinks with n and tolerates a spread-out placement") {
    SyntheticFamilySpec ramp;
    ramp.family = EtaFamily::Ramp;
    ramp.dim = 1;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4};
    RateCurve curve = excess_risk_experiment(ramp, {500, 2000, 8000}, 1.0, seeds, 8000);
    CHECK(curve.values[0] > curve.values[2]);
    CHECK(curve.slope < 0.0);

    // corruption spread far apart barely moves the risk
    CorruptedPlacement spread = make_grid_placement(ramp, 8, 0.12, 0.5);
    RateCurve with_c = excess_risk_experiment(ramp, {2000, 4000}, 1.0, seeds, 8000, &spread);
    RateCurve without_c = excess_risk_experiment(ramp, {2000, 4000}, 1.0, seeds, 8000);
    CHECK(std::abs(with_c.values[0] - without_c.values[0]) < 0.02);
}

TEST_CASE("blob generator is balanced and deterministic") {
    Dataset d = gen_blobs(10, 5000, 2, 6.0, 1.0, 11);
    std::vector<int> counts(10, 0);
    for (int l : d.labels) counts[l]++;
    for (int c = 0; c < 10; ++c) CHECK(counts[c] == 500);
    Dataset e = gen_blobs(10, 5000, 2, 6.0, 1.0, 11);
    CHECK(d.features == e.features);
}

TEST_CASE("rank statistics used by the acceptance gates") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> up{1.0, 1.1, 1.15, 1.3, 1.31};
    CHECK(spearman_rho(x, up) == doctest::Approx(1.0));
    std::vector<double> down{5.0, 4.0, 3.0, 2.0, 1.0};
    CHECK(spearman_rho(x, down) == doctest::Approx(-1.0));
    std::vector<double> ties{1.0, 1.0, 2.0, 2.0, 3.0};
    CHECK(spearman_rho(ties, ties) == doctest::Approx(1.0));

    std::vector<double> lx{0.0, 1.0, 2.0};
    std::vector<double> ly{1.0, 0.0, -1.0};
    CHECK(linfit_slope(lx, ly) == doctest::Approx(-1.0));
}
