#include "doctest.h"

#include <boost/math/distributions/gamma.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "ecrp/data.hpp"
#include "ecrp/rng.hpp"
#include "ecrp/validate.hpp"

using namespace ecrp;

TEST_CASE("independence test") {
    std::vector<double> x{1, 2, 3, 4, 5, 6}, y{2, -1, 0, 1, -2, 0};
    // Uncorrelated by construction: sum (x - 3.5) y = 0.
    y = {1, -1, -1, -1, -1, 1};
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - 3.5) * y[i];
    REQUIRE(sxy == 0.0);
    auto r0 = independence_test(x, y, 0.05);
    CHECK(r0.statistic == doctest::Approx(0.0).scale(1.0));
    CHECK_FALSE(r0.reject);

    auto r1 = independence_test(x, x, 0.05);
    CHECK(r1.statistic == std::numeric_limits<double>::infinity());
    CHECK(r1.reject);

    std::vector<double> c(6, 2.0);
    CHECK_THROWS_AS(independence_test(x, c, 0.05), DomainError);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    std::vector<double> a(15), b(15);
    for (int i = 0; i < 15; ++i) {
        a[static_cast<std::size_t>(i)] = N(rng);
        b[static_cast<std::size_t>(i)] = N(rng);
    }
    CHECK(independence_test(a, b, 0.05).statistic == doctest::Approx(independence_test(b, a, 0.05).statistic));
    // t_{13} two-sided 5% critical value.
    CHECK(independence_test(a, b, 0.05).critical == doctest::Approx(2.160369).epsilon(1e-6));
}

TEST_CASE("independence test calibration") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> N;
    const int reps = 10000, T = 25;
    int rejections = 0;
    std::vector<double> a(T), b(T);
    for (int r = 0; r < reps; ++r) {
        for (int i = 0; i < T; ++i) {
            a[static_cast<std::size_t>(i)] = N(rng);
            b[static_cast<std::size_t>(i)] = N(rng);
        }
        rejections += independence_test(a, b, 0.05).reject;
    }
    double rate = static_cast<double>(rejections) / reps;
    CHECK(rate > 0.04);
    CHECK(rate < 0.06);
}

TEST_CASE("Breusch-Godfrey") {
    std::vector<double> c(30, 1.0);
    CHECK_THROWS_AS(serial_correlation_test(c, 1, 0.05), DomainError);
    CHECK_THROWS_AS(serial_correlation_test(std::vector<double>{1, 2, 3, 4}, 2, 0.05), DomainError);

    SUBCASE("power against AR(1)") {
        std::mt19937_64 rng(8);
        std::normal_distribution<double> N;
        int rej = 0;
        for (int r = 0; r < 500; ++r) {
            std::vector<double> x(50);
            double prev = N(rng) / std::sqrt(1 - 0.64);
            for (double& v : x) {
                v = 0.8 * prev + N(rng);
                prev = v;
            }
            rej += serial_correlation_test(x, 1, 0.05).reject;
        }
        CHECK(rej > 450);
    }
    SUBCASE("null calibration") {
        std::mt19937_64 rng(12);
        std::normal_distribution<double> N;
        int rej = 0;
        const int reps = 10000;
        std::vector<double> x(200);
        for (int r = 0; r < reps; ++r) {
            for (double& v : x) v = N(rng);
            rej += serial_correlation_test(x, 2, 0.05).reject;
        }
        double rate = static_cast<double>(rej) / reps;
        CHECK(rate > 0.04);
        CHECK(rate < 0.06);
    }
}

TEST_CASE("Kolmogorov distribution") {
    // Known asymptotic critical values.
    CHECK(kolmogorov_quantile(0.95) == doctest::Approx(1.3581).epsilon(1e-4));
    CHECK(kolmogorov_quantile(0.99) == doctest::Approx(1.6276).epsilon(1e-4));
    CHECK(kolmogorov_cdf(kolmogorov_quantile(0.9)) == doctest::Approx(0.9).epsilon(1e-10));
    std::vector<double> one{2.0};
    CHECK(ks_statistic(one, [](double x) { return x < 2.0 ? 0.0 : (x > 2.0 ? 1.0 : 0.5); }) == doctest::Approx(0.5));
}

TEST_CASE("KS gamma test") {
    std::vector<double> short_series{1, 1, 1, 1};
    CHECK_THROWS_AS(ks_gamma_test(short_series, 0.1, 0.05), DomainError);
    std::vector<double> ok{0.9, 1.1, 1.0, 0.95, 1.05};
    CHECK_THROWS_AS(ks_gamma_test(ok, 0.0, 0.05), DomainError);

    SUBCASE("null calibration") {
        Rng rng = make_rng(5, {});
        int rej = 0;
        const int reps = 1000;
        std::vector<double> x(40);
        for (int r = 0; r < reps; ++r) {
            for (double& v : x) v = draw_unit_gamma(rng, 0.05);
            rej += ks_gamma_test(x, 0.05, 0.05).reject;
        }
        double rate = static_cast<double>(rej) / reps;
        CHECK(rate > 0.03);
        CHECK(rate < 0.07);
    }
    SUBCASE("power against a larger variance") {
        Rng rng = make_rng(6, {});
        int rej = 0;
        std::vector<double> x(60);
        for (int r = 0; r < 200; ++r) {
            for (double& v : x) v = draw_unit_gamma(rng, 0.5);
            rej += ks_gamma_test(x, 0.05, 0.05).reject;
        }
        CHECK(rej > 180);
    }
}

TEST_CASE("information criteria") {
    auto z = information_criteria(0.0, 0, 10);
    CHECK(z.aic == 0.0);
    CHECK(z.bic == 0.0);
    auto ic = information_criteria(-100.0, 10, 100);
    CHECK(ic.aic == doctest::Approx(220.0));
    CHECK(ic.bic == doctest::Approx(10.0 * std::log(100.0) + 200.0));
    CHECK_THROWS_AS(information_criteria(0.0, 1, 0), DomainError);
}

TEST_CASE("cross variance check") {
    ModelParams p = synth_demo_params();
    auto grid = ExposureGrid::constant(1990, 30, p.age_labels, 1e5);
    MortalityDataset ds = synth_generate(p, grid, 91);
    TransformedCounts tc = transform_iid(ds, p);
    std::vector<ModelParams> samples(200, p);
    auto ok = cross_variance_check(tc, samples, 7);
    CHECK(ok.size() == 2);
    CHECK(pass_rate(ok) >= 0.5);

    // Grossly inflated model variances put the data below the band.
    ModelParams big = p;
    big.sigma2 = {1.0, 1.0};
    std::vector<ModelParams> wrong(200, big);
    auto bad = cross_variance_check(tc, wrong, 7);
    for (const auto& r : bad) CHECK(r.reject);

    SUBCASE("degenerate band") {
        ModelParams flat = ModelParams::make(1, 1, 2000.0);
        flat.sigma2 = {0.0};
        auto g1 = ExposureGrid::constant(2000, 5, {0}, 0.0);
        MortalityDataset zero(g1, 2);
        TransformedCounts z = transform_iid(zero, flat);
        std::vector<ModelParams> s(20, flat);
        auto r = cross_variance_check(z, s, 1);
        CHECK_FALSE(r[0].reject);
    }
}

TEST_CASE("batch tests and pass rate") {
    ModelParams p = synth_demo_params();
    auto grid = ExposureGrid::constant(1990, 30, p.age_labels, 1e5);
    FactorSeries lambda;
    MortalityDataset ds = synth_generate(p, grid, 13, {}, &lambda);
    NormalizedCounts n = normalize_counts(transform_iid(ds, p), lambda);
    auto ind = independence_tests(n, 0.05);
    // 10 cells, 3 causes: pairs with different causes.
    CHECK(ind.size() == static_cast<std::size_t>((30 * 30 - 10 * 3 * 10) / 2));
    auto bg = serial_correlation_tests(n, 2, 0.05);
    CHECK(bg.size() == 60);
    CHECK(pass_rate(ind) > 0.8);
    CHECK(pass_rate(bg) > 0.8);
    CHECK(pass_rate(std::vector<TestReport>{}) == 1.0);
}
