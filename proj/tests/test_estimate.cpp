#include "doctest.h"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "ecrp/data.hpp"
#include "ecrp/likelihood.hpp"
#include "ecrp/map_estimates.hpp"
#include "ecrp/mcmc.hpp"
#include "ecrp/mm.hpp"
#include "ecrp/rng.hpp"
#include "oracles/counts.hpp"

using namespace ecrp;

namespace {

// One age group; only the male cell carries exposure.
MortalityDataset one_cell(int n_causes, int n_years, double exposure) {
    auto grid = ExposureGrid::constant(2000, n_years, {60}, exposure);
    for (int ti = 0; ti < n_years; ++ti) grid(0, Gender::female, ti) = 0.0;
    return MortalityDataset(grid, n_causes);
}

// log x - digamma(x) straight from Boost.
double f_oracle(double x) { return std::log(x) - boost::math::digamma(x); }

// Root of f(x) = c in x by bisection on the oracle.
double oracle_sigma2(const std::vector<double>& lambda) {
    double c = 0.0;
    for (double l : lambda) c -= 1.0 + std::log(l) - l;
    c /= static_cast<double>(lambda.size());
    double lo = 1e-6, hi = 1e12;
    for (int i = 0; i < 400; ++i) {
        double mid = std::sqrt(lo * hi);
        (f_oracle(mid) > c ? lo : hi) = mid;
    }
    return 1.0 / std::sqrt(lo * hi);
}

}  // namespace

TEST_CASE("log likelihood, K = 0 single cell") {
    MortalityDataset ds = one_cell(1, 1, 4.0);  // rho = 4 * 0.5
    ds.deaths(0, Gender::male, 0, 0) = 3;
    ModelParams p = ModelParams::make(1, 0, 2000.0);
    CHECK(log_likelihood(ds, p) == doctest::Approx(-2.0 + 3.0 * std::log(2.0) - std::log(6.0)).epsilon(1e-14));
    CHECK(log_posterior(ds, p, FactorSeries(0, 1), PriorSpec::uniform()) == doctest::Approx(log_likelihood(ds, p)));
}

TEST_CASE("log likelihood collapses to the negative binomial for one cell") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        double s2 = 0.001 + 2.0 * U(rng);
        ModelParams p = ModelParams::make(1, 1, 2000.0);
        p.sigma2 = {s2};
        p.alpha[1] = -4.0 + 3.0 * U(rng);
        p.u[3] = 4.0 * U(rng) - 2.0;
        double e = 100.0 + 1e5 * U(rng);
        MortalityDataset ds = one_cell(2, 1, e);
        auto n = static_cast<std::int64_t>(300.0 * U(rng));
        ds.deaths(0, Gender::male, 1, 0) = n;
        double m = central_death_rate(p, 0, Gender::male, 2000);
        auto w = cause_weights(p, 0, Gender::male, 2000);
        double rho0 = e * m * w[0], rho1 = e * m * w[1];
        // Idiosyncratic cell has no deaths and contributes -rho0.
        CHECK(log_likelihood(ds, p) + rho0 == doctest::Approx(oracle::negbin_log_pmf(n, rho1, s2)).epsilon(1e-10));
    }
}

TEST_CASE("log likelihood approaches Poisson for tiny variance") {
    MortalityDataset ds = one_cell(2, 3, 1000.0);
    for (int ti = 0; ti < 3; ++ti) {
        ds.deaths(0, Gender::male, 0, ti) = 240 + ti;
        ds.deaths(0, Gender::male, 1, ti) = 255 - 2 * ti;
    }
    ModelParams p = ModelParams::make(1, 1, 2000.0);
    p.sigma2 = {1e-8};
    double ll = log_likelihood(ds, p);
    p.sigma2 = {0.0};
    CHECK(std::abs(ll - log_likelihood(ds, p)) < 1e-3);
}

TEST_CASE("log gamma ratio branches") {
    for (double r : {0.5, 3.0, 1e5, 1e7, 1e10})
        for (std::int64_t n : {0, 1, 5, 31, 33, 500, 100000}) {
            double ref = 0.0;
            if (n < 2000) {
                for (std::int64_t i = 0; i < n; ++i) ref += std::log(r + static_cast<double>(i));
            } else {
                ref = std::lgamma(r + static_cast<double>(n)) - std::lgamma(r);
            }
            if (r >= 1e7 && n >= 2000) continue;  // reference itself loses precision
            CHECK(log_gamma_ratio(r, n) == doctest::Approx(ref).epsilon(1e-11));
        }
}

TEST_CASE("log likelihood invariant under a common shift of u and v") {
    ModelParams p = synth_demo_params();
    auto grid = ExposureGrid::constant(2000, 6, p.age_labels, 1e4);
    MortalityDataset ds = synth_generate(p, grid, 31);
    double ll = log_likelihood(ds, p);
    for (int grp = 0; grp < p.n_groups(); ++grp)
        for (int k = 0; k < p.n_causes(); ++k) {
            p.u[static_cast<std::size_t>(p.weight_index(grp, k))] += 1.7 - 0.1 * grp;
            p.v[static_cast<std::size_t>(p.weight_index(grp, k))] -= 0.02 * grp;
        }
    REQUIRE(p.weight_trends_shared());
    CHECK(log_likelihood(ds, p) == doctest::Approx(ll).epsilon(1e-12));
}

TEST_CASE("Bernoulli likelihood") {
    ModelParams p = ModelParams::make(1, 0, 2000.0);
    p.alpha[1] = laplace_quantile(0.3);
    MortalityDataset ds = one_cell(1, 1, 1.0);
    CHECK(log_likelihood_bernoulli(ds, p) == doctest::Approx(std::log(0.7)).epsilon(1e-12));
    ds.deaths(0, Gender::male, 0, 0) = 1;
    CHECK(log_likelihood_bernoulli(ds, p) == doctest::Approx(std::log(0.3)).epsilon(1e-12));

    MortalityDataset all = one_cell(1, 1, 12.0);
    all.deaths(0, Gender::male, 0, 0) = 12;
    CHECK(log_likelihood_bernoulli(all, p) == doctest::Approx(12.0 * std::log(0.3)).epsilon(1e-12));
    all.deaths(0, Gender::male, 0, 0) = 13;
    CHECK_THROWS_AS(log_likelihood_bernoulli(all, p), DomainError);

    // Poisson approximation: differences are O(m) per death.
    p.alpha[1] = laplace_quantile(1e-4);
    MortalityDataset small = one_cell(1, 1, 1e3);
    small.deaths(0, Gender::male, 0, 0) = 1;
    CHECK(std::abs(log_likelihood_bernoulli(small, p) - log_likelihood(small, p)) < 1e-3);
}

TEST_CASE("smoothing prior") {
    PriorBlock b{1.0, 0.0};
    std::vector<double> x{0.0, 1.0};
    CHECK(difference_penalty(x, b, 1) == doctest::Approx(-1.0));
    std::vector<double> flat(6, 2.5);
    CHECK(difference_penalty(flat, b, 1) == 0.0);
    std::vector<double> line{1, 3, 5, 7, 9};
    CHECK(difference_penalty(line, b, 2) == 0.0);
    std::vector<double> quad{0, 1, 4, 9, 16};
    CHECK(difference_penalty(quad, b, 3) == 0.0);
    CHECK(difference_penalty(quad, b, 2) == doctest::Approx(-12.0));
    CHECK(difference_penalty(x, PriorBlock{2.0, 0.5}, 1) == doctest::Approx(-2.0 * (1.0 + 0.5)));
    CHECK_THROWS_AS(difference_penalty(x, b, 4), DomainError);

    ModelParams p = ModelParams::make(2, 0, 2000.0);
    p.alpha = {0.0, 5.0, 1.0, 5.0};  // female sequence 0, 1; male constant
    PriorSpec prior;
    prior.alpha = b;
    CHECK(log_prior_smoothing(p, prior) == doctest::Approx(-1.0));
    CHECK(log_prior_smoothing(p, PriorSpec::uniform()) == 0.0);
}

TEST_CASE("map_lambda and approx_lambda") {
    CHECK(map_lambda(0.01, 50, 50) == doctest::Approx(149.0 / 150.0).epsilon(1e-15));
    CHECK(map_lambda(0.01, 1e9, 1e9) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(map_lambda(1.0, 0.0, 5.0), BoundaryError);
    CHECK(approx_lambda(101, 100) == doctest::Approx(1.0));
    CHECK(approx_lambda(1, 100) == 0.0);
    CHECK_THROWS_AS(approx_lambda(0, 100), BoundaryError);
    // sigma2 = 1e-4: the two estimates differ by O(sigma2).
    double a = approx_lambda(1000, 1000), m = map_lambda(1e-4, 1000, 1000);
    CHECK(std::abs(a - m) < 1e-3);
}

TEST_CASE("posterior gradient vanishes at map_lambda") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        double s2 = 0.005 + 0.5 * U(rng);
        double e = 50.0 + 5000.0 * U(rng);
        ModelParams p = ModelParams::make(1, 1, 2000.0);
        p.sigma2 = {s2};
        MortalityDataset ds = one_cell(2, 1, e);
        auto n = static_cast<std::int64_t>(1 + 800.0 * U(rng));
        ds.deaths(0, Gender::male, 1, 0) = n;
        double rho = e * 0.25;
        double lam = map_lambda(s2, static_cast<double>(n), rho);
        FactorSeries l(1, 1);
        auto f = [&](double x) {
            l(1, 0) = x;
            return log_posterior(ds, p, l, PriorSpec::uniform());
        };
        double h = 1e-3 * lam;
        double g = (-f(lam + 2 * h) + 8 * f(lam + h) - 8 * f(lam - h) + f(lam - 2 * h)) / (12 * h);
        CHECK(std::abs(g) < 1e-6);
    }
}

TEST_CASE("log minus digamma") {
    for (double x : {0.01, 0.5, 1.0, 5.0, 11.9, 12.0, 40.0, 1e3, 1e6}) {
        double f = log_minus_digamma(x);
        if (x < 1e5) CHECK(f == doctest::Approx(f_oracle(x)).epsilon(1e-12));
        CHECK(f > 0.5 / x);
        // The gap 1/(12x^2) is below double resolution for large x.
        if (x <= 1e3) CHECK(f < 0.5 / x + 1.0 / (12.0 * x * x));
    }
}

TEST_CASE("solve_sigma_map") {
    std::vector<double> ones(10, 1.0);
    CHECK(solve_sigma_map(ones) == 0.0);
    std::vector<double> l{0.9, 1.1};
    double s2 = solve_sigma_map(l);
    CHECK(s2 == doctest::Approx(oracle_sigma2(l)).epsilon(1e-9));
    CHECK(s2 == doctest::Approx(0.01005).epsilon(1e-3));
    CHECK(approx_sigma(l) == doctest::Approx(0.01));
    CHECK(approx_sigma(ones) == 0.0);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> N(1.0, 0.1);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> x(20);
        for (double& v : x) v = std::max(0.05, N(rng));
        double s = solve_sigma_map(x);
        CHECK(std::abs(sigma_map_residual(s, x)) < 1e-8);
        std::vector<double> y = x;
        std::reverse(y.begin(), y.end());
        std::rotate(y.begin(), y.begin() + 7, y.end());
        CHECK(solve_sigma_map(y) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("approximate variance dominates the MAP variance") {
    // The approximation uses (N - 1)/rho, which lies further from 1 than the MAP factor.
    Rng rng = make_rng(21, {});
    int dominated = 0;
    const double rho = 400.0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> n(20), r(20, rho), appr(20);
        for (std::size_t t = 0; t < n.size(); ++t) {
            std::poisson_distribution<int> pois(rho * draw_unit_gamma(rng, 0.01));
            n[t] = pois(rng);
            appr[t] = approx_lambda(n[t], rho);
        }
        auto est = map_fixed_point(n, r);
        REQUIRE(est.converged);
        if (approx_sigma(appr) >= est.sigma2)
            ++dominated;
        else
            MESSAGE("not dominated: " << approx_sigma(appr) << " < " << est.sigma2);
    }
    MESSAGE("approx_sigma >= MAP variance in " << dominated << " of 100 series");
    CHECK(dominated >= 90);
}

TEST_CASE("map fixed point") {
    std::vector<double> n{980, 1030, 1100, 950, 1010, 1060, 900, 1040};
    std::vector<double> rho(n.size(), 1000.0);
    auto est = map_fixed_point(n, rho);
    CHECK(est.converged);
    for (std::size_t t = 0; t < n.size(); ++t) CHECK(est.lambda[t] == doctest::Approx(map_lambda(est.sigma2, n[t], rho[t])));
    if (est.sigma2 > 0.0) CHECK(solve_sigma_map(est.lambda) == doctest::Approx(est.sigma2).epsilon(1e-6));
}

TEST_CASE("matching of moments") {
    SUBCASE("constant counts clamp to zero") {
        ModelParams p = ModelParams::make(2, 1, 2000.0);
        auto grid = ExposureGrid::constant(2000, 5, {60, 70}, 1000.0);
        MortalityDataset ds(grid, 2);
        for (int ti = 0; ti < 5; ++ti)
            for (int a = 0; a < 2; ++a)
                for (int gi = 0; gi < 2; ++gi)
                    for (int k = 0; k < 2; ++k) ds.deaths(a, gender_from_index(gi), k, ti) = 250;
        auto s2 = mm_sigma2(transform_iid(ds, p));
        CHECK(s2[0] == 0.0);
    }
    SUBCASE("recovers sigma2 = 0.04 on long synthetic data") {
        ModelParams p = ModelParams::make(3, 1, 2020.0, {60, 70, 80});
        for (int a = 0; a < 3; ++a)
            for (int gi = 0; gi < 2; ++gi) {
                auto grp = static_cast<std::size_t>(ModelParams::group(a, gender_from_index(gi)));
                p.alpha[grp] = std::log(0.02) + 0.7 * a;
                p.beta[grp] = -0.02;
                p.u[grp * 2 + 1] = 0.3;
            }
        p.sigma2 = {0.04};
        auto grid = ExposureGrid::constant(1971, 50, p.age_labels, 1e5);
        MortalityDataset ds = synth_generate(p, grid, 4);
        ModelParams shape = p;
        shape.sigma2 = {0.0};
        auto est = mm_estimate(ds, shape);
        CHECK(est.sigma2[0] > 0.02);
        CHECK(est.sigma2[0] < 0.06);
        CHECK(est.params.alpha[2] == doctest::Approx(p.alpha[2]).epsilon(0.05));
    }
    SUBCASE("law of total variance for W*") {
        // E[s2] = w/(E m) + sigma2 w^2 for a single cell.
        ModelParams p = ModelParams::make(1, 1, 2000.0);
        p.sigma2 = {0.02};
        auto grid = ExposureGrid::constant(2000, 12, {60}, 400.0);
        const double em = 400.0 * 0.5, w = 0.5;
        const int reps = 10000;
        double mean_s2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            MortalityDataset ds = synth_generate(p, grid, static_cast<std::uint64_t>(r));
            double s = 0.0, ss = 0.0;
            for (int ti = 0; ti < 12; ++ti) {
                double x = static_cast<double>(ds.deaths(0, Gender::female, 1, ti)) / em;
                s += x;
                ss += x * x;
            }
            mean_s2 += (ss - s * s / 12.0) / 11.0;
        }
        mean_s2 /= reps;
        double expect = w / em + 0.02 * w * w;
        CHECK(mean_s2 == doctest::Approx(expect).epsilon(0.03));
    }
}

TEST_CASE("batch means and quantiles") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<double> x(10000);
    for (double& v : x) v = N(rng);
    double se = batch_means_se(x, 50);
    CHECK(se > 0.007);
    CHECK(se < 0.013);
    std::vector<double> c(200, 3.0);
    CHECK(batch_means_se(c, 50) == 0.0);
    CHECK_THROWS_AS(batch_means_se(std::vector<double>(60, 1.0), 50), DomainError);

    std::vector<double> y{5, 1, 4, 2, 3};
    CHECK(empirical_quantile(y, 0.2) == 1.0);
    CHECK(empirical_quantile(y, 0.21) == 2.0);
    CHECK(empirical_quantile(y, 0.5) == 3.0);
    CHECK(empirical_quantile(y, 1.0) == 5.0);
}

TEST_CASE("mcmc with everything fixed stays at the initial value") {
    ModelParams p = ModelParams::make(1, 0, 2000.0);
    MortalityDataset ds = one_cell(1, 5, 100.0);
    for (int ti = 0; ti < 5; ++ti) ds.deaths(0, Gender::male, 0, ti) = 50;
    McmcConfig cfg;
    cfg.iterations = 300;
    cfg.burn_in = 100;
    cfg.fixed = FixedMask{true, true, true, true, true, true, true, true, true, true};
    McmcChain chain = mcmc_sample(ds, p, PriorSpec::uniform(), cfg);
    CHECK(chain.size() == 200);
    for (const auto& s : chain.samples) CHECK(flatten(s) == flatten(p));
    CHECK_THROWS_AS(mcmc_diagnostics(chain, 150), DomainError);
    auto diag = mcmc_diagnostics(chain, 50);
    for (const auto& d : diag) CHECK(d.se == 0.0);
}

TEST_CASE("mcmc recovers a small synthetic model") {
    ModelParams truth = ModelParams::make(2, 1, 2010.0, {60, 70});
    for (int a = 0; a < 2; ++a)
        for (int gi = 0; gi < 2; ++gi) {
            auto grp = static_cast<std::size_t>(ModelParams::group(a, gender_from_index(gi)));
            truth.alpha[grp] = std::log(0.02) + 0.8 * a - 0.3 * gi;
            truth.beta[grp] = -0.02;
        }
    truth.sigma2 = {0.01};
    auto grid = ExposureGrid::constant(1991, 20, truth.age_labels, 1e5);
    MortalityDataset ds = synth_generate(truth, grid, 6);
    McmcConfig cfg;
    cfg.iterations = 4000;
    cfg.burn_in = 1500;
    cfg.seed = 3;
    ModelParams init = mm_estimate(ds, truth).params;
    init.sigma2 = {std::max(init.sigma2[0], 1e-4)};
    McmcChain chain = mcmc_sample(ds, init, PriorSpec::uniform(), cfg);
    CHECK(chain.min_acceptance() >= 0.15);
    CHECK(chain.max_acceptance() <= 0.40);
    ModelParams lo = chain.quantile(0.05), hi = chain.quantile(0.95);
    int covered = 0;
    for (std::size_t i = 0; i < truth.alpha.size(); ++i) {
        covered += lo.alpha[i] <= truth.alpha[i] && truth.alpha[i] <= hi.alpha[i];
        covered += lo.beta[i] <= truth.beta[i] && truth.beta[i] <= hi.beta[i];
    }
    CHECK(covered >= 6);

    // Same seed, same chain.
    McmcChain again = mcmc_sample(ds, init, PriorSpec::uniform(), cfg);
    CHECK(flatten(again.samples.back()) == flatten(chain.samples.back()));
}
