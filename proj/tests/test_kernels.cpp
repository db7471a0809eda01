#include "doctest.h"

#include <omp.h>

#include <cmath>
#include <random>

#include "ecrp/kernels.hpp"

using namespace ecrp;

namespace {

struct Threads {
    int saved = omp_get_max_threads();
    explicit Threads(int n) { omp_set_num_threads(n); }
    ~Threads() { omp_set_num_threads(saved); }
};

EcrpPortfolio random_portfolio(std::mt19937_64& rng, int n, int K) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    EcrpPortfolio pf;
    pf.n_factors = K;
    for (int i = 0; i < n; ++i) {
        std::vector<double> w(static_cast<std::size_t>(K + 1));
        double s = 0.0;
        for (double& x : w) s += (x = U(rng));
        for (double& x : w) x /= s;
        pf.policyholders.push_back({0.01 + 0.1 * U(rng), w, SeverityPmf::point(1 + static_cast<std::size_t>(4 * U(rng))),
                                    1.0 + std::floor(3 * U(rng))});
    }
    return pf;
}

}  // namespace

TEST_CASE("convolution matches the serial reference bit for bit") {
    Threads t(4);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (std::size_t na : {1u, 7u, 300u, 2000u}) {
        std::vector<double> a(na), b(na / 2 + 3);
        for (double& x : a) x = U(rng);
        for (double& x : b) x = U(rng);
        for (std::size_t n_out : {std::size_t{1}, na, na + b.size() - 1, na + b.size() + 10}) {
            auto p = kernels::convolve(a, b, n_out);
            auto s = kernels::serial::convolve(a, b, n_out);
            REQUIRE(p.size() == s.size());
            CHECK(p == s);
        }
    }
}

TEST_CASE("convolution against the direct sum") {
    std::vector<double> a{1, 2, 3}, b{0.5, 0.25};
    auto c = kernels::serial::convolve(a, b, 5);
    CHECK(c == std::vector<double>{0.5, 1.25, 2.0, 0.75, 0.0});
}

TEST_CASE("Bernoulli totals match the serial reference") {
    Threads t(4);
    std::mt19937_64 rng(2);
    EcrpPortfolio pf = random_portfolio(rng, 40, 2);
    RiskFactorSpec rf{{0.2, 0.05}};
    for (bool expo : {false, true}) {
        kernels::BernoulliMcConfig cfg{5000, 99, expo};
        auto p = kernels::bernoulli_totals(pf, rf, cfg);
        auto s = kernels::serial::bernoulli_totals(pf, rf, cfg);
        CHECK(p == s);
        CHECK(p.size() == 5000);
        // Each simulation is a function of its index only.
        CHECK(p[1234] == kernels::bernoulli_single(pf, rf, cfg, 1234));
    }
}

TEST_CASE("map_indexed keeps index order") {
    Threads t(4);
    auto f = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 1e3; };
    auto p = kernels::map_indexed(1001, f);
    auto s = kernels::serial::map_indexed(1001, f);
    CHECK(p == s);
    CHECK(p[500] == f(500));
    CHECK(kernels::map_indexed(0, f).empty());
}
