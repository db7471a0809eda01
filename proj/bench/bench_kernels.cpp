// Serial reference vs OpenMP kernels, and Panjer vs Bernoulli Monte Carlo.
// Usage: ecrp_bench [repeats]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <string>

#include "ecrp/aggregate.hpp"
#include "ecrp/kernels.hpp"

using namespace ecrp;

namespace {

// Best of `repeats` wall-clock timings, in seconds.
double best_of(int repeats, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const std::string& name, double serial, double parallel, bool identical) {
    std::cout << std::left << std::setw(28) << name << std::right << std::setw(12) << serial << std::setw(12) << parallel
              << std::setw(10) << serial / parallel << "  " << (identical ? "identical" : "DIFFERENT") << '\n';
}

EcrpPortfolio book(int n, int K) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    EcrpPortfolio pf;
    pf.n_factors = K;
    for (int i = 0; i < n; ++i) {
        std::vector<double> w(static_cast<std::size_t>(K + 1));
        double s = 0.0;
        for (double& x : w) s += (x = U(rng));
        for (double& x : w) x /= s;
        pf.policyholders.push_back({0.005 + 0.03 * U(rng), w, SeverityPmf::point(1 + static_cast<std::size_t>(9 * U(rng))), 1.0});
    }
    return pf;
}

}  // namespace

int main(int argc, char** argv) {
    int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
    std::cout << "threads: " << kernels::max_threads() << "\n\n";
    std::cout << std::left << std::setw(28) << "kernel" << std::right << std::setw(12) << "serial s" << std::setw(12)
              << "parallel s" << std::setw(10) << "speedup" << '\n';

    {
        std::vector<double> a(20000), b(20000);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (double& x : a) x = U(rng);
        for (double& x : b) x = U(rng);
        std::vector<double> rs, rp;
        double ts = best_of(repeats, [&] { rs = kernels::serial::convolve(a, b, 30000); });
        double tp = best_of(repeats, [&] { rp = kernels::convolve(a, b, 30000); });
        report("convolve 2e4 x 2e4", ts, tp, rs == rp);
    }
    {
        EcrpPortfolio pf = book(2000, 2);
        RiskFactorSpec rf{{0.1, 0.05}};
        kernels::BernoulliMcConfig cfg{20000, 7, false};
        std::vector<std::int64_t> rs, rp;
        double ts = best_of(repeats, [&] { rs = kernels::serial::bernoulli_totals(pf, rf, cfg); });
        double tp = best_of(repeats, [&] { rp = kernels::bernoulli_totals(pf, rf, cfg); });
        report("bernoulli_totals 2e4 sims", ts, tp, rs == rp);
    }
    {
        auto f = [](std::size_t i) {
            double s = 0.0;
            for (int j = 1; j < 2000; ++j) s += std::log(static_cast<double>(i + static_cast<std::size_t>(j)));
            return s;
        };
        std::vector<double> rs, rp;
        double ts = best_of(repeats, [&] { rs = kernels::serial::map_indexed(20000, f); });
        double tp = best_of(repeats, [&] { rp = kernels::map_indexed(20000, f); });
        report("map_indexed 2e4", ts, tp, rs == rp);
    }

    // 10^4 policyholders, m = 0.05, unit severity, no factors.
    EcrpPortfolio pf;
    pf.n_factors = 0;
    pf.policyholders.push_back({0.05, {1.0}, SeverityPmf::point(1), 1e4});
    LossDistribution panjer, mc;
    double tpj = best_of(repeats, [&] { panjer = aggregate_loss(pf, RiskFactorSpec{}); });
    MonteCarloOptions mo;
    mo.n_sims = 50000;
    mo.seed = 1;
    double tmc = best_of(1, [&] { mc = monte_carlo_bernoulli(pf, RiskFactorSpec{}, mo); });
    std::cout << "\nPanjer " << tpj << " s, Bernoulli Monte Carlo (5e4 sims) " << tmc << " s, ratio " << tmc / tpj
              << ", TV " << total_variation(panjer, mc) << '\n';
    return 0;
}
