#include "ecrp/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ecrp/rng.hpp"

namespace ecrp::kernels {

namespace {

double convolve_at(std::span<const double> a, std::span<const double> b, std::size_t n) {
    std::size_t lo = n >= b.size() ? n - b.size() + 1 : 0;
    std::size_t hi = std::min(n, a.size() - 1);
    double s = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) s += a[i] * b[n - i];
    return s;
}

std::size_t draw_severity(const SeverityPmf& sev, Rng& rng) {
    if (sev.probs.size() == 1) return 0;
    double u = uniform01(rng);
    double c = 0.0;
    for (std::size_t i = 0; i < sev.probs.size(); ++i) {
        c += sev.probs[i];
        if (u < c) return i;
    }
    return sev.probs.size() - 1;
}

}  // namespace

std::int64_t bernoulli_single(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                              const BernoulliMcConfig& config, std::size_t sim) {
    Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(sim)});
    auto prob_of = [&](double m) { return config.exponential_probability ? -std::expm1(-m) : m; };
    double max_prob = 0.0;
    for (const auto& p : portfolio.policyholders) max_prob = std::max(max_prob, prob_of(p.rate));
    double bound = max_prob > 0.0 ? 1.0 / max_prob : std::numeric_limits<double>::infinity();

    std::vector<double> lambda(static_cast<std::size_t>(portfolio.n_factors) + 1, 1.0);
    for (int k = 1; k <= portfolio.n_factors; ++k) {
        double s2 = factors.sigma2[static_cast<std::size_t>(k - 1)];
        double x;
        do {
            x = draw_unit_gamma(rng, s2);
        } while (x > bound);
        lambda[static_cast<std::size_t>(k)] = x;
    }

    std::int64_t total = 0;
    for (const auto& p : portfolio.policyholders) {
        double mix = 0.0;
        for (std::size_t k = 0; k < lambda.size(); ++k) mix += p.weights[k] * lambda[k];
        double prob = std::min(1.0, prob_of(p.rate) * mix);
        if (prob <= 0.0) continue;
        auto count = static_cast<std::int64_t>(std::llround(p.multiplicity));
        bool point = p.severity.probs.size() >= 1 &&
                     std::count_if(p.severity.probs.begin(), p.severity.probs.end(), [](double x) { return x > 0.0; }) == 1;
        std::size_t fixed_size = point ? static_cast<std::size_t>(std::find_if(p.severity.probs.begin(), p.severity.probs.end(),
                                                                                [](double x) { return x > 0.0; }) -
                                                                   p.severity.probs.begin())
                                       : 0;
        for (std::int64_t j = 0; j < count; ++j) {
            if (uniform01(rng) < prob)
                total += static_cast<std::int64_t>(point ? fixed_size : draw_severity(p.severity, rng));
        }
    }
    return total;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b, std::size_t n_out) {
    std::vector<double> out(n_out, 0.0);
    if (a.empty() || b.empty()) return out;
    const auto n = static_cast<std::ptrdiff_t>(n_out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = convolve_at(a, b, static_cast<std::size_t>(i));
    return out;
}

std::vector<std::int64_t> bernoulli_totals(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                           const BernoulliMcConfig& config) {
    std::vector<std::int64_t> out(config.n_sims);
    const auto n = static_cast<std::ptrdiff_t>(config.n_sims);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < n; ++s)
        out[static_cast<std::size_t>(s)] = bernoulli_single(portfolio, factors, config, static_cast<std::size_t>(s));
    return out;
}

std::vector<double> map_indexed(std::size_t n, const std::function<double(std::size_t)>& f) {
    std::vector<double> out(n);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < nn; ++i) out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
    return out;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace ecrp::kernels
