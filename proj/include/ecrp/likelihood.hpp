#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ecrp/data.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

// rho_{a,g,k}(t) = E m w per cell, with the per-(k, t) marginals.
struct IntensityGrid {
    int n_years = 0, n_groups = 0, n_causes = 0;
    std::vector<double> rho;          // [(ti * n_groups + grp) * n_causes + k]
    std::vector<double> rho_marginal; // [ti * n_causes + k]

    double cell(int ti, int grp, int k) const {
        return rho[(static_cast<std::size_t>(ti) * static_cast<std::size_t>(n_groups) + static_cast<std::size_t>(grp)) *
                       static_cast<std::size_t>(n_causes) + static_cast<std::size_t>(k)];
    }
    double marginal(int ti, int k) const {
        return rho_marginal[static_cast<std::size_t>(ti) * static_cast<std::size_t>(n_causes) + static_cast<std::size_t>(k)];
    }
};

IntensityGrid intensity_grid(const MortalityDataset& ds, const ModelParams& theta);

// Risk-factor variance for factor k (1..K) in year index ti.
using VarianceSchedule = std::function<double(int k, int ti)>;

// Log of the closed-form likelihood with factors integrated out.
double log_likelihood(const MortalityDataset& ds, const ModelParams& theta);
double log_likelihood(const MortalityDataset& ds, const ModelParams& theta, const VarianceSchedule& variance);

// Per-(k,t) factor contribution: log Gamma(r + N) - log Gamma(r) + r log r - (r + N) log(r + rho),
// with r = 1/sigma2; falls back to -rho when the factor is degenerate.
double factor_log_term(double sigma2, std::int64_t count_sum, double rho_sum);

// log Gamma(r + n) - log Gamma(r).
double log_gamma_ratio(double r, std::int64_t n);

// Binomial likelihood for the idiosyncratic-only model (K = 0).
double log_likelihood_bernoulli(const MortalityDataset& ds, const ModelParams& theta);

struct PriorBlock {
    double c = 0.0;    // scale; 0 disables the block
    double eps = 0.0;  // ridge
};

// Gaussian smoothing priors across ages (and cohorts) with difference order 1, 2 or 3.
struct PriorSpec {
    PriorBlock alpha, beta, zeta, eta, gamma, u, v;
    int order = 1;

    static PriorSpec uniform() { return {}; }
    // Scales c_alpha = 500, c_beta = c_eta = 30000 c_alpha, c_zeta = c_alpha/20, c_gamma = 1000 c_alpha.
    static PriorSpec smoothing_defaults();
};

// -c sum (order-th differences)^2 - c eps sum x^2 per block; constants omitted.
double log_prior_smoothing(const ModelParams& theta, const PriorSpec& prior);

// Penalty for one sequence; exposed for tests.
double difference_penalty(std::span<const double> x, const PriorBlock& block, int order);

// Log log-density of Gamma(mean 1, variance sigma2) at x.
double log_unit_gamma_density(double x, double sigma2);

// Prior + gamma densities of the factor realisations + conditional Poisson terms.
double log_posterior(const MortalityDataset& ds, const ModelParams& theta, const FactorSeries& lambda,
                     const PriorSpec& prior);

}  // namespace ecrp
