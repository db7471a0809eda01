#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ecrp/loss.hpp"
#include "ecrp/model.hpp"

namespace ecrp {

// Expectation-preserving discretisation of y onto {floor(y/U), ceil(y/U)}.
SeverityPmf stochastic_round(double y, double unit);

// n_max == 0 selects the grid automatically: start at mean + 12 sd and double
// until the mass beyond the grid is below kAutoTailTarget.
inline constexpr double kAutoTailTarget = 1e-10;

// Compound Poisson via Panjer: p_n = (lambda/n) sum_m m q(m) p_{n-m}.
LossDistribution panjer_compound_poisson(double lambda, const SeverityPmf& severity, std::size_t n_max = 0,
                                         double unit = 1.0);

// Compound negative binomial with Panjer parameters a = 1 - p, b = (r - 1)(1 - p).
LossDistribution panjer_compound_negbin(double r, double p, const SeverityPmf& severity, std::size_t n_max = 0,
                                        double unit = 1.0);

// Truncated convolution of two loss distributions on the same unit.
LossDistribution convolve(const LossDistribution& a, const LossDistribution& b, std::size_t n_max);

struct AggregateOptions {
    double unit = 1.0;
    std::size_t n_max = 0;  // 0 = automatic
};

// The K + 1 independent parts of the aggregate loss before convolution.
std::vector<LossDistribution> aggregate_parts(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                              const AggregateOptions& options,
                                              const std::map<int, double>& fixed = {});

// Exact distribution of S = sum_i sum_{j <= N_i} Y_{i,j} in the ECRP model.
LossDistribution aggregate_loss(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                const AggregateOptions& options = {});

// As aggregate_loss, with the factors in `fixed` pinned at the given realisations.
LossDistribution aggregate_scenario(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                    const std::map<int, double>& fixed, const AggregateOptions& options = {});

struct MonteCarloOptions {
    std::size_t n_sims = 50000;
    std::uint64_t seed = 0;
    bool exponential_probability = false;  // q = 1 - exp(-m) instead of q = m
    bool parallel = true;
    double unit = 1.0;
};

// Empirical distribution of the mixed Bernoulli reference model (factors truncated at 1/max rate).
LossDistribution monte_carlo_bernoulli(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                       const MonteCarloOptions& options = {});

// Half the L1 distance on the grid plus half the difference of the tail masses
// (each tail treated as one extra atom); requires equal units.
double total_variation(const LossDistribution& p, const LossDistribution& q);

// Smallest grid point with CDF >= level, for each level.
std::vector<std::size_t> quantiles(const LossDistribution& d, std::span<const double> levels);

// Pmfs used by the style experiments.
LossDistribution poisson_distribution(double mean, std::size_t n_max);
LossDistribution binomial_distribution(std::int64_t trials, double prob);

}  // namespace ecrp
