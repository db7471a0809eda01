#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecrp/data.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

// Risk-factor realisation maximising the posterior for one (k, t):
// (1/sigma2 - 1 + N) / (1/sigma2 + rho). Throws BoundaryError if the numerator is not positive.
double map_lambda(double sigma2, double count_sum, double rho_sum);

// Large-count approximation (N - 1) / rho. Throws BoundaryError if count_sum < 1.
double approx_lambda(double count_sum, double rho_sum);

// f(x) = log x - digamma(x), evaluated without cancellation for large x.
double log_minus_digamma(double x);

// Root sigma2 of 2 log sigma + digamma(1/sigma2) = mean(1 + log lambda - lambda).
// Returns 0 when every lambda equals 1.
double solve_sigma_map(std::span<const double> lambda);

// Residual of the variance equation at sigma2.
double sigma_map_residual(double sigma2, std::span<const double> lambda);

// Mean squared deviation of lambda from one.
double approx_sigma(std::span<const double> lambda);

struct MapFactorEstimate {
    std::vector<double> lambda;
    double sigma2 = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Alternates the lambda and sigma equations to a fixed point (tolerance on sigma2).
MapFactorEstimate map_fixed_point(std::span<const double> count_sums, std::span<const double> rho_sums,
                                  double tol = 1e-8, int max_iter = 1000);

struct FactorEstimates {
    FactorSeries lambda;
    std::vector<double> sigma2;  // per factor 1..K
};

// Approximate lambda and sigma2 for every factor given fitted rates and weights.
FactorEstimates approx_factor_estimates(const MortalityDataset& ds, const ModelParams& theta);
FactorEstimates map_factor_estimates(const MortalityDataset& ds, const ModelParams& theta);

}  // namespace ecrp
