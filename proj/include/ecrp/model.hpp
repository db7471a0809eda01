#pragma once

#include <cstddef>
#include <vector>

#include "ecrp/common.hpp"
#include "ecrp/loss.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

// Independent gamma risk factors with mean one; sigma2[k-1] is the variance of factor k.
struct RiskFactorSpec {
    std::vector<double> sigma2;

    int n_factors() const { return static_cast<int>(sigma2.size()); }
    bool degenerate(int k) const { return sigma2[static_cast<std::size_t>(k - 1)] < kDegenerateVariance; }
};

struct Policyholder {
    double rate = 0.0;             // central death rate m_i
    std::vector<double> weights;   // w_{i,0..K}
    SeverityPmf severity;          // discretised portfolio quantity Y_i
    double multiplicity = 1.0;     // number of identical policyholders this row stands for
};

struct EcrpPortfolio {
    int n_factors = 0;
    std::vector<Policyholder> policyholders;

    // Checks weight simplices, rates and severities.
    void validate() const;
    // Expected aggregate loss in units: sum_i multiplicity * m_i * E[Y_i].
    double expected_loss() const;
    // Intensity rho_k = sum_i multiplicity * m_i * w_{i,k}.
    double factor_intensity(int k) const;
};

struct CountMoments {
    double mean = 0.0;
    double variance = 0.0;
};

// Unconditional mean and variance of N_{a,g,k}(t): Poisson for k = 0, negative binomial otherwise.
CountMoments death_count_moments(double intensity, double sigma2, int k);
CountMoments death_count_moments(const ModelParams& theta, int age, Gender g, int k, double year, double exposure);

struct Cell {
    int age = 0;
    Gender gender = Gender::female;
    double exposure = 0.0;
};

// Covariance of cause-k deaths in two distinct (age, gender) cells in the same year.
double cross_covariance(const ModelParams& theta, const Cell& first, const Cell& second, int k, double year);

// Negative binomial pmf of a gamma-mixed Poisson with mean rho and mixing variance sigma2.
// Computed until the remaining mass is below tail_eps (or n_max when given).
std::vector<double> unconditional_pmf_negbin(double rho, double sigma2, std::size_t n_max = 0, double tail_eps = 1e-16);

}  // namespace ecrp
