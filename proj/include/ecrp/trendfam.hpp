#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ecrp/common.hpp"

namespace ecrp {

// Parameters of the trend families for central death rates and cause weights,
// plus the risk-factor variances.
//
// Layout: per-(age, gender) quantities are indexed by group = age * 2 + gender;
// per-(age, gender, cause) quantities by group * (K + 1) + k. Cause 0 is the
// idiosyncratic part; sigma2 holds factors 1..K at positions 0..K-1.
struct ModelParams {
    int n_ages = 0;
    int n_factors = 0;  // K
    double t0 = 0.0;    // normalisation year of the trend reduction
    bool normalize_trend = true;  // false: use the raw arctan reduction
    std::vector<int> age_labels;

    std::vector<double> alpha, beta, zeta, eta;  // per group
    std::vector<double> u, v;                    // per group and cause
    std::vector<double> phi, psi;                // per cause 0..K
    std::vector<double> sigma2;                  // per factor 1..K
    std::map<int, double> cohort;                // keyed by birth year (year - age label)

    // All-zero intercepts and trends, eta = psi = 1/150, zeta = phi = 0.
    static ModelParams make(int n_ages, int n_factors, double t0, std::vector<int> age_labels = {});

    int n_groups() const { return n_ages * kGenders; }
    int n_causes() const { return n_factors + 1; }
    static int group(int age, Gender g) { return age * kGenders + index(g); }
    int weight_index(int grp, int k) const { return grp * n_causes() + k; }

    double cohort_effect(int birth_year) const;
    int age_label(int a) const { return age_labels.empty() ? a : age_labels[static_cast<std::size_t>(a)]; }

    // Throws DomainError on size mismatches, non-positive eta/psi or negative variances.
    void validate() const;

    // Shift u (and v, when all phi and all psi coincide) so that u_{a,g,0} = v_{a,g,0} = 0.
    void canonicalize();
    bool weight_trends_shared() const;
};

// Flattened view used by chains, diagnostics and the chain CSV.
std::vector<std::string> param_names(const ModelParams& p);
std::vector<double> flatten(const ModelParams& p);
void unflatten(std::span<const double> values, ModelParams& p);

// Laplace distribution function with mean zero and variance two.
double laplace_cdf(double x);
double laplace_quantile(double p);

// arctan-based trend reduction (1/eta) * atan(eta * (t - zeta)).
double trend_reduction(double t, double zeta, double eta);

// Trend reduction normalised to 0 at t0 and -1 at t0 - 1.
double normalized_trend(double t, double zeta, double eta, double t0);

// Trend reduction as used by the families: normalised unless p.normalize_trend is false.
double model_trend(const ModelParams& p, double t, double zeta, double eta);
// Limit of model_trend as t -> infinity.
double model_trend_limit(const ModelParams& p, double zeta, double eta);

double central_death_rate(const ModelParams& p, int age, Gender g, double year);
double central_death_rate_limit(const ModelParams& p, int age, Gender g);

// Softmax over causes 0..K; writes K + 1 entries into out.
void cause_weights(const ModelParams& p, int age, Gender g, double year, std::span<double> out);
std::vector<double> cause_weights(const ModelParams& p, int age, Gender g, double year);
std::vector<double> cause_weights_limit(const ModelParams& p, int age, Gender g);

// One-year death probability under a piecewise constant force of mortality.
double death_probability(double central_rate);

}  // namespace ecrp
