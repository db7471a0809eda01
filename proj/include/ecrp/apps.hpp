#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecrp/aggregate.hpp"
#include "ecrp/data.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

// Discount factors D(T, T + t) for t = 0, 1, ...; D(T, T) = 1.
class DiscountCurve {
public:
    DiscountCurve() : factors_{1.0} {}
    explicit DiscountCurve(std::vector<double> factors);

    static DiscountCurve flat(double rate, int horizon);

    // Beyond the last horizon the last one-year forward factor is extended.
    double operator()(int t) const;
    // Curve seen from T + shift: D(T + shift, T + shift + t) = D(T, T + shift + t) / D(T, T + shift).
    DiscountCurve shifted(int shift) const;
    int horizon() const { return static_cast<int>(factors_.size()) - 1; }

private:
    std::vector<double> factors_;
};

// sigma2 (1 + d (t - T))^2 for t >= T.
double inflate_variance(double sigma2, double d, double t, double T);

struct DEstimate {
    double d = 0.0;
    double log_likelihood = 0.0;
    bool flat = false;
    std::string warning;
};

// Maximises the likelihood over d in [0, d_max] with every other parameter fixed;
// variances are inflated for years >= ref_year. Golden-section search to 1e-6.
DEstimate estimate_d(const MortalityDataset& ds, const ModelParams& theta, int ref_year, double d_max = 2.0);

struct ForecastConfig {
    int base_year = 0;  // T: last year of data; inflation is measured from here
    double d = 0.0;
};

// Distribution of the forecast rate m = S / E; counts holds P(S = n).
struct RateForecast {
    double exposure = 0.0;
    LossDistribution counts;

    double rate_quantile(double level) const;
    double mean_rate() const;
};

// Aggregates the (age group, gender) sub-portfolio with unit quantities and inflated
// variances; several parameter samples give an equally weighted mixture.
RateForecast forecast_rates(std::span<const ModelParams> samples, int age, Gender g, int year, double exposure,
                            const ForecastConfig& config);

// q(age in years, calendar year).
using DeathProbabilityFn = std::function<double(int age, int year)>;

// Ages map to the group with the largest label not above them (labels are lower
// bounds of the age groups; without labels the age is the group index).
int age_group_of(const ModelParams& theta, int age);
DeathProbabilityFn death_probabilities(const ModelParams& theta, Gender g);

// sum_{k=1}^{max_age - age} prod_{j<k} (1 - q_{age+j}(T + j)); with cohort == false
// every factor uses year T. Survivors beyond max_age contribute nothing.
double curtate_life_expectancy(const DeathProbabilityFn& q, int age, int T, int max_age, bool cohort = true);
double curtate_life_expectancy(const ModelParams& theta, int age, Gender g, int T, int max_age, bool cohort = true);

// D(1) q(age, T) + sum_{t=1}^{term} D(t+1) tp q(age+t, T+t): pays 1 at the end of the year of death.
double term_life_bel(const DeathProbabilityFn& q, int age, int T, int term, const DiscountCurve& curve);
double term_life_bel(const ModelParams& theta, int age, Gender g, int T, int term, const DiscountCurve& curve);

struct LumpSumPolicy {
    int age = 0;  // age in years at time 0
    Gender gender = Gender::female;
    double sum_insured = 0.0;
    int term = 0;  // remaining years covered
};

struct ScrOptions {
    int base_year = 0;     // calendar year of time 0
    double assets = 0.0;   // bond nominal A0
    double coupon = 0.0;   // c > -1
    double unit = 0.0;     // loss unit for stochastic rounding; 0 = automatic
    double level = 0.995;
};

// Discrete distribution of the change in basic own funds over one year.
struct DeltaBofResult {
    std::vector<double> values;  // sorted support
    std::vector<double> probs;
    double tail_mass = 0.0;
    double scr = 0.0;            // level-quantile of the change in basic own funds
    double mean() const;
    double quantile(double level) const;
};

// Each parameter sample h gives the change in own funds as a constant plus D(0,1)
// times a compound Poisson sum of C_i (1 - A^1_i(h)) with intensities q_i^h(0);
// samples are mixed with weight 1/m.
DeltaBofResult delta_bof(std::span<const LumpSumPolicy> policies, std::span<const ModelParams> samples,
                         const DiscountCurve& curve, const ScrOptions& options);

// Factor realisation under a scenario that removes `reduction` of the observed deaths.
double scenario_factor(double reduction, double count_sum, double rho_sum, double sigma2);

}  // namespace ecrp
