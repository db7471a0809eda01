#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecrp/data.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

struct TestReport {
    std::string test;
    std::string cells;
    double statistic = 0.0;
    double critical = 0.0;  // for band checks: lower bound in `critical`, upper in `critical_upper`
    double critical_upper = 0.0;
    bool reject = false;
    int n_obs = 0;
};

// Sample variance over t of N'_k(t) = sum_{a,g} N'_{a,g,k}(t) against the 5-95% band
// of the same statistic simulated once per parameter sample.
std::vector<TestReport> cross_variance_check(const TransformedCounts& tc, std::span<const ModelParams> samples,
                                             std::uint64_t seed, double lower = 0.05, double upper = 0.95);

// t-test for zero correlation with T - 2 degrees of freedom.
TestReport independence_test(std::span<const double> x, std::span<const double> y, double level);
// All cell pairs with different causes.
std::vector<TestReport> independence_tests(const NormalizedCounts& n, double level);

// Breusch-Godfrey: residuals of a mean-only model regressed on an intercept and
// `lags` own lags over t = lags+1..T; (T - lags) R^2 against chi^2_lags.
TestReport serial_correlation_test(std::span<const double> x, int lags, double level);
// Every cell and every lag order 1..max_lags.
std::vector<TestReport> serial_correlation_tests(const NormalizedCounts& n, int max_lags, double level);

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);
double kolmogorov_cdf(double x);
double kolmogorov_quantile(double p);

// KS test of the series against Gamma(mean 1, variance sigma2), asymptotic critical values.
TestReport ks_gamma_test(std::span<const double> lambda, double sigma2, double level);

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
};

InformationCriteria information_criteria(double log_likelihood, int n_params, int n_obs);

double pass_rate(std::span<const TestReport> reports);

}  // namespace ecrp
