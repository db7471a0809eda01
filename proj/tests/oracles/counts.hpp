#pragma once

// Closed-form count distributions from Boost.Math.

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <cmath>
#include <cstdint>

namespace oracle {

// Gamma-mixed Poisson with mean rho and mixing variance sigma2.
inline boost::math::negative_binomial_distribution<double> negbin(double rho, double sigma2) {
    double r = 1.0 / sigma2;
    return boost::math::negative_binomial_distribution<double>(r, r / (r + rho));
}

inline double negbin_log_pmf(std::int64_t n, double rho, double sigma2) {
    return std::log(boost::math::pdf(negbin(rho, sigma2), static_cast<double>(n)));
}

inline double poisson_log_pmf(std::int64_t n, double rho) {
    return std::log(boost::math::pdf(boost::math::poisson_distribution<double>(rho), static_cast<double>(n)));
}

// Smallest n with CDF >= level.
template <class Dist>
std::int64_t discrete_quantile(const Dist& d, double level) {
    std::int64_t n = 0;
    while (boost::math::cdf(d, static_cast<double>(n)) < level) ++n;
    return n;
}

}  // namespace oracle
