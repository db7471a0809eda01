#include "ecrp/map_estimates.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>

#include "ecrp/likelihood.hpp"

namespace ecrp {

double map_lambda(double sigma2, double count_sum, double rho_sum) {
    if (!(sigma2 >= 0.0)) throw DomainError("variance must be non-negative");
    if (sigma2 < kDegenerateVariance) return 1.0;
    double r = 1.0 / sigma2;
    double num = r - 1.0 + count_sum;
    if (!(num > 0.0)) throw BoundaryError("MAP at boundary: 1/sigma2 - 1 + N <= 0");
    return num / (r + rho_sum);
}

double approx_lambda(double count_sum, double rho_sum) {
    if (count_sum < 1.0) throw BoundaryError("degenerate cell: no deaths for the approximate factor estimate");
    if (!(rho_sum > 0.0)) throw DomainError("intensity sum must be positive");
    return (count_sum - 1.0) / rho_sum;
}

double log_minus_digamma(double x) {
    if (!(x > 0.0)) throw DomainError("log x - digamma(x) needs x > 0");
    if (x >= 12.0) {
        double i = 1.0 / x, i2 = i * i;
        return 0.5 * i + i2 * (1.0 / 12.0 - i2 * (1.0 / 120.0 - i2 * (1.0 / 252.0 - i2 / 240.0)));
    }
    return std::log(x) - boost::math::digamma(x);
}

namespace {

// c = -mean(1 + log lambda - lambda) >= 0.
double sigma_rhs(std::span<const double> lambda) {
    if (lambda.empty()) throw DomainError("empty factor series");
    double s = 0.0;
    for (double l : lambda) {
        if (!(l > 0.0)) throw DomainError("factor realisations must be positive");
        s += 1.0 + std::log(l) - l;
    }
    return -s / static_cast<double>(lambda.size());
}

}  // namespace

double sigma_map_residual(double sigma2, std::span<const double> lambda) {
    return sigma_rhs(lambda) - log_minus_digamma(1.0 / sigma2);
}

double solve_sigma_map(std::span<const double> lambda) {
    double c = sigma_rhs(lambda);
    if (c <= 0.0) return 0.0;
    // f(x) = log x - digamma(x) decreases from +inf to 0; bracket x = 1/sigma2.
    double lo = std::log(1e-3), hi = std::log(1e8);
    while (log_minus_digamma(std::exp(lo)) < c && lo > -700.0) lo -= 5.0;
    while (log_minus_digamma(std::exp(hi)) > c && hi < 700.0) hi += 5.0;
    while (hi - lo > 1e-11) {
        double mid = 0.5 * (lo + hi);
        if (log_minus_digamma(std::exp(mid)) > c)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(-0.5 * (lo + hi));
}

double approx_sigma(std::span<const double> lambda) {
    if (lambda.empty()) throw DomainError("empty factor series");
    double s = 0.0;
    for (double l : lambda) s += (l - 1.0) * (l - 1.0);
    return s / static_cast<double>(lambda.size());
}

MapFactorEstimate map_fixed_point(std::span<const double> count_sums, std::span<const double> rho_sums, double tol,
                                  int max_iter) {
    if (count_sums.size() != rho_sums.size() || count_sums.empty())
        throw DomainError("count and intensity series must have the same positive length");
    MapFactorEstimate est;
    est.lambda.resize(count_sums.size());
    for (std::size_t t = 0; t < count_sums.size(); ++t)
        est.lambda[t] = rho_sums[t] > 0.0 ? std::max(count_sums[t] - 1.0, 0.5) / rho_sums[t] : 1.0;
    double s2 = std::max(approx_sigma(est.lambda), 1e-6);
    for (est.iterations = 1; est.iterations <= max_iter; ++est.iterations) {
        for (std::size_t t = 0; t < count_sums.size(); ++t) est.lambda[t] = map_lambda(s2, count_sums[t], rho_sums[t]);
        double next = solve_sigma_map(est.lambda);
        bool done = std::abs(next - s2) < tol;
        s2 = next;
        if (done || s2 < kDegenerateVariance) {
            est.converged = true;
            break;
        }
    }
    if (est.converged && s2 < kDegenerateVariance) std::fill(est.lambda.begin(), est.lambda.end(), 1.0);
    est.sigma2 = s2;
    return est;
}

namespace {

void factor_sums(const MortalityDataset& ds, const IntensityGrid& g, int k, std::vector<double>& n,
                 std::vector<double>& rho) {
    n.resize(static_cast<std::size_t>(ds.n_years()));
    rho.resize(n.size());
    for (int ti = 0; ti < ds.n_years(); ++ti) {
        n[static_cast<std::size_t>(ti)] = static_cast<double>(ds.cause_total(k, ti));
        rho[static_cast<std::size_t>(ti)] = g.marginal(ti, k);
    }
}

}  // namespace

FactorEstimates approx_factor_estimates(const MortalityDataset& ds, const ModelParams& theta) {
    IntensityGrid g = intensity_grid(ds, theta);
    FactorEstimates out{FactorSeries(ds.n_factors(), ds.n_years()), {}};
    std::vector<double> n, rho;
    for (int k = 1; k <= ds.n_factors(); ++k) {
        factor_sums(ds, g, k, n, rho);
        for (int ti = 0; ti < ds.n_years(); ++ti)
            out.lambda(k, ti) = approx_lambda(n[static_cast<std::size_t>(ti)], rho[static_cast<std::size_t>(ti)]);
        out.sigma2.push_back(approx_sigma(out.lambda.factor(k)));
    }
    return out;
}

FactorEstimates map_factor_estimates(const MortalityDataset& ds, const ModelParams& theta) {
    IntensityGrid g = intensity_grid(ds, theta);
    FactorEstimates out{FactorSeries(ds.n_factors(), ds.n_years()), {}};
    std::vector<double> n, rho;
    for (int k = 1; k <= ds.n_factors(); ++k) {
        factor_sums(ds, g, k, n, rho);
        MapFactorEstimate e = map_fixed_point(n, rho);
        for (int ti = 0; ti < ds.n_years(); ++ti) out.lambda(k, ti) = e.lambda[static_cast<std::size_t>(ti)];
        out.sigma2.push_back(e.sigma2);
    }
    return out;
}

}  // namespace ecrp
