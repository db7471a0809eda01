#include "ecrp/model.hpp"

#include <algorithm>
#include <cmath>

namespace ecrp {

void EcrpPortfolio::validate() const {
    if (n_factors < 0) throw DomainError("negative number of risk factors");
    for (const auto& p : policyholders) {
        if (!(p.rate >= 0.0) || !std::isfinite(p.rate)) throw DomainError("policyholder rates must be non-negative");
        if (!(p.multiplicity >= 0.0)) throw DomainError("policyholder multiplicity must be non-negative");
        if (static_cast<int>(p.weights.size()) != n_factors + 1)
            throw DomainError("policyholder weight vector has the wrong length");
        double s = 0.0;
        for (double w : p.weights) {
            if (!(w >= 0.0)) throw DomainError("negative policyholder weight");
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-9) throw DomainError("policyholder weights must sum to one");
        p.severity.validate();
    }
}

double EcrpPortfolio::expected_loss() const {
    double s = 0.0;
    for (const auto& p : policyholders) s += p.multiplicity * p.rate * p.severity.mean();
    return s;
}

double EcrpPortfolio::factor_intensity(int k) const {
    double s = 0.0;
    for (const auto& p : policyholders) s += p.multiplicity * p.rate * p.weights[static_cast<std::size_t>(k)];
    return s;
}

CountMoments death_count_moments(double intensity, double sigma2, int k) {
    if (k < 0) throw DomainError("cause index must be non-negative");
    if (k == 0 || sigma2 < kDegenerateVariance) return {intensity, intensity};
    return {intensity, intensity * (1.0 + intensity * sigma2)};
}

CountMoments death_count_moments(const ModelParams& theta, int age, Gender g, int k, double year, double exposure) {
    if (k < 0 || k > theta.n_factors) throw DomainError("cause index out of range");
    double rho = exposure * central_death_rate(theta, age, g, year) * cause_weights(theta, age, g, year)[static_cast<std::size_t>(k)];
    return death_count_moments(rho, k == 0 ? 0.0 : theta.sigma2[static_cast<std::size_t>(k - 1)], k);
}

double cross_covariance(const ModelParams& theta, const Cell& first, const Cell& second, int k, double year) {
    if (first.age == second.age && first.gender == second.gender)
        throw DomainError("cross covariance needs two distinct cells");
    if (k < 1 || k > theta.n_factors) throw DomainError("cross covariance needs a risk factor k >= 1");
    auto ki = static_cast<std::size_t>(k);
    double r1 = first.exposure * central_death_rate(theta, first.age, first.gender, year) *
                cause_weights(theta, first.age, first.gender, year)[ki];
    double r2 = second.exposure * central_death_rate(theta, second.age, second.gender, year) *
                cause_weights(theta, second.age, second.gender, year)[ki];
    return r1 * r2 * theta.sigma2[ki - 1];
}

std::vector<double> unconditional_pmf_negbin(double rho, double sigma2, std::size_t n_max, double tail_eps) {
    if (!(rho > 0.0)) throw DomainError("negative binomial needs a positive mean");
    if (!(sigma2 > 0.0)) throw DomainError("negative binomial needs sigma2 > 0; use Poisson for a degenerate factor");
    double r = 1.0 / sigma2;
    double log_p = std::log(r) - std::log(r + rho);
    double log_q = std::log(rho) - std::log(r + rho);
    double lg_r = std::lgamma(r);
    double mean = rho, sd = std::sqrt(rho * (1.0 + rho * sigma2));
    std::vector<double> pmf;
    double cum = 0.0;
    for (std::size_t n = 0;; ++n) {
        double nn = static_cast<double>(n);
        double lp = std::lgamma(r + nn) - lg_r - std::lgamma(nn + 1.0) + r * log_p + nn * log_q;
        double p = std::exp(lp);
        pmf.push_back(p);
        cum += p;
        if (n_max > 0) {
            if (n >= n_max) break;
        } else if (nn > mean + sd) {
            // Successive ratios decrease towards q for r > 1 and increase towards q otherwise,
            // so a geometric series with the larger of the two bounds the remaining mass.
            double q = rho / (r + rho);
            double ratio = std::max(q, (r + nn) / (nn + 1.0) * q);
            if (ratio < 1.0 && p * ratio / (1.0 - ratio) < tail_eps) break;
        } else if (n > 100000000) {
            throw DomainError("negative binomial support too large");
        }
    }
    return pmf;
}

}  // namespace ecrp
