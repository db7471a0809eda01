#include "ecrp/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecrp/common.hpp"
#include "ecrp/kernels.hpp"

namespace ecrp {

namespace {

// log p0 below this is split into 2^j pieces to keep the recursion start representable.
constexpr double kLogUnderflowGuard = -600.0;

void finish(LossDistribution& d) {
    double s = 0.0;
    for (double p : d.pmf) s += p;
    d.tail_mass = std::max(0.0, 1.0 - s);
}

std::size_t auto_start(double mean, double variance, std::size_t max_support) {
    double n = mean + 12.0 * std::sqrt(std::max(variance, 0.0));
    return static_cast<std::size_t>(std::ceil(n)) + max_support + 1;
}

// Self-convolves `d` 2^j times on 0..n_max.
void self_convolve(LossDistribution& d, int j, std::size_t n_max) {
    for (int i = 0; i < j; ++i) d.pmf = kernels::convolve(d.pmf, d.pmf, n_max + 1);
}

template <class Recursion>
LossDistribution with_auto_grid(std::size_t n_max, double mean, double variance, std::size_t support,
                                const Recursion& recursion) {
    if (n_max > 0) return recursion(n_max);
    std::size_t n = auto_start(mean, variance, support);
    for (;;) {
        LossDistribution d = recursion(n);
        if (d.tail_mass < kAutoTailTarget) return d;
        if (n > (std::size_t{1} << 40)) throw TruncationError("automatic grid selection did not converge");
        n *= 2;
    }
}

}  // namespace

SeverityPmf stochastic_round(double y, double unit) {
    if (!(unit > 0.0)) throw DomainError("loss unit must be positive");
    if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("quantities must be non-negative");
    double x = y / unit;
    double lo = std::floor(x);
    double f = x - lo;
    auto n = static_cast<std::size_t>(lo);
    if (f == 0.0) return SeverityPmf::point(n);
    SeverityPmf s;
    s.probs.assign(n + 2, 0.0);
    s.probs[n] = 1.0 - f;
    s.probs[n + 1] = f;
    return s;
}

LossDistribution panjer_compound_poisson(double lambda, const SeverityPmf& severity, std::size_t n_max, double unit) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("Poisson intensity must be non-negative");
    severity.validate();
    const auto& q = severity.probs;
    const double q0 = q[0];
    const std::size_t support = severity.max_support();
    if (lambda == 0.0 || q0 >= 1.0) {
        LossDistribution d{unit, {1.0}, 0.0};
        if (n_max > 0) d.pmf.resize(n_max + 1, 0.0);
        return d;
    }
    auto run = [&](std::size_t nm) {
        double log_p0 = -lambda * (1.0 - q0);
        int j = 0;
        while (log_p0 / std::ldexp(1.0, j) < kLogUnderflowGuard) ++j;
        double lam = std::ldexp(lambda, -j);
        LossDistribution d{unit, std::vector<double>(nm + 1, 0.0), 0.0};
        d.pmf[0] = std::exp(-lam * (1.0 - q0));
        std::vector<double> mq(support + 1);
        for (std::size_t m = 1; m <= support; ++m) mq[m] = static_cast<double>(m) * q[m];
        for (std::size_t n = 1; n <= nm; ++n) {
            std::size_t top = std::min(n, support);
            double s = 0.0;
            for (std::size_t m = 1; m <= top; ++m) s += mq[m] * d.pmf[n - m];
            d.pmf[n] = lam / static_cast<double>(n) * s;
        }
        self_convolve(d, j, nm);
        finish(d);
        return d;
    };
    return with_auto_grid(n_max, lambda * severity.mean(), lambda * severity.second_moment(), support, run);
}

LossDistribution panjer_compound_negbin(double r, double p, const SeverityPmf& severity, std::size_t n_max,
                                        double unit) {
    if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("negative binomial shape must be positive");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("negative binomial success probability must lie in (0, 1]");
    severity.validate();
    const auto& q = severity.probs;
    const double q0 = q[0];
    const std::size_t support = severity.max_support();
    if (p == 1.0 || q0 >= 1.0) {
        LossDistribution d{unit, {1.0}, 0.0};
        if (n_max > 0) d.pmf.resize(n_max + 1, 0.0);
        return d;
    }
    const double a = 1.0 - p;
    auto run = [&](std::size_t nm) {
        double log_p0_full = r * (std::log(p) - std::log1p(-a * q0));
        int j = 0;
        while (log_p0_full / std::ldexp(1.0, j) < kLogUnderflowGuard) ++j;
        double rj = std::ldexp(r, -j);
        double b = (rj - 1.0) * a;
        double scale = 1.0 / (1.0 - a * q0);
        LossDistribution d{unit, std::vector<double>(nm + 1, 0.0), 0.0};
        d.pmf[0] = std::exp(rj * (std::log(p) - std::log1p(-a * q0)));
        for (std::size_t n = 1; n <= nm; ++n) {
            std::size_t top = std::min(n, support);
            double nn = static_cast<double>(n);
            double s = 0.0;
            for (std::size_t m = 1; m <= top; ++m) s += (a + b * static_cast<double>(m) / nn) * q[m] * d.pmf[n - m];
            d.pmf[n] = scale * s;
        }
        self_convolve(d, j, nm);
        finish(d);
        return d;
    };
    double count_mean = r * a / p;
    double count_var = r * a / (p * p);
    double ey = severity.mean();
    double vy = severity.second_moment() - ey * ey;
    return with_auto_grid(n_max, count_mean * ey, count_mean * vy + count_var * ey * ey, support, run);
}

LossDistribution convolve(const LossDistribution& a, const LossDistribution& b, std::size_t n_max) {
    if (a.unit != b.unit) throw DomainError("cannot convolve loss distributions with different units");
    if (n_max == 0) n_max = a.n_max() + b.n_max();
    LossDistribution d{a.unit, kernels::convolve(a.pmf, b.pmf, n_max + 1), 0.0};
    finish(d);
    return d;
}

std::vector<LossDistribution> aggregate_parts(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                              const AggregateOptions& options, const std::map<int, double>& fixed) {
    portfolio.validate();
    if (factors.n_factors() != portfolio.n_factors)
        throw DomainError("risk-factor specification does not match the portfolio");
    if (!(options.unit > 0.0)) throw DomainError("loss unit must be positive");
    for (const auto& [k, lam] : fixed) {
        if (k < 1 || k > portfolio.n_factors) throw DomainError("scenario refers to an unknown risk factor");
        if (!(lam >= 0.0) || !std::isfinite(lam)) throw DomainError("scenario factor realisations must be non-negative");
    }
    for (double s2 : factors.sigma2)
        if (!(s2 >= 0.0)) throw DomainError("risk-factor variances must be non-negative");

    std::vector<LossDistribution> parts;
    for (int k = 0; k <= portfolio.n_factors; ++k) {
        auto ki = static_cast<std::size_t>(k);
        double rho = 0.0;
        std::size_t support = 0;
        for (const auto& p : portfolio.policyholders) {
            rho += p.multiplicity * p.rate * p.weights[ki];
            support = std::max(support, p.severity.max_support());
        }
        if (rho <= 0.0) {
            parts.push_back(panjer_compound_poisson(0.0, SeverityPmf::point(0), options.n_max, options.unit));
            continue;
        }
        SeverityPmf mix;
        mix.probs.assign(support + 1, 0.0);
        for (const auto& p : portfolio.policyholders) {
            double wgt = p.multiplicity * p.rate * p.weights[ki] / rho;
            if (wgt == 0.0) continue;
            for (std::size_t m = 0; m < p.severity.probs.size(); ++m) mix.probs[m] += wgt * p.severity.probs[m];
        }
        double total = std::accumulate(mix.probs.begin(), mix.probs.end(), 0.0);
        for (double& x : mix.probs) x /= total;

        auto pinned = fixed.find(k);
        if (k == 0) {
            parts.push_back(panjer_compound_poisson(rho, mix, options.n_max, options.unit));
        } else if (pinned != fixed.end()) {
            parts.push_back(panjer_compound_poisson(rho * pinned->second, mix, options.n_max, options.unit));
        } else if (factors.degenerate(k)) {
            parts.push_back(panjer_compound_poisson(rho, mix, options.n_max, options.unit));
        } else {
            double r = 1.0 / factors.sigma2[ki - 1];
            parts.push_back(panjer_compound_negbin(r, r / (r + rho), mix, options.n_max, options.unit));
        }
    }
    return parts;
}

LossDistribution aggregate_scenario(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                    const std::map<int, double>& fixed, const AggregateOptions& options) {
    auto parts = aggregate_parts(portfolio, factors, options, fixed);
    LossDistribution acc = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto& next = parts[i];
        if (next.pmf.size() == 1 && next.pmf[0] == 1.0) continue;
        if (acc.pmf.size() == 1 && acc.pmf[0] == 1.0) {
            acc = next;
            continue;
        }
        std::size_t n_max = options.n_max > 0 ? options.n_max : acc.n_max() + next.n_max();
        acc = convolve(acc, next, n_max);
    }
    if (options.n_max == 0) {
        // Drop the far tail of the full convolution so grids stay proportional to the spread.
        double suffix = 0.0;
        std::size_t keep = acc.pmf.size();
        while (keep > 1 && suffix + acc.pmf[keep - 1] < kAutoTailTarget * 1e-3) suffix += acc.pmf[--keep];
        acc.pmf.resize(keep);
        finish(acc);
    }
    return acc;
}

LossDistribution aggregate_loss(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                const AggregateOptions& options) {
    return aggregate_scenario(portfolio, factors, {}, options);
}

LossDistribution monte_carlo_bernoulli(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                       const MonteCarloOptions& options) {
    portfolio.validate();
    if (options.n_sims == 0) throw DomainError("Monte Carlo needs at least one simulation");
    for (const auto& p : portfolio.policyholders)
        if (std::abs(p.multiplicity - std::round(p.multiplicity)) > 1e-9)
            throw DomainError("Monte Carlo needs integer policyholder counts");
    kernels::BernoulliMcConfig cfg{options.n_sims, options.seed, options.exponential_probability};
    auto totals = options.parallel ? kernels::bernoulli_totals(portfolio, factors, cfg)
                                   : kernels::serial::bernoulli_totals(portfolio, factors, cfg);
    std::int64_t mx = *std::max_element(totals.begin(), totals.end());
    LossDistribution d{options.unit, std::vector<double>(static_cast<std::size_t>(mx) + 1, 0.0), 0.0};
    std::vector<std::int64_t> counts(d.pmf.size(), 0);
    for (auto t : totals) ++counts[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < counts.size(); ++i)
        d.pmf[i] = static_cast<double>(counts[i]) / static_cast<double>(options.n_sims);
    return d;
}

double total_variation(const LossDistribution& p, const LossDistribution& q) {
    if (p.unit != q.unit) throw DomainError("total variation needs equal loss units");
    std::size_t n = std::max(p.pmf.size(), q.pmf.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = i < p.pmf.size() ? p.pmf[i] : 0.0;
        double b = i < q.pmf.size() ? q.pmf[i] : 0.0;
        s += std::abs(a - b);
    }
    s += std::abs(p.tail_mass - q.tail_mass);
    return std::min(1.0, 0.5 * s);
}

std::vector<std::size_t> quantiles(const LossDistribution& d, std::span<const double> levels) {
    std::vector<std::size_t> out;
    out.reserve(levels.size());
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) throw DomainError("quantile levels must lie in (0, 1)");
        if (level > 1.0 - d.tail_mass) throw TruncationError("quantile level lies in the truncated tail");
        double c = 0.0;
        std::size_t n = 0;
        bool found = false;
        for (; n < d.pmf.size(); ++n) {
            c += d.pmf[n];
            if (c >= level) {
                found = true;
                break;
            }
        }
        if (!found) throw TruncationError("quantile level lies beyond the computed grid");
        out.push_back(n);
    }
    return out;
}

LossDistribution poisson_distribution(double mean, std::size_t n_max) {
    if (!(mean >= 0.0)) throw DomainError("Poisson mean must be non-negative");
    if (n_max == 0) n_max = auto_start(mean, mean, 1) * 2;
    LossDistribution d{1.0, std::vector<double>(n_max + 1, 0.0), 0.0};
    if (mean == 0.0) {
        d.pmf[0] = 1.0;
        return d;
    }
    double lm = std::log(mean);
    for (std::size_t n = 0; n <= n_max; ++n) {
        double nn = static_cast<double>(n);
        d.pmf[n] = std::exp(nn * lm - mean - std::lgamma(nn + 1.0));
    }
    finish(d);
    return d;
}

LossDistribution binomial_distribution(std::int64_t trials, double prob) {
    if (trials < 0) throw DomainError("binomial needs a non-negative number of trials");
    if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("binomial probability must lie in [0, 1]");
    LossDistribution d{1.0, std::vector<double>(static_cast<std::size_t>(trials) + 1, 0.0), 0.0};
    if (prob == 0.0 || prob == 1.0) {
        d.pmf[prob == 0.0 ? 0 : static_cast<std::size_t>(trials)] = 1.0;
        return d;
    }
    double t = static_cast<double>(trials);
    double lp = std::log(prob), lq = std::log1p(-prob), lt = std::lgamma(t + 1.0);
    for (std::int64_t n = 0; n <= trials; ++n) {
        double nn = static_cast<double>(n);
        d.pmf[static_cast<std::size_t>(n)] =
            std::exp(lt - std::lgamma(nn + 1.0) - std::lgamma(t - nn + 1.0) + nn * lp + (t - nn) * lq);
    }
    finish(d);
    return d;
}

}  // namespace ecrp
