#include "ecrp/likelihood.hpp"

#include <cmath>
#include <limits>

namespace ecrp {

namespace {

void check_dims(const MortalityDataset& ds, const ModelParams& theta) {
    if (theta.n_ages != ds.n_ages() || theta.n_causes() != ds.n_causes())
        throw DomainError("model dimensions do not match the dataset");
}

// N log rho - log N!, with the 0 log 0 = 0 convention.
double poisson_cell(std::int64_t n, double rho) {
    if (n == 0) return 0.0;
    return static_cast<double>(n) * std::log(rho) - std::lgamma(static_cast<double>(n) + 1.0);
}

}  // namespace

IntensityGrid intensity_grid(const MortalityDataset& ds, const ModelParams& theta) {
    check_dims(ds, theta);
    IntensityGrid g{ds.n_years(), theta.n_groups(), ds.n_causes(), {}, {}};
    const auto causes = static_cast<std::size_t>(ds.n_causes());
    g.rho.assign(static_cast<std::size_t>(g.n_years) * static_cast<std::size_t>(g.n_groups) * causes, 0.0);
    g.rho_marginal.assign(static_cast<std::size_t>(g.n_years) * causes, 0.0);
    std::vector<double> w(causes);
    for (int ti = 0; ti < ds.n_years(); ++ti)
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender gen = gender_from_index(gi);
                int grp = ModelParams::group(a, gen);
                double em = ds.exposure(a, gen, ti) * central_death_rate(theta, a, gen, ds.year(ti));
                cause_weights(theta, a, gen, ds.year(ti), w);
                for (std::size_t k = 0; k < causes; ++k) {
                    double r = em * w[k];
                    g.rho[(static_cast<std::size_t>(ti) * static_cast<std::size_t>(g.n_groups) + static_cast<std::size_t>(grp)) * causes + k] = r;
                    g.rho_marginal[static_cast<std::size_t>(ti) * causes + k] += r;
                }
            }
    return g;
}

double log_gamma_ratio(double r, std::int64_t n) {
    if (n == 0) return 0.0;
    double nn = static_cast<double>(n);
    if (n <= 32) {
        double s = 0.0;
        for (std::int64_t i = 0; i < n; ++i) s += std::log(r + static_cast<double>(i));
        return s;
    }
    if (r >= 1e6) {
        // Stirling difference written without cancellation.
        double x = r + nn;
        double main = (r - 0.5) * std::log1p(nn / r) + nn * std::log(x) - nn;
        double corr = (1.0 / (12.0 * x) - 1.0 / (360.0 * x * x * x)) - (1.0 / (12.0 * r) - 1.0 / (360.0 * r * r * r));
        return main + corr;
    }
    return std::lgamma(r + nn) - std::lgamma(r);
}

double factor_log_term(double sigma2, std::int64_t count_sum, double rho_sum) {
    if (sigma2 < kDegenerateVariance) return -rho_sum;
    double r = 1.0 / sigma2;
    double n = static_cast<double>(count_sum);
    return log_gamma_ratio(r, count_sum) - r * std::log1p(rho_sum / r) - n * std::log(r + rho_sum);
}

double log_likelihood(const MortalityDataset& ds, const ModelParams& theta) {
    return log_likelihood(ds, theta, [&](int k, int) { return theta.sigma2[static_cast<std::size_t>(k - 1)]; });
}

double log_likelihood(const MortalityDataset& ds, const ModelParams& theta, const VarianceSchedule& variance) {
    IntensityGrid g = intensity_grid(ds, theta);
    double ll = 0.0;
    for (int ti = 0; ti < ds.n_years(); ++ti) {
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender gen = gender_from_index(gi);
                int grp = ModelParams::group(a, gen);
                for (int k = 0; k < ds.n_causes(); ++k) {
                    std::int64_t n = ds.deaths(a, gen, k, ti);
                    double rho = g.cell(ti, grp, k);
                    if (n > 0 && !(rho > 0.0)) return -std::numeric_limits<double>::infinity();
                    ll += poisson_cell(n, rho);
                }
            }
        ll -= g.marginal(ti, 0);
        for (int k = 1; k < ds.n_causes(); ++k)
            ll += factor_log_term(variance(k, ti), ds.cause_total(k, ti), g.marginal(ti, k));
    }
    return ll;
}

double log_likelihood_bernoulli(const MortalityDataset& ds, const ModelParams& theta) {
    if (ds.n_causes() != 1) throw DomainError("Bernoulli likelihood needs K = 0");
    check_dims(ds, theta);
    double ll = 0.0;
    for (int ti = 0; ti < ds.n_years(); ++ti)
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender gen = gender_from_index(gi);
                double e = ds.exposure(a, gen, ti);
                double n = static_cast<double>(ds.deaths(a, gen, 0, ti));
                if (n > e) throw DomainError("deaths exceed exposure in the Bernoulli likelihood");
                double m = central_death_rate(theta, a, gen, ds.year(ti));
                ll += std::lgamma(e + 1.0) - std::lgamma(n + 1.0) - std::lgamma(e - n + 1.0);
                if (n > 0.0) ll += n * std::log(m);
                if (e - n > 0.0) ll += (e - n) * std::log1p(-m);
            }
    return ll;
}

PriorSpec PriorSpec::smoothing_defaults() {
    PriorSpec p;
    const double c = 500.0;
    p.alpha.c = c;
    p.beta.c = 30000.0 * c;
    p.eta.c = 30000.0 * c;
    p.zeta.c = c / 20.0;
    p.gamma.c = 1000.0 * c;
    return p;
}

double difference_penalty(std::span<const double> x, const PriorBlock& block, int order) {
    if (order < 1 || order > 3) throw DomainError("difference order must be 1, 2 or 3");
    if (block.c == 0.0) return 0.0;
    static constexpr double coef[4][4] = {{1, 0, 0, 0}, {1, -1, 0, 0}, {1, -2, 1, 0}, {1, -3, 3, -1}};
    double s = 0.0;
    const auto ord = static_cast<std::size_t>(order);
    for (std::size_t i = 0; i + ord < x.size(); ++i) {
        double d = 0.0;
        for (std::size_t nu = 0; nu <= ord; ++nu) d += coef[ord][nu] * x[i + nu];
        s += d * d;
    }
    double ridge = 0.0;
    if (block.eps != 0.0)
        for (double xi : x) ridge += xi * xi;
    return -block.c * (s + block.eps * ridge);
}

double log_prior_smoothing(const ModelParams& theta, const PriorSpec& prior) {
    double lp = 0.0;
    std::vector<double> seq(static_cast<std::size_t>(theta.n_ages));
    auto per_gender = [&](const std::vector<double>& fam, const PriorBlock& block) {
        if (block.c == 0.0) return;
        for (int gi = 0; gi < kGenders; ++gi) {
            for (int a = 0; a < theta.n_ages; ++a)
                seq[static_cast<std::size_t>(a)] = fam[static_cast<std::size_t>(ModelParams::group(a, gender_from_index(gi)))];
            lp += difference_penalty(seq, block, prior.order);
        }
    };
    per_gender(theta.alpha, prior.alpha);
    per_gender(theta.beta, prior.beta);
    per_gender(theta.zeta, prior.zeta);
    per_gender(theta.eta, prior.eta);
    auto per_cause = [&](const std::vector<double>& fam, const PriorBlock& block) {
        if (block.c == 0.0) return;
        for (int gi = 0; gi < kGenders; ++gi)
            for (int k = 0; k < theta.n_causes(); ++k) {
                for (int a = 0; a < theta.n_ages; ++a)
                    seq[static_cast<std::size_t>(a)] = fam[static_cast<std::size_t>(
                        theta.weight_index(ModelParams::group(a, gender_from_index(gi)), k))];
                lp += difference_penalty(seq, block, prior.order);
            }
    };
    per_cause(theta.u, prior.u);
    per_cause(theta.v, prior.v);
    if (prior.gamma.c != 0.0 && !theta.cohort.empty()) {
        std::vector<double> g;
        for (const auto& [_, x] : theta.cohort) g.push_back(x);
        lp += difference_penalty(g, prior.gamma, prior.order);
    }
    return lp;
}

double log_unit_gamma_density(double x, double sigma2) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    if (!(sigma2 > 0.0)) throw DomainError("gamma density needs sigma2 > 0");
    double r = 1.0 / sigma2;
    return r * std::log(r) - std::lgamma(r) + (r - 1.0) * std::log(x) - r * x;
}

double log_posterior(const MortalityDataset& ds, const ModelParams& theta, const FactorSeries& lambda,
                     const PriorSpec& prior) {
    check_dims(ds, theta);
    if (lambda.n_factors() != ds.n_factors() || lambda.n_years() != ds.n_years())
        throw DomainError("factor series dimensions do not match the dataset");
    IntensityGrid g = intensity_grid(ds, theta);
    double lp = log_prior_smoothing(theta, prior);
    for (int ti = 0; ti < ds.n_years(); ++ti) {
        for (int k = 1; k < ds.n_causes(); ++k) {
            double lam = lambda(k, ti);
            if (!(lam > 0.0)) throw DomainError("risk-factor realisations must be positive");
            double s2 = theta.sigma2[static_cast<std::size_t>(k - 1)];
            if (s2 >= kDegenerateVariance) lp += log_unit_gamma_density(lam, s2);
        }
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender gen = gender_from_index(gi);
                int grp = ModelParams::group(a, gen);
                for (int k = 0; k < ds.n_causes(); ++k) {
                    double mu = g.cell(ti, grp, k) * (k == 0 ? 1.0 : lambda(k, ti));
                    std::int64_t n = ds.deaths(a, gen, k, ti);
                    if (n > 0 && !(mu > 0.0)) return -std::numeric_limits<double>::infinity();
                    lp += poisson_cell(n, mu) - mu;
                }
            }
    }
    return lp;
}

}  // namespace ecrp
