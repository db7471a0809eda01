#include "ecrp/apps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecrp/likelihood.hpp"
#include "ecrp/map_estimates.hpp"

namespace ecrp {

DiscountCurve::DiscountCurve(std::vector<double> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) factors_.push_back(1.0);
    if (std::abs(factors_.front() - 1.0) > 1e-12) throw DomainError("discount curve must start with D(T, T) = 1");
    for (double d : factors_)
        if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("discount factors must be positive");
}

DiscountCurve DiscountCurve::flat(double rate, int horizon) {
    if (!(rate > -1.0)) throw DomainError("flat rate must exceed -1");
    std::vector<double> f(static_cast<std::size_t>(std::max(horizon, 1)) + 1);
    for (std::size_t t = 0; t < f.size(); ++t) f[t] = std::pow(1.0 + rate, -static_cast<double>(t));
    return DiscountCurve(std::move(f));
}

double DiscountCurve::operator()(int t) const {
    if (t < 0) throw DomainError("negative discount horizon");
    int h = horizon();
    if (t <= h) return factors_[static_cast<std::size_t>(t)];
    double fwd = h > 0 ? factors_[static_cast<std::size_t>(h)] / factors_[static_cast<std::size_t>(h - 1)] : 1.0;
    return factors_[static_cast<std::size_t>(h)] * std::pow(fwd, t - h);
}

DiscountCurve DiscountCurve::shifted(int shift) const {
    if (shift < 0) throw DomainError("negative curve shift");
    int h = std::max(horizon() - shift, 1);
    std::vector<double> f(static_cast<std::size_t>(h) + 1);
    double base = (*this)(shift);
    for (int t = 0; t <= h; ++t) f[static_cast<std::size_t>(t)] = (*this)(shift + t) / base;
    return DiscountCurve(std::move(f));
}

double inflate_variance(double sigma2, double d, double t, double T) {
    if (t < T) throw DomainError("variance inflation is defined for t >= T");
    if (d < 0.0) throw DomainError("variance inflation slope must be non-negative");
    double f = 1.0 + d * (t - T);
    return sigma2 * f * f;
}

DEstimate estimate_d(const MortalityDataset& ds, const ModelParams& theta, int ref_year, double d_max) {
    if (!(d_max > 0.0)) throw DomainError("upper bound for d must be positive");
    auto ll = [&](double d) {
        return log_likelihood(ds, theta, [&](int k, int ti) {
            double s2 = theta.sigma2[static_cast<std::size_t>(k - 1)];
            int year = ds.year(ti);
            return year >= ref_year ? inflate_variance(s2, d, year, ref_year) : s2;
        });
    };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = d_max;
    double c = b - phi * (b - a), e = a + phi * (b - a);
    double fc = ll(c), fe = ll(e);
    while (b - a > 1e-6) {
        if (fc >= fe) {
            b = e;
            e = c;
            fe = fc;
            c = b - phi * (b - a);
            fc = ll(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + phi * (b - a);
            fe = ll(e);
        }
    }
    DEstimate out;
    out.d = 0.5 * (a + b);
    out.log_likelihood = ll(out.d);
    double at0 = ll(0.0), at_max = ll(d_max);
    if (at0 >= out.log_likelihood) {
        out.d = 0.0;
        out.log_likelihood = at0;
    }
    if (at_max > out.log_likelihood) {
        out.d = d_max;
        out.log_likelihood = at_max;
        out.warning = "maximum at the upper search bound";
    }
    double spread = std::max({std::abs(at0 - out.log_likelihood), std::abs(at_max - out.log_likelihood)});
    if (spread < 1e-9) {
        out.d = 0.0;
        out.log_likelihood = at0;
        out.flat = true;
        out.warning = "likelihood is flat in d; returning 0";
    }
    return out;
}

double RateForecast::rate_quantile(double level) const {
    double lv[] = {level};
    return static_cast<double>(quantiles(counts, lv)[0]) / exposure;
}

double RateForecast::mean_rate() const { return counts.mean() / exposure; }

RateForecast forecast_rates(std::span<const ModelParams> samples, int age, Gender g, int year, double exposure,
                            const ForecastConfig& config) {
    if (samples.empty()) throw DomainError("forecast needs at least one parameter sample");
    if (!(exposure > 0.0)) throw DomainError("forecast exposure must be positive");
    if (config.d < 0.0) throw DomainError("variance inflation slope must be non-negative");
    std::vector<LossDistribution> parts(samples.size());
    std::vector<std::exception_ptr> errors(samples.size());
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t h = 0; h < n; ++h) {
        try {
            const ModelParams& th = samples[static_cast<std::size_t>(h)];
            EcrpPortfolio pf;
            pf.n_factors = th.n_factors;
            Policyholder ph;
            ph.rate = central_death_rate(th, age, g, year);
            ph.weights = cause_weights(th, age, g, year);
            ph.severity = SeverityPmf::point(1);
            ph.multiplicity = exposure;
            pf.policyholders.push_back(ph);
            RiskFactorSpec rf;
            for (double s2 : th.sigma2)
                rf.sigma2.push_back(year >= config.base_year ? inflate_variance(s2, config.d, year, config.base_year) : s2);
            parts[static_cast<std::size_t>(h)] = aggregate_loss(pf, rf);
        } catch (...) {
            errors[static_cast<std::size_t>(h)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    RateForecast out;
    out.exposure = exposure;
    std::size_t len = 0;
    for (const auto& p : parts) len = std::max(len, p.pmf.size());
    out.counts.pmf.assign(len, 0.0);
    const double wgt = 1.0 / static_cast<double>(parts.size());
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.pmf.size(); ++i) out.counts.pmf[i] += wgt * p.pmf[i];
        out.counts.tail_mass += wgt * p.tail_mass;
    }
    return out;
}

int age_group_of(const ModelParams& theta, int age) {
    if (theta.age_labels.empty()) return std::clamp(age, 0, theta.n_ages - 1);
    auto it = std::upper_bound(theta.age_labels.begin(), theta.age_labels.end(), age);
    if (it == theta.age_labels.begin()) return 0;
    return static_cast<int>(it - theta.age_labels.begin()) - 1;
}

DeathProbabilityFn death_probabilities(const ModelParams& theta, Gender g) {
    return [theta, g](int age, int year) {
        return death_probability(central_death_rate(theta, age_group_of(theta, age), g, year));
    };
}

double curtate_life_expectancy(const DeathProbabilityFn& q, int age, int T, int max_age, bool cohort) {
    double e = 0.0, surv = 1.0;
    for (int k = 1; k <= max_age - age; ++k) {
        int j = k - 1;
        surv *= 1.0 - q(age + j, cohort ? T + j : T);
        if (surv <= 0.0) break;
        e += surv;
    }
    return e;
}

double curtate_life_expectancy(const ModelParams& theta, int age, Gender g, int T, int max_age, bool cohort) {
    return curtate_life_expectancy(death_probabilities(theta, g), age, T, max_age, cohort);
}

double term_life_bel(const DeathProbabilityFn& q, int age, int T, int term, const DiscountCurve& curve) {
    if (term < 0) throw DomainError("contract term must be non-negative");
    double bel = curve(1) * q(age, T);
    double surv = 1.0;
    for (int t = 1; t <= term; ++t) {
        surv *= 1.0 - q(age + t - 1, T + t - 1);
        bel += curve(t + 1) * surv * q(age + t, T + t);
    }
    return bel;
}

double term_life_bel(const ModelParams& theta, int age, Gender g, int T, int term, const DiscountCurve& curve) {
    return term_life_bel(death_probabilities(theta, g), age, T, term, curve);
}

double DeltaBofResult::mean() const {
    double s = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        s += values[i] * probs[i];
        mass += probs[i];
    }
    return mass > 0.0 ? s / mass : 0.0;
}

double DeltaBofResult::quantile(double level) const {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("quantile levels must lie in (0, 1)");
    if (level > 1.0 - tail_mass) throw TruncationError("quantile level lies in the truncated tail");
    double c = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        c += probs[i];
        if (c >= level) return values[i];
    }
    throw TruncationError("quantile level lies beyond the computed grid");
}

DeltaBofResult delta_bof(std::span<const LumpSumPolicy> policies, std::span<const ModelParams> samples,
                         const DiscountCurve& curve, const ScrOptions& options) {
    if (samples.empty()) throw DomainError("need at least one parameter sample");
    if (!(options.coupon > -1.0)) throw DomainError("coupon rate must exceed -1");
    const int T = options.base_year;
    const double d01 = curve(1);
    const DiscountCurve curve1 = curve.shifted(1);

    // Mean parameter sample for the time-0 BEL.
    ModelParams mean = samples.front();
    {
        std::vector<double> acc(flatten(mean).size(), 0.0);
        for (const auto& s : samples) {
            auto f = flatten(s);
            for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
        }
        for (double& x : acc) x /= static_cast<double>(samples.size());
        unflatten(acc, mean);
    }
    double bel0 = 0.0;
    for (const auto& p : policies) {
        if (!(p.sum_insured >= 0.0)) throw DomainError("sums insured must be non-negative");
        bel0 += p.sum_insured * term_life_bel(mean, p.age, p.gender, T, p.term, curve);
    }
    const double constant = options.assets * (1.0 - d01 * (1.0 + options.coupon)) - bel0;

    // Per sample: reserves released at time 1 and the compound Poisson of death strain.
    struct SampleTerms {
        double reserve1 = 0.0;
        std::vector<double> severity;  // C_i (1 - A^1_i)
        std::vector<double> intensity; // q_i(0)
    };
    std::vector<SampleTerms> terms(samples.size());
    double max_sev = 0.0;
    for (std::size_t h = 0; h < samples.size(); ++h) {
        auto q = death_probabilities(samples[h], Gender::female);
        auto qm = death_probabilities(samples[h], Gender::male);
        for (const auto& p : policies) {
            const auto& qq = p.gender == Gender::female ? q : qm;
            double a1 = p.term >= 1 ? term_life_bel(qq, p.age + 1, T + 1, p.term - 1, curve1) : 0.0;
            double sev = p.sum_insured * (1.0 - a1);
            if (sev < 0.0) throw DomainError("death strain is negative; discount factors above one are not supported");
            terms[h].reserve1 += p.sum_insured * a1;
            terms[h].severity.push_back(sev);
            terms[h].intensity.push_back(qq(p.age, T));
            max_sev = std::max(max_sev, sev);
        }
    }
    double unit = options.unit > 0.0 ? options.unit : (max_sev > 0.0 ? max_sev / 500.0 : 1.0);

    std::vector<LossDistribution> dists(samples.size());
    std::vector<std::exception_ptr> errors(samples.size());
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t hh = 0; hh < n; ++hh) {
        auto h = static_cast<std::size_t>(hh);
        try {
            EcrpPortfolio pf;
            pf.n_factors = 0;
            for (std::size_t i = 0; i < policies.size(); ++i) {
                Policyholder ph;
                ph.rate = terms[h].intensity[i];
                ph.weights = {1.0};
                ph.severity = stochastic_round(terms[h].severity[i], unit);
                pf.policyholders.push_back(std::move(ph));
            }
            dists[h] = aggregate_loss(pf, RiskFactorSpec{}, AggregateOptions{unit, 0});
        } catch (...) {
            errors[h] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    DeltaBofResult out;
    std::vector<std::pair<double, double>> atoms;
    const double wgt = 1.0 / static_cast<double>(samples.size());
    for (std::size_t h = 0; h < samples.size(); ++h) {
        double base = constant + d01 * terms[h].reserve1;
        for (std::size_t i = 0; i < dists[h].pmf.size(); ++i)
            if (dists[h].pmf[i] > 0.0)
                atoms.emplace_back(base + d01 * unit * static_cast<double>(i), wgt * dists[h].pmf[i]);
        out.tail_mass += wgt * dists[h].tail_mass;
    }
    std::sort(atoms.begin(), atoms.end());
    for (const auto& [v, p] : atoms) {
        if (!out.values.empty() && out.values.back() == v) {
            out.probs.back() += p;
            continue;
        }
        out.values.push_back(v);
        out.probs.push_back(p);
    }
    out.scr = out.quantile(options.level);
    return out;
}

double scenario_factor(double reduction, double count_sum, double rho_sum, double sigma2) {
    if (!(reduction >= 0.0 && reduction <= 1.0)) throw DomainError("scenario reduction must lie in [0, 1]");
    return map_lambda(sigma2, (1.0 - reduction) * count_sum, rho_sum);
}

}  // namespace ecrp
