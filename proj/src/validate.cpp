#include "ecrp/validate.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>

#include "ecrp/mcmc.hpp"
#include "ecrp/rng.hpp"

namespace ecrp {

namespace {

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

// Variance over t of sum_{a,g} N'_{a,g,k}(t) for k = 1..K.
std::vector<double> cause_total_variances(const MortalityDataset& ds) {
    std::vector<double> out;
    std::vector<double> tot(static_cast<std::size_t>(ds.n_years()));
    for (int k = 1; k < ds.n_causes(); ++k) {
        for (int ti = 0; ti < ds.n_years(); ++ti) tot[static_cast<std::size_t>(ti)] = static_cast<double>(ds.cause_total(k, ti));
        out.push_back(sample_variance(tot));
    }
    return out;
}

std::string cell_label(int a, Gender g, int k) {
    std::ostringstream os;
    os << "a" << a << gender_code(g) << "k" << k;
    return os.str();
}

}  // namespace

std::vector<TestReport> cross_variance_check(const TransformedCounts& tc, std::span<const ModelParams> samples,
                                             std::uint64_t seed, double lower, double upper) {
    if (samples.empty()) throw DomainError("cross variance check needs parameter samples");
    if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) throw DomainError("band levels must satisfy 0 <= lower < upper <= 1");
    const auto& ds = tc.counts;
    const int K = ds.n_factors();
    std::vector<double> observed = cause_total_variances(ds);

    std::vector<std::vector<double>> sims(samples.size());
    std::vector<std::exception_ptr> errors(samples.size());
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t hh = 0; hh < n; ++hh) {
        auto h = static_cast<std::size_t>(hh);
        try {
            MortalityDataset sim = synth_generate(samples[h], ds.exposure_grid(), derive_seed(seed, {h}));
            sims[h] = cause_total_variances(transform_iid(sim, samples[h]).counts);
        } catch (...) {
            errors[h] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<TestReport> out;
    for (int k = 1; k <= K; ++k) {
        auto ki = static_cast<std::size_t>(k - 1);
        std::vector<double> band;
        band.reserve(sims.size());
        for (const auto& s : sims) band.push_back(s[ki]);
        TestReport r;
        r.test = "cross_variance";
        r.cells = "k" + std::to_string(k);
        r.statistic = observed[ki];
        r.critical = lower > 0.0 ? empirical_quantile(band, lower) : *std::min_element(band.begin(), band.end());
        r.critical_upper = empirical_quantile(band, upper);
        // Tolerance so that a degenerate band [v, v] accepts v up to round-off.
        double tol = 1e-9 * std::max(1.0, std::abs(r.critical_upper));
        r.reject = r.statistic < r.critical - tol || r.statistic > r.critical_upper + tol;
        r.n_obs = ds.n_years();
        out.push_back(r);
    }
    return out;
}

TestReport independence_test(std::span<const double> x, std::span<const double> y, double level) {
    if (x.size() != y.size()) throw DomainError("independence test needs series of equal length");
    if (x.size() < 3) throw DomainError("independence test needs T >= 3");
    if (!(level > 0.0 && level < 1.0)) throw DomainError("test level must lie in (0, 1)");
    const auto T = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= T;
    my /= T;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DomainError("independence test on a zero-variance series");
    double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    TestReport rep;
    rep.test = "independence";
    rep.n_obs = static_cast<int>(x.size());
    double denom = 1.0 - r * r;
    rep.statistic = denom > 0.0 ? std::abs(r) / std::sqrt(denom / (T - 2.0)) : std::numeric_limits<double>::infinity();
    boost::math::students_t dist(T - 2.0);
    rep.critical = boost::math::quantile(boost::math::complement(dist, level / 2.0));
    rep.reject = rep.statistic > rep.critical;
    return rep;
}

std::vector<TestReport> independence_tests(const NormalizedCounts& n, double level) {
    struct Series {
        std::string name;
        int k;
        std::vector<double> x;
    };
    std::vector<Series> all;
    for (int a = 0; a < n.n_ages; ++a)
        for (int gi = 0; gi < kGenders; ++gi)
            for (int k = 0; k < n.n_causes; ++k) {
                Gender g = gender_from_index(gi);
                all.push_back({cell_label(a, g, k), k, n.series(a, g, k)});
            }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (all[i].k != all[j].k) pairs.emplace_back(i, j);
    std::vector<TestReport> out(pairs.size());
    std::vector<std::exception_ptr> errors(pairs.size());
    const auto np = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < np; ++p) {
        auto pi = static_cast<std::size_t>(p);
        const auto& [i, j] = pairs[pi];
        try {
            out[pi] = independence_test(all[i].x, all[j].x, level);
            out[pi].cells = all[i].name + ":" + all[j].name;
        } catch (...) {
            errors[pi] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

TestReport serial_correlation_test(std::span<const double> x, int lags, double level) {
    if (lags < 1) throw DomainError("lag order must be at least 1");
    if (!(level > 0.0 && level < 1.0)) throw DomainError("test level must lie in (0, 1)");
    const int T = static_cast<int>(x.size());
    if (T <= lags + 2) throw DomainError("serial correlation test needs T > p + 2");
    double m = 0.0;
    for (double v : x) m += v;
    m /= T;
    std::vector<double> e(x.size());
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = x[i] - m;
        var += e[i] * e[i];
    }
    if (!(var > 1e-300)) throw DomainError("serial correlation test on a zero-variance series");

    const int rows = T - lags;
    Eigen::MatrixXd X(rows, lags + 1);
    Eigen::VectorXd y(rows);
    for (int i = 0; i < rows; ++i) {
        int t = i + lags;
        y(i) = e[static_cast<std::size_t>(t)];
        X(i, 0) = 1.0;
        for (int j = 1; j <= lags; ++j) X(i, j) = e[static_cast<std::size_t>(t - j)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < lags + 1) throw DomainError("rank-deficient design in the serial correlation test");
    Eigen::VectorXd beta = qr.solve(y);
    Eigen::VectorXd resid = y - X * beta;
    double ybar = y.mean();
    double tss = (y.array() - ybar).square().sum();
    double rss = resid.squaredNorm();
    double r2 = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 0.0;

    TestReport rep;
    rep.test = "breusch_godfrey";
    rep.n_obs = T;
    rep.statistic = static_cast<double>(rows) * r2;
    boost::math::chi_squared dist(lags);
    rep.critical = boost::math::quantile(boost::math::complement(dist, level));
    rep.reject = rep.statistic > rep.critical;
    return rep;
}

std::vector<TestReport> serial_correlation_tests(const NormalizedCounts& n, int max_lags, double level) {
    std::vector<TestReport> out;
    for (int a = 0; a < n.n_ages; ++a)
        for (int gi = 0; gi < kGenders; ++gi)
            for (int k = 0; k < n.n_causes; ++k) {
                Gender g = gender_from_index(gi);
                auto x = n.series(a, g, k);
                for (int p = 1; p <= max_lags; ++p) {
                    TestReport r = serial_correlation_test(x, p, level);
                    r.cells = cell_label(a, g, k) + "p" + std::to_string(p);
                    out.push_back(r);
                }
            }
    return out;
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw DomainError("KS statistic of an empty sample");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const auto n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double f = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double kolmogorov_cdf(double x) {
    if (!(x > 0.0)) return 0.0;
    constexpr double pi = std::numbers::pi;
    if (x < 1.0) {
        // Theta-function form, accurate for small x.
        double s = 0.0;
        for (int k = 1; k <= 50; ++k) {
            double t = std::exp(-static_cast<double>((2 * k - 1) * (2 * k - 1)) * pi * pi / (8.0 * x * x));
            s += t;
            if (t < 1e-17 * s) break;
        }
        return std::sqrt(2.0 * pi) / x * s;
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double t = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 == 1 ? 1.0 : -1.0) * t;
        if (t < 1e-17) break;
    }
    return 1.0 - 2.0 * s;
}

double kolmogorov_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("Kolmogorov quantile needs p in (0, 1)");
    double lo = 1e-3, hi = 10.0;
    for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
        double mid = 0.5 * (lo + hi);
        if (kolmogorov_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

TestReport ks_gamma_test(std::span<const double> lambda, double sigma2, double level) {
    if (lambda.size() < 5) throw DomainError("KS test needs T >= 5");
    if (!(sigma2 > 0.0)) throw DomainError("KS gamma test needs sigma2 > 0");
    if (!(level > 0.0 && level < 1.0)) throw DomainError("test level must lie in (0, 1)");
    boost::math::gamma_distribution<double> dist(1.0 / sigma2, sigma2);
    double d = ks_statistic(lambda, [&](double x) { return x <= 0.0 ? 0.0 : boost::math::cdf(dist, x); });
    TestReport rep;
    rep.test = "ks_gamma";
    rep.n_obs = static_cast<int>(lambda.size());
    rep.statistic = std::sqrt(static_cast<double>(lambda.size())) * d;
    rep.critical = kolmogorov_quantile(1.0 - level);
    rep.reject = rep.statistic > rep.critical;
    return rep;
}

InformationCriteria information_criteria(double log_likelihood, int n_params, int n_obs) {
    if (n_obs <= 0) throw DomainError("information criteria need n_obs > 0");
    InformationCriteria ic;
    ic.aic = 2.0 * n_params - 2.0 * log_likelihood;
    ic.bic = n_params * std::log(static_cast<double>(n_obs)) - 2.0 * log_likelihood;
    return ic;
}

double pass_rate(std::span<const TestReport> reports) {
    if (reports.empty()) return 1.0;
    auto passed = std::count_if(reports.begin(), reports.end(), [](const TestReport& r) { return !r.reject; });
    return static_cast<double>(passed) / static_cast<double>(reports.size());
}

}  // namespace ecrp
