#include "ecrp/mm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ecrp {

namespace {

struct LineFit {
    double intercept = 0.0, slope = 0.0;
    bool ok = false;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    std::size_t n = x.size();
    if (n == 0) return f;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    f.slope = (n >= 2 && sxx > 0.0) ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.ok = n >= 2 && sxx > 0.0;
    return f;
}

std::string cell_name(const ModelParams& p, int a, Gender g) {
    std::ostringstream os;
    os << "age " << p.age_label(a) << " gender " << gender_code(g);
    return os.str();
}

}  // namespace

MmEstimate mm_estimate(const MortalityDataset& ds, const ModelParams& fixed) {
    if (fixed.n_ages != ds.n_ages() || fixed.n_causes() != ds.n_causes())
        throw DomainError("model dimensions do not match the dataset");
    MmEstimate est;
    est.params = fixed;
    ModelParams& p = est.params;
    std::vector<double> x, y;
    int dropped_rate = 0, dropped_weight = 0;

    for (int a = 0; a < ds.n_ages(); ++a)
        for (int gi = 0; gi < kGenders; ++gi) {
            Gender g = gender_from_index(gi);
            auto grp = static_cast<std::size_t>(ModelParams::group(a, g));
            x.clear();
            y.clear();
            for (int ti = 0; ti < ds.n_years(); ++ti) {
                double e = ds.exposure(a, g, ti);
                double n = static_cast<double>(ds.total_deaths(a, g, ti));
                if (!(e > 0.0) || n <= 0.0 || n >= e) {
                    ++dropped_rate;
                    continue;
                }
                double year = ds.year(ti);
                double gamma = p.cohort.empty() ? 0.0 : p.cohort_effect(ds.year(ti) - p.age_label(a));
                x.push_back(model_trend(p, year, p.zeta[grp], p.eta[grp]));
                y.push_back(laplace_quantile(n / e) - gamma);
            }
            LineFit f = least_squares(x, y);
            if (x.empty()) {
                est.warnings.push_back("no usable rate observations for " + cell_name(p, a, g));
                continue;
            }
            if (!f.ok) est.warnings.push_back("rate trend not identified for " + cell_name(p, a, g) + "; slope set to 0");
            p.alpha[grp] = f.intercept;
            p.beta[grp] = f.slope;
        }

    for (int a = 0; a < ds.n_ages(); ++a)
        for (int gi = 0; gi < kGenders; ++gi) {
            Gender g = gender_from_index(gi);
            int grp = ModelParams::group(a, g);
            for (int k = 0; k < ds.n_causes(); ++k) {
                auto ki = static_cast<std::size_t>(k);
                x.clear();
                y.clear();
                for (int ti = 0; ti < ds.n_years(); ++ti) {
                    std::int64_t n = ds.deaths(a, g, k, ti);
                    double em = ds.exposure(a, g, ti) * central_death_rate(p, a, g, ds.year(ti));
                    if (n <= 0 || !(em > 0.0)) {
                        ++dropped_weight;
                        continue;
                    }
                    x.push_back(model_trend(p, ds.year(ti), p.phi[ki], p.psi[ki]));
                    y.push_back(std::log(static_cast<double>(n)) - std::log(em));
                }
                auto wi = static_cast<std::size_t>(p.weight_index(grp, k));
                LineFit f = least_squares(x, y);
                if (x.empty()) {
                    // No deaths of this cause at all: a very small weight.
                    p.u[wi] = -30.0;
                    p.v[wi] = 0.0;
                    est.warnings.push_back("no deaths of cause " + std::to_string(k) + " for " + cell_name(p, a, g));
                    continue;
                }
                p.u[wi] = f.intercept;
                p.v[wi] = f.slope;
            }
        }
    if (dropped_rate > 0)
        est.warnings.push_back(std::to_string(dropped_rate) + " cells without deaths dropped from the rate regression");
    if (dropped_weight > 0)
        est.warnings.push_back(std::to_string(dropped_weight) + " zero-count cells dropped from the weight regression");
    p.canonicalize();

    est.transformed = transform_iid(ds, p);
    est.sigma2 = mm_sigma2(est.transformed);
    p.sigma2 = est.sigma2;
    return est;
}

std::vector<double> mm_sigma2(const TransformedCounts& tc) {
    const auto& ds = tc.counts;
    if (ds.n_years() < 2) throw DomainError("matching of moments needs at least two years");
    std::vector<double> out;
    std::vector<double> wstar(static_cast<std::size_t>(ds.n_years()));
    for (int k = 1; k < ds.n_causes(); ++k) {
        double num = 0.0, den = 0.0;
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender g = gender_from_index(gi);
                auto grp = static_cast<std::size_t>(ModelParams::group(a, g));
                double em = tc.exposure_ref[grp] * tc.rate_ref[grp];
                double w = tc.weight_ref[grp * static_cast<std::size_t>(ds.n_causes()) + static_cast<std::size_t>(k)];
                if (!(em > 0.0)) continue;
                double mean = 0.0;
                for (int ti = 0; ti < ds.n_years(); ++ti) {
                    wstar[static_cast<std::size_t>(ti)] = static_cast<double>(ds.deaths(a, g, k, ti)) / em;
                    mean += wstar[static_cast<std::size_t>(ti)];
                }
                mean /= static_cast<double>(ds.n_years());
                double s2 = 0.0;
                for (double v : wstar) s2 += (v - mean) * (v - mean);
                s2 /= static_cast<double>(ds.n_years() - 1);
                num += s2 - w / em;
                den += w * w;
            }
        out.push_back(den > 0.0 ? std::max(0.0, num / den) : 0.0);
    }
    return out;
}

}  // namespace ecrp
