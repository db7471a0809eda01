#include "ecrp/trendfam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ecrp {

namespace {

void check_size(const std::vector<double>& v, std::size_t n, const char* name) {
    if (v.size() != n) {
        std::ostringstream os;
        os << "parameter block " << name << " has " << v.size() << " entries, expected " << n;
        throw DomainError(os.str());
    }
}

std::string gender_label(int gi) { return gi == 0 ? "f" : "m"; }

}  // namespace

ModelParams ModelParams::make(int n_ages, int n_factors, double t0, std::vector<int> age_labels) {
    if (n_ages <= 0 || n_factors < 0) throw DomainError("need at least one age group and K >= 0");
    if (!age_labels.empty() && static_cast<int>(age_labels.size()) != n_ages)
        throw DomainError("age label count does not match the number of age groups");
    ModelParams p;
    p.n_ages = n_ages;
    p.n_factors = n_factors;
    p.t0 = t0;
    p.age_labels = std::move(age_labels);
    auto groups = static_cast<std::size_t>(p.n_groups());
    auto causes = static_cast<std::size_t>(p.n_causes());
    p.alpha.assign(groups, 0.0);
    p.beta.assign(groups, 0.0);
    p.zeta.assign(groups, 0.0);
    p.eta.assign(groups, 1.0 / 150.0);
    p.u.assign(groups * causes, 0.0);
    p.v.assign(groups * causes, 0.0);
    p.phi.assign(causes, 0.0);
    p.psi.assign(causes, 1.0 / 150.0);
    p.sigma2.assign(static_cast<std::size_t>(n_factors), 0.0);
    return p;
}

double ModelParams::cohort_effect(int birth_year) const {
    auto it = cohort.find(birth_year);
    return it == cohort.end() ? 0.0 : it->second;
}

void ModelParams::validate() const {
    if (n_ages <= 0 || n_factors < 0) throw DomainError("invalid model dimensions");
    if (!age_labels.empty() && static_cast<int>(age_labels.size()) != n_ages)
        throw DomainError("age label count does not match the number of age groups");
    auto groups = static_cast<std::size_t>(n_groups());
    auto causes = static_cast<std::size_t>(n_causes());
    check_size(alpha, groups, "alpha");
    check_size(beta, groups, "beta");
    check_size(zeta, groups, "zeta");
    check_size(eta, groups, "eta");
    check_size(u, groups * causes, "u");
    check_size(v, groups * causes, "v");
    check_size(phi, causes, "phi");
    check_size(psi, causes, "psi");
    check_size(sigma2, static_cast<std::size_t>(n_factors), "sigma2");
    for (double e : eta)
        if (!(e > 0.0)) throw DomainError("eta must be strictly positive");
    for (double s : psi)
        if (!(s > 0.0)) throw DomainError("psi must be strictly positive");
    for (double s : sigma2)
        if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("risk-factor variances must be non-negative");
    auto finite = [](const std::vector<double>& xs) {
        return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(alpha) || !finite(beta) || !finite(zeta) || !finite(eta) || !finite(u) || !finite(v) || !finite(phi) ||
        !finite(psi))
        throw DomainError("non-finite model parameter");
}

bool ModelParams::weight_trends_shared() const {
    if (phi.empty()) return true;
    return std::all_of(phi.begin(), phi.end(), [&](double x) { return x == phi.front(); }) &&
           std::all_of(psi.begin(), psi.end(), [&](double x) { return x == psi.front(); });
}

void ModelParams::canonicalize() {
    const bool shared = weight_trends_shared();
    const int causes = n_causes();
    for (int grp = 0; grp < n_groups(); ++grp) {
        double u0 = u[static_cast<std::size_t>(weight_index(grp, 0))];
        double v0 = v[static_cast<std::size_t>(weight_index(grp, 0))];
        for (int k = 0; k < causes; ++k) {
            u[static_cast<std::size_t>(weight_index(grp, k))] -= u0;
            if (shared) v[static_cast<std::size_t>(weight_index(grp, k))] -= v0;
        }
    }
}

std::vector<std::string> param_names(const ModelParams& p) {
    std::vector<std::string> names;
    auto group_name = [&](const char* fam, int grp) {
        int a = grp / kGenders;
        return std::string(fam) + "[a=" + std::to_string(p.age_label(a)) + ";g=" + gender_label(grp % kGenders) + "]";
    };
    for (const char* fam : {"alpha", "beta", "zeta", "eta"})
        for (int grp = 0; grp < p.n_groups(); ++grp) names.push_back(group_name(fam, grp));
    for (const char* fam : {"u", "v"})
        for (int grp = 0; grp < p.n_groups(); ++grp)
            for (int k = 0; k < p.n_causes(); ++k) {
                std::string n = group_name(fam, grp);
                n.insert(n.size() - 1, ";k=" + std::to_string(k));
                names.push_back(n);
            }
    for (int k = 0; k < p.n_causes(); ++k) names.push_back("phi[k=" + std::to_string(k) + "]");
    for (int k = 0; k < p.n_causes(); ++k) names.push_back("psi[k=" + std::to_string(k) + "]");
    for (int k = 1; k <= p.n_factors; ++k) names.push_back("sigma2[k=" + std::to_string(k) + "]");
    for (const auto& [c, _] : p.cohort) names.push_back("gamma[c=" + std::to_string(c) + "]");
    return names;
}

std::vector<double> flatten(const ModelParams& p) {
    std::vector<double> out;
    for (const auto* v : {&p.alpha, &p.beta, &p.zeta, &p.eta, &p.u, &p.v, &p.phi, &p.psi, &p.sigma2})
        out.insert(out.end(), v->begin(), v->end());
    for (const auto& [_, g] : p.cohort) out.push_back(g);
    return out;
}

void unflatten(std::span<const double> values, ModelParams& p) {
    std::size_t pos = 0;
    auto take = [&](std::vector<double>& v) {
        if (pos + v.size() > values.size()) throw DomainError("flattened parameter vector too short");
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(pos),
                  values.begin() + static_cast<std::ptrdiff_t>(pos + v.size()), v.begin());
        pos += v.size();
    };
    for (auto* v : {&p.alpha, &p.beta, &p.zeta, &p.eta, &p.u, &p.v, &p.phi, &p.psi, &p.sigma2}) take(*v);
    for (auto& [_, g] : p.cohort) {
        if (pos >= values.size()) throw DomainError("flattened parameter vector too short");
        g = values[pos++];
    }
    if (pos != values.size()) throw DomainError("flattened parameter vector too long");
}

double laplace_cdf(double x) {
    if (x < 0.0) return 0.5 * std::exp(x);
    return 1.0 - 0.5 * std::exp(-x);
}

double laplace_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("Laplace quantile needs p in (0, 1)");
    if (p < 0.5) return std::log(2.0 * p);
    return -std::log(2.0 * (1.0 - p));
}

double trend_reduction(double t, double zeta, double eta) {
    if (!(eta > 0.0)) throw DomainError("trend reduction needs eta > 0");
    return std::atan(eta * (t - zeta)) / eta;
}

double normalized_trend(double t, double zeta, double eta, double t0) {
    double at0 = trend_reduction(t0, zeta, eta);
    double denom = at0 - trend_reduction(t0 - 1.0, zeta, eta);
    if (!(denom > 0.0) || !std::isfinite(denom)) throw DomainError("degenerate trend normalisation");
    return (trend_reduction(t, zeta, eta) - at0) / denom;
}

double model_trend(const ModelParams& p, double t, double zeta, double eta) {
    return p.normalize_trend ? normalized_trend(t, zeta, eta, p.t0) : trend_reduction(t, zeta, eta);
}

double model_trend_limit(const ModelParams& p, double zeta, double eta) {
    double raw = std::numbers::pi / (2.0 * eta);
    if (!p.normalize_trend) return raw;
    double at0 = trend_reduction(p.t0, zeta, eta);
    return (raw - at0) / (at0 - trend_reduction(p.t0 - 1.0, zeta, eta));
}

double central_death_rate(const ModelParams& p, int age, Gender g, double year) {
    auto grp = static_cast<std::size_t>(ModelParams::group(age, g));
    double x = p.alpha[grp] + p.beta[grp] * model_trend(p, year, p.zeta[grp], p.eta[grp]);
    if (!p.cohort.empty()) x += p.cohort_effect(static_cast<int>(std::lround(year)) - p.age_label(age));
    return laplace_cdf(x);
}

double central_death_rate_limit(const ModelParams& p, int age, Gender g) {
    auto grp = static_cast<std::size_t>(ModelParams::group(age, g));
    return laplace_cdf(p.alpha[grp] + p.beta[grp] * model_trend_limit(p, p.zeta[grp], p.eta[grp]));
}

namespace {

void softmax_inplace(std::span<double> s) {
    double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (double& x : s) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : s) x /= sum;
}

}  // namespace

void cause_weights(const ModelParams& p, int age, Gender g, double year, std::span<double> out) {
    int grp = ModelParams::group(age, g);
    for (int k = 0; k < p.n_causes(); ++k) {
        auto wi = static_cast<std::size_t>(p.weight_index(grp, k));
        auto ki = static_cast<std::size_t>(k);
        out[ki] = p.u[wi] + p.v[wi] * model_trend(p, year, p.phi[ki], p.psi[ki]);
    }
    softmax_inplace(out.first(static_cast<std::size_t>(p.n_causes())));
}

std::vector<double> cause_weights(const ModelParams& p, int age, Gender g, double year) {
    std::vector<double> w(static_cast<std::size_t>(p.n_causes()));
    cause_weights(p, age, g, year, w);
    return w;
}

std::vector<double> cause_weights_limit(const ModelParams& p, int age, Gender g) {
    int grp = ModelParams::group(age, g);
    std::vector<double> w(static_cast<std::size_t>(p.n_causes()));
    for (int k = 0; k < p.n_causes(); ++k) {
        auto wi = static_cast<std::size_t>(p.weight_index(grp, k));
        auto ki = static_cast<std::size_t>(k);
        w[ki] = p.u[wi] + p.v[wi] * model_trend_limit(p, p.phi[ki], p.psi[ki]);
    }
    softmax_inplace(w);
    return w;
}

double death_probability(double central_rate) { return -std::expm1(-central_rate); }

}  // namespace ecrp
