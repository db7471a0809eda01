#include "ecrp/loss.hpp"

#include <cmath>

#include "ecrp/common.hpp"

namespace ecrp {

SeverityPmf SeverityPmf::point(std::size_t n) {
    SeverityPmf s;
    s.probs.assign(n + 1, 0.0);
    s.probs[n] = 1.0;
    return s;
}

double SeverityPmf::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) m += static_cast<double>(i) * probs[i];
    return m;
}

double SeverityPmf::second_moment() const {
    double m = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) m += static_cast<double>(i) * static_cast<double>(i) * probs[i];
    return m;
}

void SeverityPmf::validate() const {
    if (probs.empty()) throw DomainError("empty severity distribution");
    double s = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw DomainError("negative severity probability");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw DomainError("severity probabilities must sum to one");
}

double LossDistribution::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) m += static_cast<double>(i) * pmf[i];
    return m;
}

double LossDistribution::variance() const {
    double m = 0.0, m2 = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        double x = static_cast<double>(i);
        m += x * pmf[i];
        m2 += x * x * pmf[i];
        mass += pmf[i];
    }
    if (mass <= 0.0) return 0.0;
    m /= mass;
    return m2 / mass - m * m;
}

double LossDistribution::cdf(std::size_t n) const {
    double c = 0.0;
    for (std::size_t i = 0; i <= n && i < pmf.size(); ++i) c += pmf[i];
    return c;
}

}  // namespace ecrp
