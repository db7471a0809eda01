#include "ecrp/rng.hpp"

#include <cmath>

#include "ecrp/common.hpp"

namespace ecrp {

double draw_unit_gamma(Rng& rng, double variance) {
    if (variance < 0.0 || !std::isfinite(variance)) throw DomainError("risk-factor variance must be non-negative");
    if (variance < kDegenerateVariance) return 1.0;
    std::gamma_distribution<double> dist(1.0 / variance, variance);
    return dist(rng);
}

}  // namespace ecrp
