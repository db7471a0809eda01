#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ecrp {

// Probabilities over integer multiples 0, 1, ..., n of a loss unit.
struct SeverityPmf {
    std::vector<double> probs;

    static SeverityPmf point(std::size_t n);
    std::size_t max_support() const { return probs.empty() ? 0 : probs.size() - 1; }
    double mean() const;           // in units
    double second_moment() const;  // in units squared
    void validate() const;
};

// Pmf of a loss on the grid 0, unit, 2 unit, ..., plus mass beyond the grid.
struct LossDistribution {
    double unit = 1.0;
    std::vector<double> pmf;
    double tail_mass = 0.0;

    std::size_t n_max() const { return pmf.empty() ? 0 : pmf.size() - 1; }
    double mean() const;  // in units, over the computed grid only
    double variance() const;
    double cdf(std::size_t n) const;
};

}  // namespace ecrp
