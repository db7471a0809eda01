#pragma once

#include <string>
#include <vector>

#include "ecrp/data.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

struct MmEstimate {
    ModelParams params;             // fitted alpha, beta, u, v; sigma2 from the moment match
    TransformedCounts transformed;  // counts made i.i.d. with the fitted intensities
    std::vector<double> sigma2;     // per factor 1..K
    std::vector<std::string> warnings;
};

// Matching-of-moments fit. Trend shapes (zeta, eta, phi, psi, cohort, t0) are taken
// from `fixed` and kept; alpha/beta come from least squares of the inverse Laplace
// transform of crude rates on the normalised trend, u/v from least squares of
// log N_k - log(E m) on the weight trend. Cells with zero counts are dropped from
// the log regression.
MmEstimate mm_estimate(const MortalityDataset& ds, const ModelParams& fixed);

// Variance estimate from unbiased sample variances of W* = N' / (E m):
// max(0, sum_{a,g} (s2 - w/(E m)) / sum_{a,g} w^2).
std::vector<double> mm_sigma2(const TransformedCounts& tc);

}  // namespace ecrp
