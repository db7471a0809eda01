#pragma once

// Data-parallel kernels. Each OpenMP kernel has a serial reference in the
// `serial` namespace; both produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ecrp/loss.hpp"
#include "ecrp/model.hpp"

namespace ecrp::kernels {

// First n_out entries of the discrete convolution a * b.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b, std::size_t n_out);

struct BernoulliMcConfig {
    std::size_t n_sims = 50000;
    std::uint64_t seed = 0;
    // Death probability convention: rate used directly, or 1 - exp(-rate).
    bool exponential_probability = false;
};

// Per-simulation totals (in loss units) of the mixed Bernoulli portfolio model.
// Each simulation draws its factors from a stream derived from (seed, sim index).
std::vector<std::int64_t> bernoulli_totals(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                           const BernoulliMcConfig& config);

// Evaluates f(i) for i in [0, n) and returns the results in index order.
std::vector<double> map_indexed(std::size_t n, const std::function<double(std::size_t)>& f);

namespace serial {

std::vector<double> convolve(std::span<const double> a, std::span<const double> b, std::size_t n_out);
std::vector<std::int64_t> bernoulli_totals(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                           const BernoulliMcConfig& config);
std::vector<double> map_indexed(std::size_t n, const std::function<double(std::size_t)>& f);

}  // namespace serial

// Single-simulation body shared by the parallel and serial drivers.
std::int64_t bernoulli_single(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                              const BernoulliMcConfig& config, std::size_t sim);

int max_threads();

}  // namespace ecrp::kernels
