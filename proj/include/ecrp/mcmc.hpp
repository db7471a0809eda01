#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecrp/data.hpp"
#include "ecrp/likelihood.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

enum class McmcTarget {
    likelihood,  // factors integrated out, times the prior
    posterior,   // factor realisations sampled jointly with the parameters
};

// Parameter families held at their initial values.
struct FixedMask {
    bool alpha = false, beta = false;
    bool zeta = true, eta = true;
    bool u = false, v = false;
    bool phi = true, psi = true;
    bool gamma = true;
    bool sigma2 = false;
};

struct McmcConfig {
    McmcTarget target = McmcTarget::likelihood;
    int iterations = 20000;  // total, including burn-in
    int burn_in = 5000;
    int thin = 1;
    std::uint64_t seed = 1;
    double target_acceptance = 0.234;
    FixedMask fixed;
};

struct BlockStats {
    std::string name;
    int dim = 1;
    double scale = 0.0;
    long proposed = 0;  // after burn-in
    long accepted = 0;

    double acceptance() const { return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct McmcChain {
    std::vector<ModelParams> samples;  // post burn-in, thinned
    std::vector<FactorSeries> lambda;  // posterior target only
    std::vector<double> log_density;   // target log-density of each retained sample
    std::vector<BlockStats> blocks;
    int burn_in = 0;
    std::uint64_t seed = 0;
    McmcTarget target = McmcTarget::likelihood;

    std::size_t size() const { return samples.size(); }
    ModelParams mean() const;
    // Retained sample with the highest target density.
    ModelParams mode() const;
    ModelParams quantile(double p) const;
    std::vector<double> series(std::size_t flat_index) const;
    double min_acceptance() const;
    double max_acceptance() const;
};

// Random-walk Metropolis-Hastings within Gibbs. Blocks: per (age, gender) group one
// block per free family (alpha, beta, zeta, log eta, u_{1..K}, v_{1..K}); one block
// per phi_k, log psi_k, cohort effect and log sigma2_k. Proposal scales adapt during
// burn-in towards the target acceptance and are frozen afterwards. Under the
// posterior target, factor realisations are drawn from their gamma full conditionals.
McmcChain mcmc_sample(const MortalityDataset& ds, const ModelParams& init, const PriorSpec& prior,
                      const McmcConfig& config);

// Independent chains with seeds derived from config.seed; runs in parallel.
std::vector<McmcChain> mcmc_sample_chains(const MortalityDataset& ds, const ModelParams& init,
                                          const PriorSpec& prior, const McmcConfig& config, int n_chains);

McmcChain merge_chains(const std::vector<McmcChain>& chains);

struct ScalarSummary {
    std::string name;
    double mean = 0.0;
    double mode = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
    double se = 0.0;  // batch-means standard error
};

// Throws DomainError if the chain is shorter than two blocks.
std::vector<ScalarSummary> mcmc_diagnostics(const McmcChain& chain, std::size_t block_size = 50);

double batch_means_se(std::span<const double> x, std::size_t block_size);

// Smallest sample value with empirical CDF >= p.
double empirical_quantile(std::vector<double> x, double p);

}  // namespace ecrp
