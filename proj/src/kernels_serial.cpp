// Serial reference drivers for the OpenMP kernels.
#include "ecrp/kernels.hpp"

#include <algorithm>

namespace ecrp::kernels::serial {

std::vector<double> convolve(std::span<const double> a, std::span<const double> b, std::size_t n_out) {
    std::vector<double> out(n_out, 0.0);
    if (a.empty() || b.empty()) return out;
    for (std::size_t n = 0; n < n_out; ++n) {
        std::size_t lo = n >= b.size() ? n - b.size() + 1 : 0;
        std::size_t hi = std::min(n, a.size() - 1);
        double s = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) s += a[i] * b[n - i];
        out[n] = s;
    }
    return out;
}

std::vector<std::int64_t> bernoulli_totals(const EcrpPortfolio& portfolio, const RiskFactorSpec& factors,
                                           const BernoulliMcConfig& config) {
    std::vector<std::int64_t> out(config.n_sims);
    for (std::size_t s = 0; s < config.n_sims; ++s) out[s] = bernoulli_single(portfolio, factors, config, s);
    return out;
}

std::vector<double> map_indexed(std::size_t n, const std::function<double(std::size_t)>& f) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
}

}  // namespace ecrp::kernels::serial
