#include "ecrp/mcmc.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <random>

#include "ecrp/rng.hpp"

namespace ecrp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class BlockKind { group, global, sigma };

struct Block {
    std::string name;
    BlockKind kind = BlockKind::group;
    int grp = -1;                 // for group blocks
    int factor = 0;               // for sigma blocks
    std::vector<double*> values;  // into the working parameters
    std::vector<bool> log_scale;  // value = exp(x)
    double jacobian_power = 1.0;  // log-scale Jacobian: power * log(value)

    // Proposal: x' = x + scale * L z.
    double scale = 1.0;
    Eigen::MatrixXd chol;
    Eigen::VectorXd init_sd;
    bool using_empirical = false;

    // Burn-in moments of x.
    long n_seen = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd m2;
    long adapt_steps = 0;

    long proposed = 0, accepted = 0;

    int dim() const { return static_cast<int>(values.size()); }
};

// Target log-density with cached intensities so that a block update only
// recomputes what it touches.
class Evaluator {
public:
    Evaluator(const MortalityDataset& ds, const PriorSpec& prior, McmcTarget target)
        : ds_(&ds), prior_(&prior), target_(target), T_(ds.n_years()), G_(ds.n_ages() * kGenders), C_(ds.n_causes()) {
        counts_.resize(cell_count());
        lfact_ = 0.0;
        for (int ti = 0; ti < T_; ++ti)
            for (int grp = 0; grp < G_; ++grp)
                for (int k = 0; k < C_; ++k) {
                    std::int64_t n = ds.deaths(grp / kGenders, gender_from_index(grp % kGenders), k, ti);
                    counts_[cell(ti, grp, k)] = static_cast<double>(n);
                    lfact_ += std::lgamma(static_cast<double>(n) + 1.0);
                }
        totals_.assign(static_cast<std::size_t>(T_ * C_), 0.0);
        for (int ti = 0; ti < T_; ++ti)
            for (int k = 0; k < C_; ++k) totals_[marg(ti, k)] = static_cast<double>(ds.cause_total(k, ti));
        rho_.assign(cell_count(), 0.0);
        marg_.assign(static_cast<std::size_t>(T_ * C_), 0.0);
        part_.assign(static_cast<std::size_t>(G_), 0.0);
        lgr_.assign(static_cast<std::size_t>(T_ * C_), 0.0);
        lambda_ = FactorSeries(C_ - 1, T_);
        scratch_.resize(static_cast<std::size_t>(T_ * C_));
        w_.resize(static_cast<std::size_t>(C_));
    }

    FactorSeries& lambda() { return lambda_; }
    const FactorSeries& lambda() const { return lambda_; }

    // Full recomputation from theta.
    void reset(const ModelParams& th) {
        std::fill(marg_.begin(), marg_.end(), 0.0);
        for (int grp = 0; grp < G_; ++grp) {
            part_[static_cast<std::size_t>(grp)] = group_partial(th, grp, scratch_);
            for (int ti = 0; ti < T_; ++ti)
                for (int k = 0; k < C_; ++k) {
                    double r = scratch_[static_cast<std::size_t>(ti * C_ + k)];
                    rho_[cell(ti, grp, k)] = r;
                    marg_[marg(ti, k)] += r;
                }
        }
        for (int k = 1; k < C_; ++k) refresh_lgr(th, k);
        prior_value_ = log_prior_smoothing(th, *prior_);
        factor_value_ = factor_part(th, marg_);
    }

    double total() const {
        double s = prior_value_ + factor_value_ - lfact_;
        for (double p : part_) s += p;
        return s;
    }

    // Proposal for a group block: returns the new total without committing.
    double propose_group(const ModelParams& th, int grp) {
        pending_part_ = group_partial(th, grp, scratch_);
        if (!std::isfinite(pending_part_)) return kNegInf;
        pending_marg_ = marg_;
        for (int ti = 0; ti < T_; ++ti)
            for (int k = 0; k < C_; ++k)
                pending_marg_[marg(ti, k)] += scratch_[static_cast<std::size_t>(ti * C_ + k)] - rho_[cell(ti, grp, k)];
        pending_factor_ = factor_part(th, pending_marg_);
        pending_prior_ = log_prior_smoothing(th, *prior_);
        double s = pending_prior_ + pending_factor_ - lfact_ + pending_part_;
        for (int g = 0; g < G_; ++g)
            if (g != grp) s += part_[static_cast<std::size_t>(g)];
        return s;
    }

    void commit_group(int grp) {
        part_[static_cast<std::size_t>(grp)] = pending_part_;
        for (int ti = 0; ti < T_; ++ti)
            for (int k = 0; k < C_; ++k) rho_[cell(ti, grp, k)] = scratch_[static_cast<std::size_t>(ti * C_ + k)];
        marg_.swap(pending_marg_);
        factor_value_ = pending_factor_;
        prior_value_ = pending_prior_;
    }

    // Proposal for a variance block of factor k.
    double propose_sigma(const ModelParams& th, int k) {
        saved_lgr_.assign(lgr_.begin(), lgr_.end());
        refresh_lgr(th, k);
        pending_factor_ = factor_part(th, marg_);
        return prior_value_ + pending_factor_ - lfact_ + sum_parts();
    }
    void commit_sigma() { factor_value_ = pending_factor_; }
    void reject_sigma() { lgr_.swap(saved_lgr_); }

    // Exact draw of the factor realisations from their gamma full conditionals.
    void gibbs_lambda(const ModelParams& th, Rng& rng) {
        for (int k = 1; k < C_; ++k) {
            double s2 = th.sigma2[static_cast<std::size_t>(k - 1)];
            for (int ti = 0; ti < T_; ++ti) {
                if (s2 < kDegenerateVariance) {
                    lambda_(k, ti) = 1.0;
                    continue;
                }
                double r = 1.0 / s2;
                std::gamma_distribution<double> g(r + totals_[marg(ti, k)], 1.0 / (r + marg_[marg(ti, k)]));
                double x = g(rng);
                lambda_(k, ti) = std::max(x, std::numeric_limits<double>::min());
            }
        }
        for (int grp = 0; grp < G_; ++grp) part_[static_cast<std::size_t>(grp)] = partial_from_cache(grp);
        factor_value_ = factor_part(th, marg_);
    }

private:
    std::size_t cell(int ti, int grp, int k) const { return static_cast<std::size_t>((ti * G_ + grp) * C_ + k); }
    std::size_t marg(int ti, int k) const { return static_cast<std::size_t>(ti * C_ + k); }
    std::size_t cell_count() const { return static_cast<std::size_t>(T_ * G_ * C_); }

    double sum_parts() const {
        double s = 0.0;
        for (double p : part_) s += p;
        return s;
    }

    double lam(int k, int ti) const { return k == 0 ? 1.0 : lambda_(k, ti); }

    double group_partial(const ModelParams& th, int grp, std::vector<double>& rho_out) {
        int a = grp / kGenders;
        Gender g = gender_from_index(grp % kGenders);
        double s = 0.0;
        for (int ti = 0; ti < T_; ++ti) {
            double em = ds_->exposure(a, g, ti) * central_death_rate(th, a, g, ds_->year(ti));
            cause_weights(th, a, g, ds_->year(ti), w_);
            for (int k = 0; k < C_; ++k) {
                double r = em * w_[static_cast<std::size_t>(k)];
                rho_out[static_cast<std::size_t>(ti * C_ + k)] = r;
                double n = counts_[cell(ti, grp, k)];
                if (n > 0.0) {
                    if (!(r > 0.0)) return kNegInf;
                    s += n * std::log(r);
                }
                if (target_ == McmcTarget::posterior) s -= r * lam(k, ti);
            }
        }
        return s;
    }

    double partial_from_cache(int grp) const {
        double s = 0.0;
        for (int ti = 0; ti < T_; ++ti)
            for (int k = 0; k < C_; ++k) {
                double r = rho_[cell(ti, grp, k)];
                double n = counts_[cell(ti, grp, k)];
                if (n > 0.0) s += n * std::log(r);
                if (target_ == McmcTarget::posterior) s -= r * lam(k, ti);
            }
        return s;
    }

    void refresh_lgr(const ModelParams& th, int k) {
        if (target_ != McmcTarget::likelihood) return;
        double s2 = th.sigma2[static_cast<std::size_t>(k - 1)];
        for (int ti = 0; ti < T_; ++ti)
            lgr_[marg(ti, k)] = s2 < kDegenerateVariance
                                    ? 0.0
                                    : log_gamma_ratio(1.0 / s2, static_cast<std::int64_t>(totals_[marg(ti, k)]));
    }

    double factor_part(const ModelParams& th, const std::vector<double>& m) const {
        double s = 0.0;
        if (target_ == McmcTarget::likelihood) {
            for (int ti = 0; ti < T_; ++ti) {
                s -= m[marg(ti, 0)];
                for (int k = 1; k < C_; ++k) {
                    double s2 = th.sigma2[static_cast<std::size_t>(k - 1)];
                    double rho = m[marg(ti, k)];
                    if (s2 < kDegenerateVariance) {
                        s -= rho;
                        continue;
                    }
                    double r = 1.0 / s2;
                    s += lgr_[marg(ti, k)] - r * std::log1p(rho / r) - totals_[marg(ti, k)] * std::log(r + rho);
                }
            }
        } else {
            for (int k = 1; k < C_; ++k) {
                double s2 = th.sigma2[static_cast<std::size_t>(k - 1)];
                for (int ti = 0; ti < T_; ++ti) {
                    double l = lambda_(k, ti);
                    s += totals_[marg(ti, k)] * std::log(l);
                    if (s2 >= kDegenerateVariance) s += log_unit_gamma_density(l, s2);
                }
            }
        }
        return s;
    }

    const MortalityDataset* ds_;
    const PriorSpec* prior_;
    McmcTarget target_;
    int T_, G_, C_;
    std::vector<double> counts_, totals_, rho_, marg_, part_, lgr_, saved_lgr_, scratch_, w_, pending_marg_;
    FactorSeries lambda_;
    double lfact_ = 0.0, prior_value_ = 0.0, factor_value_ = 0.0;
    double pending_part_ = 0.0, pending_factor_ = 0.0, pending_prior_ = 0.0;
};

double to_x(const Block& b, int i) {
    double v = *b.values[static_cast<std::size_t>(i)];
    return b.log_scale[static_cast<std::size_t>(i)] ? std::log(v) : v;
}

void set_x(Block& b, int i, double x) {
    *b.values[static_cast<std::size_t>(i)] = b.log_scale[static_cast<std::size_t>(i)] ? std::exp(x) : x;
}

double jacobian(const Block& b) {
    double s = 0.0;
    for (int i = 0; i < b.dim(); ++i)
        if (b.log_scale[static_cast<std::size_t>(i)]) s += b.jacobian_power * std::log(*b.values[static_cast<std::size_t>(i)]);
    return s;
}

std::string group_label(const ModelParams& p, int grp) {
    return "[a=" + std::to_string(p.age_label(grp / kGenders)) + ";g=" + (grp % kGenders == 0 ? "f" : "m") + "]";
}

std::vector<Block> build_blocks(ModelParams& cur, const FixedMask& fixed) {
    std::vector<Block> blocks;
    auto add = [&](std::string name, BlockKind kind, int grp, std::vector<double*> vals, bool log_scale,
                   double jac_power = 1.0) {
        if (vals.empty()) return;
        Block b;
        b.name = std::move(name);
        b.kind = kind;
        b.grp = grp;
        b.values = std::move(vals);
        b.log_scale.assign(b.values.size(), log_scale);
        b.jacobian_power = jac_power;
        blocks.push_back(std::move(b));
    };
    const int K = cur.n_factors;
    for (int grp = 0; grp < cur.n_groups(); ++grp) {
        auto gi = static_cast<std::size_t>(grp);
        std::string lbl = group_label(cur, grp);
        if (!fixed.alpha) add("alpha" + lbl, BlockKind::group, grp, {&cur.alpha[gi]}, false);
        if (!fixed.beta) add("beta" + lbl, BlockKind::group, grp, {&cur.beta[gi]}, false);
        if (!fixed.zeta) add("zeta" + lbl, BlockKind::group, grp, {&cur.zeta[gi]}, false);
        if (!fixed.eta) add("eta" + lbl, BlockKind::group, grp, {&cur.eta[gi]}, true);
        std::vector<double*> us, vs;
        for (int k = 1; k <= K; ++k) {
            us.push_back(&cur.u[static_cast<std::size_t>(cur.weight_index(grp, k))]);
            vs.push_back(&cur.v[static_cast<std::size_t>(cur.weight_index(grp, k))]);
        }
        if (!fixed.u) add("u" + lbl, BlockKind::group, grp, us, false);
        if (!fixed.v) add("v" + lbl, BlockKind::group, grp, vs, false);
    }
    for (int k = 1; k <= K; ++k) {
        auto ki = static_cast<std::size_t>(k);
        if (!fixed.phi) add("phi[k=" + std::to_string(k) + "]", BlockKind::global, -1, {&cur.phi[ki]}, false);
        if (!fixed.psi) add("psi[k=" + std::to_string(k) + "]", BlockKind::global, -1, {&cur.psi[ki]}, true);
    }
    if (!fixed.gamma)
        for (auto& [c, g] : cur.cohort) add("gamma[c=" + std::to_string(c) + "]", BlockKind::global, -1, {&g}, false);
    if (!fixed.sigma2)
        for (int k = 1; k <= K; ++k) {
            // Uniform prior on sigma: density in log sigma2 carries sigma = (sigma2)^(1/2).
            add("sigma2[k=" + std::to_string(k) + "]", BlockKind::sigma, -1, {&cur.sigma2[static_cast<std::size_t>(k - 1)]},
                true, 0.5);
            blocks.back().factor = k;
        }
    return blocks;
}

class Sampler {
public:
    Sampler(const MortalityDataset& ds, const ModelParams& init, const PriorSpec& prior, const McmcConfig& cfg)
        : cfg_(cfg), cur_(init), eval_(ds, prior, cfg.target), rng_(make_rng(cfg.seed, {0x6d636d63})) {
        cur_.validate();
        if (cur_.n_ages != ds.n_ages() || cur_.n_causes() != ds.n_causes())
            throw DomainError("model dimensions do not match the dataset");
        if (cfg.iterations <= cfg.burn_in || cfg.burn_in < 0 || cfg.thin < 1)
            throw DomainError("MCMC needs iterations > burn_in >= 0 and thin >= 1");
        if (!cfg.fixed.sigma2)
            for (double& s : cur_.sigma2) s = std::max(s, 1e-6);
        blocks_ = build_blocks(cur_, cfg.fixed);
        eval_.reset(cur_);
        if (cfg.target == McmcTarget::posterior) eval_.gibbs_lambda(cur_, rng_);
        current_ = eval_.total();
        if (!std::isfinite(current_)) throw McmcError("target log-density is not finite at the initial parameters");
        for (auto& b : blocks_) init_scales(b);
    }

    McmcChain run() {
        McmcChain chain;
        chain.burn_in = cfg_.burn_in;
        chain.seed = cfg_.seed;
        chain.target = cfg_.target;
        for (int it = 0; it < cfg_.iterations; ++it) {
            bool burn = it < cfg_.burn_in;
            for (auto& b : blocks_) step(b, burn);
            if (cfg_.target == McmcTarget::posterior) {
                eval_.gibbs_lambda(cur_, rng_);
                current_ = eval_.total();
            }
            if (!burn && (it - cfg_.burn_in) % cfg_.thin == 0) {
                chain.samples.push_back(cur_);
                if (cfg_.target == McmcTarget::posterior) chain.lambda.push_back(eval_.lambda());
                chain.log_density.push_back(current_);
            }
        }
        for (const auto& b : blocks_) {
            if (b.proposed >= 100 && b.accepted == 0)
                throw McmcError("block " + b.name + " accepted no proposals after adaptation");
            chain.blocks.push_back({b.name, b.dim(), b.scale, b.proposed, b.accepted});
        }
        return chain;
    }

private:
    double evaluate(Block& b) {
        switch (b.kind) {
            case BlockKind::group: return eval_.propose_group(cur_, b.grp);
            case BlockKind::sigma: return eval_.propose_sigma(cur_, b.factor);
            case BlockKind::global: {
                // Touches every group: evaluate on a fresh state.
                Evaluator probe = eval_;
                probe.reset(cur_);
                pending_global_ = std::move(probe);
                return pending_global_->total();
            }
        }
        return kNegInf;
    }

    void commit(Block& b) {
        switch (b.kind) {
            case BlockKind::group: eval_.commit_group(b.grp); break;
            case BlockKind::sigma: eval_.commit_sigma(); break;
            case BlockKind::global: eval_ = std::move(*pending_global_); break;
        }
        pending_global_.reset();
    }

    void reject(Block& b) {
        if (b.kind == BlockKind::sigma) eval_.reject_sigma();
        pending_global_.reset();
    }

    // Log target including the Jacobian of the block's transformation, at the current values.
    double block_target(Block& b, double total) { return total + jacobian(b); }

    void init_scales(Block& b) {
        const int d = b.dim();
        b.init_sd.resize(d);
        double base = block_target(b, current_);
        for (int i = 0; i < d; ++i) {
            double x0 = to_x(b, i);
            double h = 1e-3 * std::max(1.0, std::abs(x0));
            double fp, fm;
            set_x(b, i, x0 + h);
            fp = block_target(b, evaluate(b));
            reject(b);
            set_x(b, i, x0 - h);
            fm = block_target(b, evaluate(b));
            reject(b);
            set_x(b, i, x0);
            double curv = -(fp - 2.0 * base + fm) / (h * h);
            double sd = (std::isfinite(curv) && curv > 0.0) ? 1.0 / std::sqrt(curv) : 0.1 * std::max(1.0, std::abs(x0));
            b.init_sd[i] = sd;
        }
        b.chol = b.init_sd.asDiagonal();
        b.scale = 2.38 / std::sqrt(static_cast<double>(d));
        b.mean = Eigen::VectorXd::Zero(d);
        b.m2 = Eigen::MatrixXd::Zero(d, d);
    }

    void step(Block& b, bool burn) {
        const int d = b.dim();
        Eigen::VectorXd x(d), z(d);
        for (int i = 0; i < d; ++i) x[i] = to_x(b, i);
        std::normal_distribution<double> nd;
        for (int i = 0; i < d; ++i) z[i] = nd(rng_);
        Eigen::VectorXd y = x + b.scale * (b.chol * z);
        double before = block_target(b, current_);
        for (int i = 0; i < d; ++i) set_x(b, i, y[i]);
        double proposal = evaluate(b);
        double after = std::isfinite(proposal) ? block_target(b, proposal) : kNegInf;
        double log_ratio = after - before;
        double accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(std::min(0.0, log_ratio))) : 0.0;
        bool accept = uniform01(rng_) < accept_prob;
        if (accept) {
            commit(b);
            current_ = proposal;
        } else {
            reject(b);
            for (int i = 0; i < d; ++i) set_x(b, i, x[i]);
        }
        if (!burn) {
            ++b.proposed;
            if (accept) ++b.accepted;
            return;
        }
        adapt(b, accept_prob, accept ? y : x);
    }

    void adapt(Block& b, double accept_prob, const Eigen::VectorXd& x) {
        const int d = b.dim();
        ++b.adapt_steps;
        b.scale *= std::exp((accept_prob - cfg_.target_acceptance) / std::pow(static_cast<double>(b.adapt_steps), 0.6));
        // Running moments of the block for an empirical proposal covariance.
        ++b.n_seen;
        Eigen::VectorXd delta = x - b.mean;
        b.mean += delta / static_cast<double>(b.n_seen);
        b.m2 += delta * (x - b.mean).transpose();
        long needed = std::max<long>(200, 20L * d);
        if (b.n_seen >= needed && b.n_seen % 100 == 0) {
            Eigen::MatrixXd cov = b.m2 / static_cast<double>(b.n_seen - 1);
            for (int i = 0; i < d; ++i) cov(i, i) += 1e-10 * b.init_sd[i] * b.init_sd[i] + 1e-300;
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
                if (!b.using_empirical) {
                    b.scale = 2.38 / std::sqrt(static_cast<double>(d));
                    b.using_empirical = true;
                }
                b.chol = llt.matrixL();
            }
        }
    }

    const McmcConfig& cfg_;
    ModelParams cur_;
    Evaluator eval_;
    Rng rng_;
    std::vector<Block> blocks_;
    double current_ = 0.0;
    std::optional<Evaluator> pending_global_;
};

}  // namespace

McmcChain mcmc_sample(const MortalityDataset& ds, const ModelParams& init, const PriorSpec& prior,
                      const McmcConfig& config) {
    Sampler s(ds, init, prior, config);
    return s.run();
}

std::vector<McmcChain> mcmc_sample_chains(const MortalityDataset& ds, const ModelParams& init, const PriorSpec& prior,
                                          const McmcConfig& config, int n_chains) {
    if (n_chains < 1) throw DomainError("need at least one chain");
    std::vector<McmcChain> chains(static_cast<std::size_t>(n_chains));
    std::vector<std::exception_ptr> errors(chains.size());
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n_chains; ++c) {
        try {
            McmcConfig cfg = config;
            cfg.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(c)});
            chains[static_cast<std::size_t>(c)] = mcmc_sample(ds, init, prior, cfg);
        } catch (...) {
            errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return chains;
}

McmcChain merge_chains(const std::vector<McmcChain>& chains) {
    if (chains.empty()) throw DomainError("no chains to merge");
    McmcChain out;
    out.burn_in = chains.front().burn_in;
    out.seed = chains.front().seed;
    out.target = chains.front().target;
    out.blocks = chains.front().blocks;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const auto& ch = chains[c];
        out.samples.insert(out.samples.end(), ch.samples.begin(), ch.samples.end());
        out.lambda.insert(out.lambda.end(), ch.lambda.begin(), ch.lambda.end());
        out.log_density.insert(out.log_density.end(), ch.log_density.begin(), ch.log_density.end());
        if (c > 0)
            for (std::size_t b = 0; b < out.blocks.size() && b < ch.blocks.size(); ++b) {
                out.blocks[b].proposed += ch.blocks[b].proposed;
                out.blocks[b].accepted += ch.blocks[b].accepted;
            }
    }
    return out;
}

ModelParams McmcChain::mean() const {
    if (samples.empty()) throw DomainError("empty chain");
    std::vector<double> acc(flatten(samples.front()).size(), 0.0);
    for (const auto& s : samples) {
        auto f = flatten(s);
        for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
    }
    for (double& x : acc) x /= static_cast<double>(samples.size());
    ModelParams p = samples.front();
    unflatten(acc, p);
    return p;
}

ModelParams McmcChain::mode() const {
    if (samples.empty()) throw DomainError("empty chain");
    auto it = std::max_element(log_density.begin(), log_density.end());
    return samples[static_cast<std::size_t>(it - log_density.begin())];
}

ModelParams McmcChain::quantile(double p) const {
    if (samples.empty()) throw DomainError("empty chain");
    auto n = flatten(samples.front()).size();
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = empirical_quantile(series(i), p);
    ModelParams out = samples.front();
    unflatten(q, out);
    return out;
}

std::vector<double> McmcChain::series(std::size_t flat_index) const {
    std::vector<double> s;
    s.reserve(samples.size());
    for (const auto& p : samples) s.push_back(flatten(p).at(flat_index));
    return s;
}

double McmcChain::min_acceptance() const {
    double m = 1.0;
    for (const auto& b : blocks) m = std::min(m, b.acceptance());
    return blocks.empty() ? 0.0 : m;
}

double McmcChain::max_acceptance() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.acceptance());
    return m;
}

double batch_means_se(std::span<const double> x, std::size_t block_size) {
    if (block_size == 0) throw DomainError("block size must be positive");
    std::size_t nb = x.size() / block_size;
    if (nb < 2) throw DomainError("chain too short for batch means");
    std::vector<double> means(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t i = 0; i < block_size; ++i) means[b] += x[b * block_size + i];
        means[b] /= static_cast<double>(block_size);
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(nb);
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(nb - 1)) / std::sqrt(static_cast<double>(nb));
}

double empirical_quantile(std::vector<double> x, double p) {
    if (x.empty()) throw DomainError("empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    std::sort(x.begin(), x.end());
    auto n = static_cast<double>(x.size());
    auto idx = static_cast<std::ptrdiff_t>(std::ceil(p * n)) - 1;
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(x.size()) - 1);
    return x[static_cast<std::size_t>(idx)];
}

std::vector<ScalarSummary> mcmc_diagnostics(const McmcChain& chain, std::size_t block_size) {
    if (chain.size() < 2 * block_size) throw DomainError("chain too short for the requested block size");
    auto names = param_names(chain.samples.front());
    ModelParams mode = chain.mode();
    auto mode_flat = flatten(mode);
    std::vector<std::vector<double>> cols(names.size());
    for (auto& c : cols) c.reserve(chain.size());
    for (const auto& s : chain.samples) {
        auto f = flatten(s);
        for (std::size_t i = 0; i < f.size(); ++i) cols[i].push_back(f[i]);
    }
    std::vector<ScalarSummary> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        ScalarSummary s;
        s.name = names[i];
        double m = 0.0;
        for (double v : cols[i]) m += v;
        s.mean = m / static_cast<double>(cols[i].size());
        s.mode = mode_flat[i];
        s.q05 = empirical_quantile(cols[i], 0.05);
        s.q95 = empirical_quantile(cols[i], 0.95);
        s.se = batch_means_se(cols[i], block_size);
        out.push_back(s);
    }
    return out;
}

}  // namespace ecrp
