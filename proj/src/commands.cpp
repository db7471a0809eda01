#include "ecrp/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ecrp/aggregate.hpp"
#include "ecrp/apps.hpp"
#include "ecrp/data.hpp"
#include "ecrp/io.hpp"
#include "ecrp/likelihood.hpp"
#include "ecrp/map_estimates.hpp"
#include "ecrp/mcmc.hpp"
#include "ecrp/mm.hpp"
#include "ecrp/validate.hpp"

namespace ecrp::cli {

namespace fs = std::filesystem;
using io::format_double;

namespace {

constexpr const char* kVersion = "0.1.0";

// Output files are buffered and written together with the manifest.
class Run {
public:
    Run(std::string command, const std::vector<std::string>& args) : command_(std::move(command)) {
        // The output directory is excluded so that reruns elsewhere hash identically.
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--out" || args[i] == "-o") {
                ++i;
                continue;
            }
            if (args[i].rfind("--out=", 0) == 0) continue;
            if (args[i] == "--config" && i + 1 < args.size()) {
                inputs_["config"] = io::hex64(io::fnv1a(io::read_file(args[i + 1])));
                ++i;
                continue;
            }
            args_.push_back(args[i]);
        }
    }

    void input(const std::string& name, const std::string& path) {
        if (!path.empty()) inputs_[name] = io::hex64(io::fnv1a(io::read_file(path)));
    }
    void output(const std::string& name, std::string content) { files_[name] = std::move(content); }
    void seed(std::uint64_t s) { seed_ = s; }

    void finish(const fs::path& dir) {
        nlohmann::ordered_json m;
        m["command"] = command_;
        m["version"] = kVersion;
        m["seed"] = seed_;
        std::string joined;
        for (const auto& a : args_) joined += a + '\x1f';
        m["config_hash"] = io::hex64(io::fnv1a(joined));
        m["arguments"] = args_;
        m["inputs"] = inputs_;
        nlohmann::ordered_json outs = nlohmann::ordered_json::object();
        for (const auto& [name, content] : files_) {
            io::write_atomic(dir / name, content);
            outs[name] = io::hex64(io::fnv1a(content));
        }
        m["outputs"] = outs;
        io::write_atomic(dir / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> files_;
    std::uint64_t seed_ = 0;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur.erase(0, cur.find_first_not_of(' '));
        cur.erase(cur.find_last_not_of(' ') + 1);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

// "k=value,k=value".
std::map<int, double> parse_factor_map(const std::string& s) {
    std::map<int, double> out;
    for (const auto& item : split_list(s)) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw DomainError("expected k=value in '" + item + "'");
        int k = static_cast<int>(io::parse_int(item.substr(0, eq), "argument", 0));
        out[k] = io::parse_double(item.substr(eq + 1), "argument", 0);
    }
    return out;
}

FixedMask parse_fixed(const std::string& s) {
    FixedMask m{};
    m.alpha = m.beta = m.zeta = m.eta = m.u = m.v = m.phi = m.psi = m.gamma = m.sigma2 = false;
    for (const auto& f : split_list(s)) {
        if (f == "alpha") m.alpha = true;
        else if (f == "beta") m.beta = true;
        else if (f == "zeta") m.zeta = true;
        else if (f == "eta") m.eta = true;
        else if (f == "u") m.u = true;
        else if (f == "v") m.v = true;
        else if (f == "phi") m.phi = true;
        else if (f == "psi") m.psi = true;
        else if (f == "gamma") m.gamma = true;
        else if (f == "sigma2") m.sigma2 = true;
        else throw DomainError("unknown parameter family '" + f + "'");
    }
    return m;
}

int free_parameter_count(const ModelParams& p, const FixedMask& m) {
    int groups = p.n_groups(), K = p.n_factors;
    int n = 0;
    if (!m.alpha) n += groups;
    if (!m.beta) n += groups;
    if (!m.zeta) n += groups;
    if (!m.eta) n += groups;
    if (!m.u) n += groups * K;
    if (!m.v) n += groups * K;
    if (!m.phi) n += K + 1;
    if (!m.psi) n += K + 1;
    if (!m.gamma) n += static_cast<int>(p.cohort.size());
    if (!m.sigma2) n += K;
    return n;
}

std::vector<ModelParams> load_samples(const std::string& params, const std::string& chain, std::size_t max_samples) {
    ModelParams shape = io::load_params(params);
    if (chain.empty()) return {shape};
    auto all = io::load_chain_samples(chain, shape);
    if (max_samples == 0 || all.size() <= max_samples) return all;
    std::vector<ModelParams> out;
    for (std::size_t i = 0; i < max_samples; ++i) out.push_back(all[i * all.size() / max_samples]);
    return out;
}

MortalityDataset load_data(Run& run, const std::string& deaths, const std::string& exposure,
                           const std::string& comparability, int cutoff) {
    run.input("deaths", deaths);
    run.input("exposure", exposure);
    MortalityDataset ds = load_dataset(deaths, exposure);
    if (!comparability.empty()) {
        run.input("comparability", comparability);
        ds = apply_comparability(ds, load_comparability(comparability, cutoff));
    }
    return ds;
}

std::string factors_csv(const MortalityDataset& ds, const FactorSeries& lambda) {
    std::ostringstream os;
    os << "factor,year,lambda\n";
    for (int k = 1; k <= lambda.n_factors(); ++k)
        for (int ti = 0; ti < lambda.n_years(); ++ti) os << k << ',' << ds.year(ti) << ',' << format_double(lambda(k, ti)) << '\n';
    return os.str();
}

std::string weights_csv(const ModelParams& p, int year) {
    std::ostringstream os;
    os << "age_group,gender,cause,weight,weight_limit\n";
    for (int a = 0; a < p.n_ages; ++a)
        for (int gi = 0; gi < kGenders; ++gi) {
            Gender g = gender_from_index(gi);
            auto w = cause_weights(p, a, g, year);
            auto wl = cause_weights_limit(p, a, g);
            for (int k = 0; k < p.n_causes(); ++k)
                os << p.age_label(a) << ',' << gender_code(g) << ',' << k << ',' << format_double(w[static_cast<std::size_t>(k)])
                   << ',' << format_double(wl[static_cast<std::size_t>(k)]) << '\n';
        }
    return os.str();
}

std::string quantiles_csv(const LossDistribution& d, const std::vector<double>& levels) {
    auto q = quantiles(d, levels);
    std::ostringstream os;
    os << "level,quantile_units,quantile\n";
    for (std::size_t i = 0; i < levels.size(); ++i)
        os << format_double(levels[i]) << ',' << q[i] << ',' << format_double(static_cast<double>(q[i]) * d.unit) << '\n';
    return os.str();
}

struct DataOpts {
    std::string deaths, exposure, comparability;
    int cutoff = 1997;

    void add(CLI::App* c, bool required) {
        auto* d = c->add_option("--deaths", deaths, "deaths CSV (year,age_group,gender,cause,deaths)");
        auto* e = c->add_option("--exposure", exposure, "exposure CSV (year,age_group,gender,exposure)");
        if (required) {
            d->required();
            e->required();
        }
        c->add_option("--comparability", comparability, "comparability factors CSV (cause,factor)");
        c->add_option("--cutoff-year", cutoff, "first year not adjusted by comparability factors");
    }
};

// ---------------------------------------------------------------- synth

struct SynthCmd {
    std::string params, out;
    bool demo = false;
    int first_year = 1990, years = 30;
    double exposure = 1e5;
    std::uint64_t seed = 1;
    double d = 0.0;
    int ref_year = 0;

    int exec(Run& run, std::ostream& out_s) {
        if (params.empty() && !demo) throw DomainError("synth needs --params or --demo");
        ModelParams theta = demo ? synth_demo_params() : io::load_params(params);
        run.input("params", params);
        run.seed(seed);
        std::vector<int> labels = theta.age_labels;
        if (labels.empty())
            for (int a = 0; a < theta.n_ages; ++a) labels.push_back(a);
        ExposureGrid grid = ExposureGrid::constant(first_year, years, labels, exposure);
        FactorSeries lambda;
        SynthOptions so{d, ref_year};
        MortalityDataset ds = synth_generate(theta, grid, seed, so, &lambda);
        fs::path dir(out);
        write_dataset(ds, dir / "deaths.csv", dir / "exposure.csv");
        run.output("deaths.csv", io::read_file(dir / "deaths.csv"));
        run.output("exposure.csv", io::read_file(dir / "exposure.csv"));
        run.output("factors.csv", factors_csv(ds, lambda));
        run.output("params_true.json", io::params_to_json(theta));
        out_s << "synthetic dataset: " << ds.n_years() << " years, " << ds.n_ages() << " age groups, " << ds.n_causes()
              << " causes\n";
        return kExitOk;
    }
};

// ---------------------------------------------------------------- fit

struct FitCmd {
    DataOpts data;
    std::string init, out, method = "mcmc", prior = "uniform", fixed = "zeta,eta,phi,psi,gamma";
    double t0 = 0.0;
    bool raw_trend = false, cohort = false;
    int iterations = 20000, burn_in = 5000, thin = 5, chains = 2, max_age = 110;
    std::uint64_t seed = 1;

    int exec(Run& run, std::ostream& out_s, std::ostream& err) {
        MortalityDataset ds = load_data(run, data.deaths, data.exposure, data.comparability, data.cutoff);
        run.seed(seed);
        ModelParams shape;
        if (!init.empty()) {
            run.input("init", init);
            shape = io::load_params(init);
        } else {
            shape = ModelParams::make(ds.n_ages(), ds.n_factors(), t0 != 0.0 ? t0 : ds.last_year(), ds.age_labels());
            shape.normalize_trend = !raw_trend;
        }
        FixedMask mask = parse_fixed(fixed);
        if (cohort && shape.cohort.empty()) {
            for (int ti = 0; ti < ds.n_years(); ++ti)
                for (int a = 0; a < ds.n_ages(); ++a) shape.cohort[ds.year(ti) - shape.age_label(a)] = 0.0;
            mask.gamma = false;
        }
        if (!cohort) mask.gamma = true;

        MmEstimate mm = mm_estimate(ds, shape);
        for (const auto& w : mm.warnings) err << "warning: " << w << '\n';
        ModelParams est = mm.params;
        std::ostringstream summary;
        summary << "method: " << method << "\n";

        if (method == "mm") {
        } else if (method == "map") {
            FactorEstimates fe = map_factor_estimates(ds, est);
            est.sigma2 = fe.sigma2;
        } else if (method == "mcmc") {
            for (double& s : est.sigma2) s = std::max(s, 1e-4);
            PriorSpec ps = prior == "smoothing" ? PriorSpec::smoothing_defaults() : PriorSpec::uniform();
            if (prior != "smoothing" && prior != "uniform") throw DomainError("unknown prior '" + prior + "'");
            McmcConfig cfg;
            cfg.iterations = iterations;
            cfg.burn_in = burn_in;
            cfg.thin = thin;
            cfg.seed = seed;
            cfg.fixed = mask;
            auto runs = mcmc_sample_chains(ds, est, ps, cfg, chains);
            McmcChain merged = merge_chains(runs);
            est = merged.mean();
            run.output("chain.csv", io::chain_to_csv(merged));
            run.output("params_mode.json", io::params_to_json(merged.mode()));
            run.output("params_q05.json", io::params_to_json(merged.quantile(0.05)));
            run.output("params_q95.json", io::params_to_json(merged.quantile(0.95)));
            std::ostringstream diag;
            diag << "parameter,mean,mode,q05,q95,se\n";
            for (const auto& s : mcmc_diagnostics(merged))
                diag << s.name << ',' << format_double(s.mean) << ',' << format_double(s.mode) << ',' << format_double(s.q05)
                     << ',' << format_double(s.q95) << ',' << format_double(s.se) << '\n';
            run.output("diagnostics.csv", diag.str());
            std::ostringstream acc;
            acc << "chain,block,dim,scale,proposed,accepted,acceptance\n";
            for (std::size_t c = 0; c < runs.size(); ++c)
                for (const auto& b : runs[c].blocks)
                    acc << c << ',' << b.name << ',' << b.dim << ',' << format_double(b.scale) << ',' << b.proposed << ','
                        << b.accepted << ',' << format_double(b.acceptance()) << '\n';
            run.output("acceptance.csv", acc.str());
            summary << "samples: " << merged.size() << " from " << chains << " chains\n";
            summary << "acceptance: [" << format_double(merged.min_acceptance()) << ", "
                    << format_double(merged.max_acceptance()) << "]\n";
        } else {
            throw DomainError("unknown method '" + method + "' (mm, map, mcmc)");
        }

        run.output("params.json", io::params_to_json(est));
        run.output("weights.csv", weights_csv(est, ds.last_year()));
        try {
            FactorEstimates fe = map_factor_estimates(ds, est);
            run.output("factors.csv", factors_csv(ds, fe.lambda));
        } catch (const BoundaryError& e) {
            err << "warning: factor realisations not written: " << e.what() << '\n';
        }

        double ll = log_likelihood(ds, est);
        int k = free_parameter_count(est, mask);
        int n = ds.n_years() * ds.n_ages() * kGenders * ds.n_causes();
        auto ic = information_criteria(ll, k, n);
        summary << "log_likelihood: " << format_double(ll) << "\n";
        summary << "free_parameters: " << k << "\nobservations: " << n << "\n";
        summary << "aic: " << format_double(ic.aic) << "\nbic: " << format_double(ic.bic) << "\n";
        for (std::size_t i = 0; i < est.sigma2.size(); ++i)
            summary << "sigma[k=" << i + 1 << "]: " << format_double(std::sqrt(est.sigma2[i])) << "\n";
        for (int gi = 0; gi < kGenders; ++gi) {
            Gender g = gender_from_index(gi);
            int age0 = est.age_label(0);
            summary << "life_expectancy[age=" << age0 << ",g=" << gender_code(g) << ",year=" << ds.last_year()
                    << ",cohort]: " << format_double(curtate_life_expectancy(est, age0, g, ds.last_year(), max_age)) << "\n";
        }
        summary << "closing_age: " << max_age << "\n";
        run.output("summary.txt", summary.str());
        out_s << summary.str();
        return kExitOk;
    }
};

// ---------------------------------------------------------------- aggregate / scenario

struct AggregateCmd {
    DataOpts data;
    std::string portfolio, params, sigma2, out, fix, reduce;
    int factors = -1;
    double year = 0.0, unit = 1.0;
    std::size_t n_max = 0, mc_sims = 0;
    std::vector<double> levels{0.01, 0.1, 0.5, 0.9, 0.99};
    std::uint64_t seed = 1;
    bool exponential = false;

    int exec(Run& run, std::ostream& out_s, bool scenario) {
        run.seed(seed);
        run.input("portfolio", portfolio);
        run.input("params", params);
        std::optional<ModelParams> theta;
        if (!params.empty()) theta = io::load_params(params);
        int K = factors >= 0 ? factors : (theta ? theta->n_factors : 0);
        EcrpPortfolio pf = io::load_portfolio(portfolio, theta ? &*theta : nullptr, K, year, unit);
        RiskFactorSpec rf;
        if (!sigma2.empty()) {
            for (const auto& s : split_list(sigma2)) rf.sigma2.push_back(io::parse_double(s, "--sigma2", 0));
        } else if (theta) {
            rf.sigma2 = theta->sigma2;
        }
        if (rf.n_factors() != K)
            throw DomainError("portfolio has " + std::to_string(K) + " factors but " + std::to_string(rf.n_factors()) +
                              " variances were given");

        std::map<int, double> fixed;
        std::ostringstream summary;
        if (scenario) {
            fixed = parse_factor_map(fix);
            auto red = parse_factor_map(reduce);
            if (!red.empty()) {
                if (!theta) throw DomainError("scenario reductions need --params");
                MortalityDataset ds = load_data(run, data.deaths, data.exposure, data.comparability, data.cutoff);
                int ti = static_cast<int>(std::lround(year)) - ds.first_year();
                if (ti < 0 || ti >= ds.n_years()) throw DomainError("scenario year is outside the dataset");
                IntensityGrid g = intensity_grid(ds, *theta);
                for (const auto& [k, r] : red) {
                    if (k < 1 || k > K) throw DomainError("scenario factor index out of range");
                    double lam = scenario_factor(r, static_cast<double>(ds.cause_total(k, ti)), g.marginal(ti, k),
                                                 theta->sigma2[static_cast<std::size_t>(k - 1)]);
                    fixed[k] = lam;
                    summary << "lambda[k=" << k << ",reduction=" << format_double(r) << "]: " << format_double(lam) << "\n";
                }
            }
            for (const auto& [k, l] : fixed) summary << "fixed[k=" << k << "]: " << format_double(l) << "\n";
        }

        AggregateOptions ao{unit, n_max};
        LossDistribution d = fixed.empty() ? aggregate_loss(pf, rf, ao) : aggregate_scenario(pf, rf, fixed, ao);
        run.output("loss.csv", io::loss_to_csv(d));
        run.output("quantiles.csv", quantiles_csv(d, levels));
        summary << "expected_loss: " << format_double(pf.expected_loss() * unit) << "\n";
        summary << "mean: " << format_double(d.mean() * unit) << "\nvariance: " << format_double(d.variance() * unit * unit)
                << "\ntail_mass: " << format_double(d.tail_mass) << "\n";
        if (mc_sims > 0) {
            if (!fixed.empty()) throw DomainError("Monte Carlo comparison is not available with fixed factors");
            MonteCarloOptions mo;
            mo.n_sims = mc_sims;
            mo.seed = seed;
            mo.exponential_probability = exponential;
            mo.unit = unit;
            LossDistribution mc = monte_carlo_bernoulli(pf, rf, mo);
            run.output("loss_mc.csv", io::loss_to_csv(mc));
            summary << "total_variation_mc: " << format_double(total_variation(d, mc)) << "\n";
        }
        run.output("summary.txt", summary.str());
        out_s << summary.str();
        return kExitOk;
    }
};

// ---------------------------------------------------------------- forecast

struct ForecastCmd {
    DataOpts data;
    std::string params, chain, out, gender = "m";
    int age_group = 0, from = 0, to = 0, base_year = 0, max_age = 110, d_ref_year = 0;
    std::size_t max_samples = 200;
    double exposure = 1e5, d = 0.0;
    bool estimate = false;
    std::vector<double> levels{0.05, 0.5, 0.95};
    std::vector<int> le_ages;

    int exec(Run& run, std::ostream& out_s, std::ostream& err) {
        run.input("params", params);
        run.input("chain", chain);
        auto samples = load_samples(params, chain, max_samples);
        const ModelParams point = io::load_params(params);
        Gender g = parse_gender(gender);
        std::ostringstream summary;
        if (estimate) {
            MortalityDataset ds = load_data(run, data.deaths, data.exposure, data.comparability, data.cutoff);
            DEstimate de = estimate_d(ds, point, d_ref_year != 0 ? d_ref_year : ds.first_year());
            if (!de.warning.empty()) err << "warning: " << de.warning << '\n';
            d = de.d;
            summary << "d: " << format_double(de.d) << "\nd_log_likelihood: " << format_double(de.log_likelihood) << "\n";
        }
        if (d < 0.0) throw DomainError("variance inflation slope must be non-negative");
        int a = age_group;
        if (!point.age_labels.empty()) a = io::age_index(point.age_labels, age_group);
        ForecastConfig cfg{base_year, d};
        std::ostringstream os;
        os << "year,model_rate,mean_rate";
        for (double l : levels) os << ",q" << format_double(l);
        os << '\n';
        for (int y = from; y <= to; ++y) {
            RateForecast f = forecast_rates(samples, a, g, y, exposure, cfg);
            os << y << ',' << format_double(central_death_rate(point, a, g, y)) << ','
               << format_double(f.mean_rate());
            for (double l : levels) os << ',' << format_double(f.rate_quantile(l));
            os << '\n';
        }
        run.output("forecast.csv", os.str());
        if (!le_ages.empty()) {
            std::ostringstream le;
            le << "age,gender,cohort,period\n";
            for (int age : le_ages)
                for (int gi = 0; gi < kGenders; ++gi) {
                    Gender gg = gender_from_index(gi);
                    le << age << ',' << gender_code(gg) << ','
                       << format_double(curtate_life_expectancy(point, age, gg, base_year, max_age, true)) << ','
                       << format_double(curtate_life_expectancy(point, age, gg, base_year, max_age, false)) << '\n';
                }
            run.output("life_expectancy.csv", le.str());
        }
        summary << "samples: " << samples.size() << "\nvariance_slope: " << format_double(d) << "\nclosing_age: " << max_age
                << "\n";
        run.output("summary.txt", summary.str());
        out_s << summary.str();
        return kExitOk;
    }
};

// ---------------------------------------------------------------- validate

struct ValidateCmd {
    DataOpts data;
    std::string params, chain, out;
    double level = 0.05, min_pass_rate = 0.8;
    int lags = 2;
    std::size_t max_samples = 200;
    std::uint64_t seed = 1;

    int exec(Run& run, std::ostream& out_s, std::ostream& err) {
        run.seed(seed);
        MortalityDataset ds = load_data(run, data.deaths, data.exposure, data.comparability, data.cutoff);
        run.input("params", params);
        run.input("chain", chain);
        auto samples = load_samples(params, chain, max_samples);
        ModelParams theta = io::load_params(params);
        TransformedCounts tc = transform_iid(ds, theta);

        // Factor realisations on the transformed counts with reference intensities.
        FactorSeries lambda(ds.n_factors(), ds.n_years());
        for (int k = 1; k <= ds.n_factors(); ++k) {
            double rho = 0.0;
            for (int grp = 0; grp < theta.n_groups(); ++grp) rho += tc.intensity_ref(grp, k);
            for (int ti = 0; ti < ds.n_years(); ++ti)
                lambda(k, ti) = map_lambda(theta.sigma2[static_cast<std::size_t>(k - 1)],
                                           static_cast<double>(tc.counts.cause_total(k, ti)), rho);
        }
        NormalizedCounts nc = normalize_counts(tc, lambda);

        std::map<std::string, std::vector<TestReport>> families;
        if (chain.empty())
            err << "warning: cross variance check skipped (needs --chain)\n";
        else
            families["cross_variance"] = cross_variance_check(tc, samples, seed);
        families["independence"] = independence_tests(nc, level);
        families["breusch_godfrey"] = serial_correlation_tests(nc, lags, level);
        for (int k = 1; k <= ds.n_factors(); ++k) {
            double s2 = theta.sigma2[static_cast<std::size_t>(k - 1)];
            if (s2 < kDegenerateVariance) {
                err << "warning: KS test skipped for degenerate factor " << k << '\n';
                continue;
            }
            TestReport r = ks_gamma_test(lambda.factor(k), s2, level);
            r.cells = "k" + std::to_string(k);
            families["ks_gamma"].push_back(r);
        }

        std::vector<TestReport> all;
        std::ostringstream summary;
        bool failed = false;
        for (const auto& [name, reps] : families) {
            double pr = pass_rate(reps);
            summary << "pass_rate[" << name << "]: " << format_double(pr) << " (" << reps.size() << " tests)\n";
            failed = failed || pr < min_pass_rate;
            all.insert(all.end(), reps.begin(), reps.end());
        }
        summary << "pass_rate: " << format_double(pass_rate(all)) << "\n";
        double ll = log_likelihood(ds, theta);
        summary << "log_likelihood: " << format_double(ll) << "\n";
        summary << "status: " << (failed ? "failed" : "passed") << " (minimum pass rate " << format_double(min_pass_rate)
                << ")\n";
        run.output("reports.csv", io::reports_to_csv(all));
        run.output("factors.csv", factors_csv(ds, lambda));
        run.output("summary.txt", summary.str());
        out_s << summary.str();
        return failed ? kExitValidationFailed : kExitOk;
    }
};

// ---------------------------------------------------------------- scr

struct ScrCmd {
    std::string policies, params, chain, curve, out;
    double rate = 0.0, assets = 0.0, coupon = 0.0, unit = 0.0, level = 0.995;
    int base_year = 0, horizon = 100;
    std::size_t max_samples = 200;

    int exec(Run& run, std::ostream& out_s) {
        run.input("policies", policies);
        run.input("params", params);
        run.input("chain", chain);
        run.input("curve", curve);
        auto pol = io::load_policies(policies);
        auto samples = load_samples(params, chain, max_samples);
        DiscountCurve dc = curve.empty() ? DiscountCurve::flat(rate, horizon) : io::load_discount_curve(curve);
        ScrOptions so{base_year, assets, coupon, unit, level};
        DeltaBofResult r = delta_bof(pol, samples, dc, so);
        std::ostringstream os;
        os << "delta_bof,probability\n";
        for (std::size_t i = 0; i < r.values.size(); ++i) os << format_double(r.values[i]) << ',' << format_double(r.probs[i]) << '\n';
        run.output("delta_bof.csv", os.str());
        std::ostringstream summary;
        summary << "samples: " << samples.size() << "\nmean: " << format_double(r.mean()) << "\ntail_mass: "
                << format_double(r.tail_mass) << "\nscr: " << format_double(r.scr) << "\n";
        if (samples.size() > 1) {
            // Same portfolio with the mean parameter sample only (no parameter risk).
            McmcChain c;
            c.samples = samples;
            ModelParams mean = c.mean();
            DeltaBofResult r1 = delta_bof(pol, std::span<const ModelParams>(&mean, 1), dc, so);
            summary << "scr_mean_sample: " << format_double(r1.scr) << "\n";
            if (r.scr != 0.0)
                summary << "scr_change_without_parameter_risk: " << format_double(r1.scr / r.scr - 1.0) << "\n";
        }
        run.output("summary.txt", summary.str());
        out_s << summary.str();
        return kExitOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Extended CreditRisk+ stochastic mortality model"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "INI or TOML file with one section per subcommand");
    app.require_subcommand(1);

    SynthCmd synth;
    auto* cs = app.add_subcommand("synth", "simulate a dataset from a parameter file");
    cs->add_option("--params", synth.params, "parameter file");
    cs->add_flag("--demo", synth.demo, "use the built-in demo parameters");
    cs->add_option("--first-year", synth.first_year);
    cs->add_option("--years", synth.years)->check(CLI::PositiveNumber);
    cs->add_option("--cell-exposure", synth.exposure, "exposure in every cell")->check(CLI::PositiveNumber);
    cs->add_option("--seed", synth.seed);
    cs->add_option("--inflation-d", synth.d, "variance inflation slope")->check(CLI::NonNegativeNumber);
    cs->add_option("--inflation-ref-year", synth.ref_year);
    cs->add_option("--out,-o", synth.out)->required();

    FitCmd fit;
    auto* cf = app.add_subcommand("fit", "estimate model parameters");
    fit.data.add(cf, true);
    cf->add_option("--init", fit.init, "starting parameter file (fixes trend shapes and t0)");
    cf->add_option("--method", fit.method, "mm, map or mcmc")->check(CLI::IsMember({"mm", "map", "mcmc"}));
    cf->add_option("--prior", fit.prior, "uniform or smoothing")->check(CLI::IsMember({"uniform", "smoothing"}));
    cf->add_option("--fixed", fit.fixed, "comma-separated families held at their initial values");
    cf->add_option("--t0", fit.t0, "trend normalisation year (default: last data year)");
    cf->add_flag("--raw-trend", fit.raw_trend, "use the unnormalised arctan trend");
    cf->add_flag("--cohort", fit.cohort, "estimate cohort effects");
    cf->add_option("--iterations", fit.iterations)->check(CLI::PositiveNumber);
    cf->add_option("--burn-in", fit.burn_in)->check(CLI::NonNegativeNumber);
    cf->add_option("--thin", fit.thin)->check(CLI::PositiveNumber);
    cf->add_option("--chains", fit.chains)->check(CLI::PositiveNumber);
    cf->add_option("--max-age", fit.max_age, "closing age of the life table");
    cf->add_option("--seed", fit.seed);
    cf->add_option("--out,-o", fit.out)->required();

    AggregateCmd agg, scen;
    auto add_agg = [](CLI::App* c, AggregateCmd& a) {
        c->add_option("--portfolio", a.portfolio, "portfolio CSV (id,age_group,gender,quantity[,rate,w0..wK,count])")
            ->required();
        c->add_option("--params", a.params, "parameter file for rates, weights and variances");
        c->add_option("--factors", a.factors, "number of factors K when no parameter file is given");
        c->add_option("--sigma2", a.sigma2, "comma-separated factor variances (override the parameter file)");
        c->add_option("--year", a.year, "calendar year of the rates and weights");
        c->add_option("--unit", a.unit, "loss unit")->check(CLI::PositiveNumber);
        c->add_option("--n-max", a.n_max, "grid size (0 = automatic)");
        c->add_option("--levels", a.levels, "quantile levels")->delimiter(',');
        c->add_option("--mc-sims", a.mc_sims, "also run the Bernoulli Monte Carlo reference");
        c->add_flag("--exponential-probability", a.exponential, "Monte Carlo uses q = 1 - exp(-m)");
        c->add_option("--seed", a.seed);
        c->add_option("--out,-o", a.out)->required();
    };
    auto* ca = app.add_subcommand("aggregate", "loss distribution of a portfolio");
    add_agg(ca, agg);
    auto* cn = app.add_subcommand("scenario", "loss distribution with pinned risk factors");
    add_agg(cn, scen);
    scen.data.add(cn, false);
    cn->add_option("--fix", scen.fix, "k=lambda pairs");
    cn->add_option("--reduce", scen.reduce, "k=fraction pairs: remove this share of the observed deaths in --year");

    ForecastCmd fc;
    auto* cfo = app.add_subcommand("forecast", "death rate forecasts and life expectancies");
    fc.data.add(cfo, false);
    cfo->add_option("--params", fc.params, "parameter file (shape for --chain)")->required();
    cfo->add_option("--chain", fc.chain, "chain CSV for parameter uncertainty");
    cfo->add_option("--max-samples", fc.max_samples);
    cfo->add_option("--age-group", fc.age_group, "age group label");
    cfo->add_option("--gender", fc.gender);
    cfo->add_option("--from", fc.from)->required();
    cfo->add_option("--to", fc.to)->required();
    cfo->add_option("--base-year", fc.base_year, "last data year T")->required();
    cfo->add_option("--cell-exposure", fc.exposure)->check(CLI::PositiveNumber);
    cfo->add_option("--d", fc.d, "variance inflation slope")->check(CLI::NonNegativeNumber);
    cfo->add_flag("--estimate-d", fc.estimate, "estimate d from --deaths/--exposure");
    cfo->add_option("--d-ref-year", fc.d_ref_year, "first inflated year when estimating d");
    cfo->add_option("--levels", fc.levels)->delimiter(',');
    cfo->add_option("--life-expectancy-ages", fc.le_ages)->delimiter(',');
    cfo->add_option("--max-age", fc.max_age);
    cfo->add_option("--out,-o", fc.out)->required();

    ValidateCmd vc;
    auto* cv = app.add_subcommand("validate", "model validation tests");
    vc.data.add(cv, true);
    cv->add_option("--params", vc.params)->required();
    cv->add_option("--chain", vc.chain, "chain CSV (enables the cross variance check)");
    cv->add_option("--max-samples", vc.max_samples);
    cv->add_option("--level", vc.level);
    cv->add_option("--lags", vc.lags)->check(CLI::PositiveNumber);
    cv->add_option("--min-pass-rate", vc.min_pass_rate);
    cv->add_option("--seed", vc.seed);
    cv->add_option("--out,-o", vc.out)->required();

    ScrCmd sc;
    auto* cr = app.add_subcommand("scr", "change in basic own funds and SCR");
    cr->add_option("--policies", sc.policies, "policies CSV (id,age,gender,sum_insured,term)")->required();
    cr->add_option("--params", sc.params)->required();
    cr->add_option("--chain", sc.chain);
    cr->add_option("--max-samples", sc.max_samples);
    cr->add_option("--curve", sc.curve, "discount curve CSV (horizon,discount_factor)");
    cr->add_option("--rate", sc.rate, "flat rate when no curve is given");
    cr->add_option("--horizon", sc.horizon);
    cr->add_option("--base-year", sc.base_year)->required();
    cr->add_option("--assets", sc.assets);
    cr->add_option("--coupon", sc.coupon);
    cr->add_option("--unit", sc.unit, "loss unit (0 = automatic)");
    cr->add_option("--level", sc.level);
    cr->add_option("--out,-o", sc.out)->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        auto* sub = app.get_subcommands().front();
        std::string name = sub->get_name();
        Run run(name, args);
        int code = kExitOk;
        fs::path dir;
        if (name == "synth") {
            code = synth.exec(run, out);
            dir = synth.out;
        } else if (name == "fit") {
            code = fit.exec(run, out, err);
            dir = fit.out;
        } else if (name == "aggregate") {
            code = agg.exec(run, out, false);
            dir = agg.out;
        } else if (name == "scenario") {
            code = scen.exec(run, out, true);
            dir = scen.out;
        } else if (name == "forecast") {
            code = fc.exec(run, out, err);
            dir = fc.out;
        } else if (name == "validate") {
            code = vc.exec(run, out, err);
            dir = vc.out;
        } else if (name == "scr") {
            code = sc.exec(run, out);
            dir = sc.out;
        }
        run.finish(dir);
        return code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace ecrp::cli
