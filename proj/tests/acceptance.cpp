// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "ecrp/aggregate.hpp"
#include "ecrp/commands.hpp"
#include "ecrp/data.hpp"
#include "ecrp/io.hpp"
#include "ecrp/likelihood.hpp"
#include "ecrp/map_estimates.hpp"
#include "ecrp/mcmc.hpp"
#include "ecrp/mm.hpp"
#include "ecrp/rng.hpp"
#include "ecrp/validate.hpp"
#include "oracles/brute_force.hpp"
#include "oracles/counts.hpp"
#include "support.hpp"

using namespace ecrp;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

EcrpPortfolio book10k(int K) {
    EcrpPortfolio pf;
    pf.n_factors = K;
    std::vector<double> w(static_cast<std::size_t>(K + 1), 0.0);
    w.back() = 1.0;
    pf.policyholders.push_back({0.05, w, SeverityPmf::point(1), 1e4});
    return pf;
}

const std::vector<double> kLevels{0.01, 0.1, 0.5, 0.9, 0.99};

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
}

// ------------------------------------------------------------------ 1

void criterion1(Outcome& o) {
    auto t0 = Clock::now();
    LossDistribution d = aggregate_loss(book10k(0), RiskFactorSpec{});
    auto q = quantiles(d, kLevels);
    double dt = seconds_since(t0);
    const std::vector<std::size_t> expect{449, 471, 500, 529, 553};
    for (std::size_t i = 0; i < q.size(); ++i)
        o.require(std::abs(static_cast<double>(q[i]) - static_cast<double>(expect[i])) <= 1.0,
                  "quantile " + std::to_string(kLevels[i]));
    o.require(dt < 1.0, "runtime");
    o.detail << "quantiles (" << join(q) << ") in " << dt << " s";
}

// ------------------------------------------------------------------ 2

void criterion2(Outcome& o) {
    auto t0 = Clock::now();
    LossDistribution d = aggregate_loss(book10k(1), RiskFactorSpec{{0.1}});
    auto q = quantiles(d, kLevels);
    double dt = seconds_since(t0);
    const std::vector<std::size_t> expect{204, 309, 483, 712, 944};
    auto nb = oracle::negbin(500.0, 0.1);
    for (std::size_t i = 0; i < q.size(); ++i) {
        o.require(std::abs(static_cast<double>(q[i]) - static_cast<double>(expect[i])) <= 2.0,
                  "quantile " + std::to_string(kLevels[i]));
        o.require(static_cast<std::int64_t>(q[i]) == oracle::discrete_quantile(nb, kLevels[i]),
                  "negative binomial oracle at " + std::to_string(kLevels[i]));
    }
    o.require(dt < 1.0, "runtime");
    o.detail << "quantiles (" << join(q) << ") in " << dt << " s, negative binomial oracle agrees";
}

// ------------------------------------------------------------------ 3

void criterion3(Outcome& o) {
    EcrpPortfolio pf = book10k(0);
    RiskFactorSpec rf;
    auto t0 = Clock::now();
    LossDistribution panjer = aggregate_loss(pf, rf);
    double t_panjer = seconds_since(t0);

    double tv_exact = total_variation(panjer, binomial_distribution(10000, 0.05));
    o.require(std::abs(tv_exact - 0.0125) <= 0.001, "exact total variation");

    MonteCarloOptions mo;
    mo.n_sims = 50000;
    mo.seed = 1;
    t0 = Clock::now();
    LossDistribution mc = monte_carlo_bernoulli(pf, rf, mo);
    double t_mc = seconds_since(t0);
    double tv_mc = total_variation(panjer, mc);
    o.require(std::abs(tv_mc - 0.0187) <= 0.01, "Monte Carlo total variation");
    o.require(t_mc <= 230.0, "Monte Carlo runtime within an order of magnitude of 23 s");
    double speedup = t_mc / std::max(t_panjer, 1e-9);
    o.require(speedup >= 100.0, "Panjer speed-up");
    o.detail << "TV exact " << tv_exact << ", TV MC " << tv_mc << ", MC " << t_mc << " s, Panjer " << t_panjer
             << " s (x" << speedup << ")";
}

// ------------------------------------------------------------------ 4

void criterion4(Outcome& o) {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::uniform_int_distribution<int> n_holders(1, 4), n_factors(0, 2);
    const int instances = 60;
    const std::size_t n = 40;
    double worst = 0.0;
    for (int rep = 0; rep < instances; ++rep) {
        EcrpPortfolio pf;
        pf.n_factors = n_factors(rng);
        int h = n_holders(rng);
        for (int i = 0; i < h; ++i) {
            std::vector<double> w(static_cast<std::size_t>(pf.n_factors + 1));
            double s = 0.0;
            for (double& x : w) s += (x = U(rng));
            for (double& x : w) x /= s;
            std::vector<double> sev{0.0, U(rng), U(rng), U(rng)};
            double t = sev[1] + sev[2] + sev[3];
            for (double& x : sev) x /= t;
            pf.policyholders.push_back({0.02 + 0.5 * U(rng), w, SeverityPmf{sev}, 1.0 + std::floor(3 * U(rng))});
        }
        RiskFactorSpec rf;
        for (int k = 0; k < pf.n_factors; ++k) rf.sigma2.push_back(0.05 + 0.9 * U(rng));
        LossDistribution d = aggregate_loss(pf, rf, {1.0, n});
        auto ref = oracle::brute_force_aggregate(pf, rf, n);
        double tv = 0.0;
        for (std::size_t i = 0; i < n; ++i) tv += std::abs(d.pmf[i] - ref[i]);
        tv *= 0.5;
        worst = std::max(worst, tv);
    }
    o.require(worst < 1e-8, "total variation against brute force");
    o.detail << instances << " random portfolios, worst TV " << worst;
}

// ------------------------------------------------------------------ 5

// One age group; only the male cell carries exposure.
MortalityDataset one_cell(int n_causes, double exposure) {
    auto grid = ExposureGrid::constant(2000, 1, {60}, exposure);
    grid(0, Gender::female, 0) = 0.0;
    return MortalityDataset(grid, n_causes);
}

void criterion5(Outcome& o) {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst_grad = 0.0, worst_res = 0.0;
    bool bounds = true;
    for (int rep = 0; rep < 100; ++rep) {
        double s2 = 0.005 + 0.8 * U(rng);
        double e = 50.0 + 5000.0 * U(rng);
        ModelParams p = ModelParams::make(1, 1, 2000.0);
        p.sigma2 = {s2};
        MortalityDataset ds = one_cell(2, e);
        auto n = static_cast<std::int64_t>(1 + 800.0 * U(rng));
        ds.deaths(0, Gender::male, 1, 0) = n;
        double rho = e * 0.25;  // m = w = 1/2 at zero parameters
        double lam = map_lambda(s2, static_cast<double>(n), rho);
        FactorSeries l(1, 1);
        auto f = [&](double x) {
            l(1, 0) = x;
            return log_posterior(ds, p, l, PriorSpec::uniform());
        };
        double h = 1e-3 * lam;
        double g = (-f(lam + 2 * h) + 8 * f(lam + h) - 8 * f(lam - h) + f(lam - 2 * h)) / (12 * h);
        worst_grad = std::max(worst_grad, std::abs(g));

        std::normal_distribution<double> Z(1.0, std::sqrt(s2));
        std::vector<double> series(20);
        for (double& x : series) x = std::max(0.05, Z(rng));
        double root = solve_sigma_map(series);
        worst_res = std::max(worst_res, std::abs(sigma_map_residual(root, series)));
        // Root in x = 1/sigma2: 1/(2x) < log x - digamma(x) < 1/(2x) + 1/(12x^2).
        double x = 1.0 / root;
        double fx = std::log(x) - boost::math::digamma(x);
        if (!(fx > 0.5 / x && fx < 0.5 / x + 1.0 / (12.0 * x * x))) bounds = false;
    }
    o.require(worst_grad < 1e-6, "posterior gradient");
    o.require(worst_res < 1e-8, "variance equation residual");
    o.require(bounds, "digamma bounds");
    o.detail << "100 instances, worst |gradient| " << worst_grad << ", worst residual " << worst_res;
}

// ------------------------------------------------------------------ 6

void criterion6(Outcome& o) {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        double s2 = 0.001 + 2.0 * U(rng);
        ModelParams p = ModelParams::make(1, 1, 2000.0);
        p.sigma2 = {s2};
        p.alpha[1] = -4.0 + 3.0 * U(rng);
        p.u[3] = 4.0 * U(rng) - 2.0;
        double e = 100.0 + 1e5 * U(rng);
        MortalityDataset ds = one_cell(2, e);
        auto n = static_cast<std::int64_t>(300.0 * U(rng));
        ds.deaths(0, Gender::male, 1, 0) = n;
        double m = central_death_rate(p, 0, Gender::male, 2000);
        auto w = cause_weights(p, 0, Gender::male, 2000);
        double rho0 = e * m * w[0], rho1 = e * m * w[1];
        double ref = oracle::negbin_log_pmf(n, rho1, s2);
        double rel = std::abs(log_likelihood(ds, p) + rho0 - ref) / std::max(1.0, std::abs(ref));
        worst = std::max(worst, rel);
    }
    o.require(worst < 1e-10, "negative binomial collapse");
    o.detail << "100 draws, worst relative error " << worst;
}

// ------------------------------------------------------------------ 7

void criterion7(Outcome& o) {
    const ModelParams truth = synth_demo_params();
    const int runs = 20;
    int covered = 0, total = 0;
    double min_acc = 1.0, max_acc = 0.0, worst_time = 0.0;
    std::map<std::string, int> per_param;
    for (int r = 0; r < runs; ++r) {
        auto t0 = Clock::now();
        auto grid = ExposureGrid::constant(1990, 30, truth.age_labels, 1e5);
        MortalityDataset ds = synth_generate(truth, grid, 7000 + static_cast<std::uint64_t>(r));
        // Trend shapes (zeta, eta, phi, psi) are held at their true values.
        ModelParams init = mm_estimate(ds, truth).params;
        for (double& s : init.sigma2) s = std::max(s, 1e-4);
        McmcConfig cfg;
        cfg.iterations = 60000;
        cfg.burn_in = 10000;
        cfg.thin = 10;
        cfg.seed = 100 + static_cast<std::uint64_t>(r);
        McmcChain chain = mcmc_sample(ds, init, PriorSpec::uniform(), cfg);
        ModelParams lo = chain.quantile(0.05), hi = chain.quantile(0.95);
        auto check = [&](const std::vector<double>& l, const std::vector<double>& h, const std::vector<double>& t,
                         const std::string& name) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                bool in = l[i] <= t[i] && t[i] <= h[i];
                covered += in;
                per_param[name + std::to_string(i)] += in;
                ++total;
            }
        };
        check(lo.alpha, hi.alpha, truth.alpha, "alpha");
        check(lo.beta, hi.beta, truth.beta, "beta");
        check(lo.sigma2, hi.sigma2, truth.sigma2, "sigma2_");
        min_acc = std::min(min_acc, chain.min_acceptance());
        max_acc = std::max(max_acc, chain.max_acceptance());
        worst_time = std::max(worst_time, seconds_since(t0));
    }
    double coverage = static_cast<double>(covered) / total;
    int worst_param = runs;
    std::string weak;
    for (const auto& [name, c] : per_param) {
        worst_param = std::min(worst_param, c);
        if (c < 15) weak += " " + name + "=" + std::to_string(c);
    }
    o.require(coverage >= 0.85, "pooled 5-95% band coverage");
    o.require(min_acc >= 0.15 && max_acc <= 0.40, "acceptance rates");
    o.require(worst_time < 900.0, "runtime per run");
    o.detail << "coverage " << covered << "/" << total << " = " << coverage << " (worst single parameter " << worst_param
             << "/" << runs << (weak.empty() ? "" : "; below 15:" + weak) << "), acceptance [" << min_acc << ", " << max_acc << "], slowest run " << worst_time << " s";
}

// ------------------------------------------------------------------ 8

void criterion8(Outcome& o) {
    std::mt19937_64 rng(808);
    std::normal_distribution<double> N;
    const int reps = 10000;

    int rej = 0;
    std::vector<double> a(25), b(25);
    for (int r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = N(rng);
            b[i] = N(rng);
        }
        rej += independence_test(a, b, 0.05).reject;
    }
    double ind = static_cast<double>(rej) / reps;

    rej = 0;
    std::vector<double> x(100);
    for (int r = 0; r < reps; ++r) {
        for (double& v : x) v = N(rng);
        rej += serial_correlation_test(x, 2, 0.05).reject;
    }
    double bg = static_cast<double>(rej) / reps;

    Rng grng = make_rng(809, {});
    rej = 0;
    const int ks_reps = 1000;
    std::vector<double> lam(30);
    for (int r = 0; r < ks_reps; ++r) {
        for (double& v : lam) v = draw_unit_gamma(grng, 0.02);
        rej += ks_gamma_test(lam, 0.02, 0.05).reject;
    }
    double ks = static_cast<double>(rej) / ks_reps;

    o.require(std::abs(ind - 0.05) <= 0.01, "independence test");
    o.require(std::abs(bg - 0.05) <= 0.01, "Breusch-Godfrey test");
    o.require(std::abs(ks - 0.05) <= 0.02, "KS test");
    o.detail << "rejection rates: independence " << ind << ", Breusch-Godfrey " << bg << ", KS " << ks;
}

// ------------------------------------------------------------------ 9

struct CliResult {
    int code;
    std::string out, err;
};

CliResult cli_run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Value of "key: value" in a summary text; NaN if missing.
double summary_value(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + ": ", 0) == 0) return std::stod(line.substr(key.size() + 2));
    return std::nan("");
}

bool contains(const std::string& text, const std::string& s) { return text.find(s) != std::string::npos; }

std::string policies_book() {
    std::ostringstream os;
    os << "id,age,gender,sum_insured,term\n";
    int id = 1;
    for (int age = 60; age <= 80; ++age)
        for (char g : {'f', 'm'})
            for (int i = 0; i < 100; ++i) os << id++ << ',' << age << ',' << g << ',' << 10000 + 1900 * ((i * 37) % 101) << ",20\n";
    return os.str();
}

void criterion9(Outcome& o) {
    fs::path dir = testing::temp_dir("acceptance9");
    auto p = [&](const std::string& s) { return (dir / s).string(); };
    auto step = [&](const std::string& name, const std::vector<std::string>& args, int expect = cli::kExitOk) {
        CliResult r = cli_run(args);
        o.require(r.code == expect, name + " exit code " + std::to_string(r.code) + " " + r.err);
        return r;
    };

    step("synth", {"synth", "--demo", "--years", "30", "--seed", "9", "--inflation-d", "0.2", "--inflation-ref-year",
                   "2000", "-o", p("data")});
    std::vector<std::string> data{"--deaths", p("data/deaths.csv"), "--exposure", p("data/exposure.csv")};
    auto with = [&](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };

    auto fit = step("fit", with({"fit", "--init", p("data/params_true.json"), "--method", "mcmc", "--iterations", "3000",
                                 "--burn-in", "1000", "--chains", "1", "-o", p("fit")},
                                data));
    o.require(contains(fit.out, "sigma[k=1]") && contains(fit.out, "sigma[k=2]"), "risk factor standard deviations");
    o.require(contains(fit.out, "life_expectancy["), "life expectancy in fit summary");
    o.require(fs::exists(p("fit/weights.csv")), "cause weights file");

    auto val = step("validate", with({"validate", "--params", p("fit/params.json"), "--chain", p("fit/chain.csv"), "-o",
                                      p("val")},
                                     data));
    o.require(contains(val.out, "pass_rate[independence]") && contains(val.out, "pass_rate[breusch_godfrey]") &&
                  contains(val.out, "pass_rate[ks_gamma]") && contains(val.out, "pass_rate[cross_variance]"),
              "validation pass rates");

    auto fc = step("forecast", with({"forecast", "--params", p("fit/params.json"), "--chain", p("fit/chain.csv"),
                                     "--age-group", "70", "--gender", "f", "--from", "2020", "--to", "2030",
                                     "--base-year", "2019", "--estimate-d", "--d-ref-year", "2000", "--life-expectancy-ages", "60,70", "-o",
                                     p("fc")},
                                    data));
    double d = summary_value(fc.out, "d");
    o.require(std::isfinite(d), "variance slope d");
    o.require(fs::exists(p("fc/life_expectancy.csv")) && fs::exists(p("fc/forecast.csv")), "forecast outputs");

    testing::write_text(dir / "portfolio.csv", "id,age_group,gender,quantity\n1,60,m,20000\n2,70,f,20000\n3,80,m,20000\n");
    auto sc = step("scenario", with({"scenario", "--portfolio", p("portfolio.csv"), "--params", p("fit/params.json"),
                                     "--year", "2019", "--reduce", "1=0.2", "-o", p("scen")},
                                    data));
    o.require(contains(sc.out, "lambda[k=1"), "scenario factor realisation");

    // Parameter risk on a thinly observed population.
    step("synth small", {"synth", "--demo", "--first-year", "2005", "--years", "15", "--cell-exposure", "2000", "--seed",
                         "19", "-o", p("small")});
    step("fit small", {"fit", "--deaths", p("small/deaths.csv"), "--exposure", p("small/exposure.csv"), "--init",
                       p("small/params_true.json"), "--method", "mcmc", "--iterations", "4000", "--burn-in", "1000",
                       "--thin", "5", "--chains", "1", "-o", p("small_fit")});
    testing::write_text(dir / "book.csv", policies_book());
    auto scr = step("scr", {"scr", "--policies", p("book.csv"), "--params", p("small_fit/params.json"), "--chain",
                            p("small_fit/chain.csv"), "--base-year", "2019", "--rate", "0.01", "--horizon", "40",
                            "--assets", "1e8", "-o", p("scr")});
    double with_risk = summary_value(scr.out, "scr"), without = summary_value(scr.out, "scr_mean_sample");
    o.require(std::isfinite(with_risk) && std::isfinite(without), "SCR values");
    o.require(with_risk >= without, "SCR with parameter risk at least the mean-sample SCR");
    o.detail << "pipeline ran; d = " << d << ", SCR " << with_risk << " vs " << without << " without parameter risk ("
             << 100.0 * (without / with_risk - 1.0) << "%)";
    fs::remove_all(dir);
}

// ------------------------------------------------------------------ 10

std::map<std::string, std::string> dir_hashes(const fs::path& dir) {
    std::map<std::string, std::string> h;
    for (const auto& e : fs::directory_iterator(dir)) h[e.path().filename().string()] = io::hex64(io::fnv1a(io::read_file(e.path())));
    return h;
}

void criterion10(Outcome& o) {
    fs::path dir = testing::temp_dir("acceptance10");
    auto p = [&](const std::string& s) { return (dir / s).string(); };
    if (cli_run({"synth", "--demo", "--years", "12", "--seed", "4", "-o", p("data")}).code != 0) {
        o.require(false, "synth");
        return;
    }
    testing::write_text(dir / "book.csv", "id,age,gender,sum_insured,term\n1,60,m,100000,10\n2,75,f,50000,5\n");
    std::string src = ECRP_SOURCE_DIR;
    std::vector<std::pair<std::string, std::function<std::vector<std::string>(const std::string&)>>> commands{
        {"synth", [&](const std::string& out) {
             return std::vector<std::string>{"synth", "--demo", "--years", "12", "--seed", "4", "-o", out};
         }},
        {"fit", [&](const std::string& out) {
             return std::vector<std::string>{"fit", "--deaths", p("data/deaths.csv"), "--exposure", p("data/exposure.csv"),
                                             "--init", p("data/params_true.json"), "--iterations", "1500", "--burn-in",
                                             "500", "--chains", "2", "--seed", "3", "-o", out};
         }},
        {"aggregate", [&](const std::string& out) {
             return std::vector<std::string>{"aggregate", "--portfolio", src + "/configs/book10k_factor.csv", "--factors",
                                             "1", "--sigma2", "0.1", "--mc-sims", "2000", "--seed", "5", "-o", out};
         }},
        {"validate", [&](const std::string& out) {
             return std::vector<std::string>{"validate", "--deaths", p("data/deaths.csv"), "--exposure",
                                             p("data/exposure.csv"), "--params", p("data/params_true.json"), "-o", out};
         }},
        {"scr", [&](const std::string& out) {
             return std::vector<std::string>{"scr", "--policies", p("book.csv"), "--params", p("data/params_true.json"),
                                             "--base-year", "2001", "--rate", "0.01", "-o", out};
         }},
    };
    int files = 0;
    for (const auto& [name, make] : commands) {
        auto a = cli_run(make(p(name + "_a"))), b = cli_run(make(p(name + "_b")));
        if (a.code > cli::kExitValidationFailed || a.code != b.code || a.code == cli::kExitError) {
            o.require(false, name + " failed: " + a.err);
            continue;
        }
        auto ha = dir_hashes(p(name + "_a")), hb = dir_hashes(p(name + "_b"));
        o.require(ha == hb, name + " outputs differ");
        files += static_cast<int>(ha.size());
    }
    o.detail << files << " output files hash-identical across reruns of synth, fit, aggregate, validate, scr";
    fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::pair<int, std::function<void(Outcome&)>>> all{
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
        {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& [id, fn] : all) {
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        auto t0 = Clock::now();
        try {
            fn(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail.str() << " ["
                  << seconds_since(t0) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
