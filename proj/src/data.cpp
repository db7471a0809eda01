#include "ecrp/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "ecrp/io.hpp"
#include "ecrp/rng.hpp"

namespace ecrp {

ExposureGrid::ExposureGrid(int first_year, int n_years, std::vector<int> age_labels)
    : first_year_(first_year), n_years_(n_years), age_labels_(std::move(age_labels)) {
    if (n_years <= 0 || age_labels_.empty()) throw DomainError("exposure grid needs at least one year and age group");
    values_.assign(static_cast<std::size_t>(n_years) * age_labels_.size() * kGenders, 0.0);
}

ExposureGrid ExposureGrid::constant(int first_year, int n_years, std::vector<int> age_labels, double value) {
    ExposureGrid g(first_year, n_years, std::move(age_labels));
    std::fill(g.values_.begin(), g.values_.end(), value);
    return g;
}

MortalityDataset::MortalityDataset(ExposureGrid exposure, int n_causes)
    : exposure_(std::move(exposure)), n_causes_(n_causes) {
    if (n_causes <= 0) throw DomainError("dataset needs at least the idiosyncratic cause");
    deaths_.assign(static_cast<std::size_t>(n_years()) * static_cast<std::size_t>(n_ages()) * kGenders *
                       static_cast<std::size_t>(n_causes),
                   0);
}

std::int64_t MortalityDataset::total_deaths(int a, Gender g, int ti) const {
    std::int64_t s = 0;
    for (int k = 0; k < n_causes_; ++k) s += deaths(a, g, k, ti);
    return s;
}

std::int64_t MortalityDataset::cause_total(int k, int ti) const {
    std::int64_t s = 0;
    for (int a = 0; a < n_ages(); ++a)
        for (int gi = 0; gi < kGenders; ++gi) s += deaths(a, gender_from_index(gi), k, ti);
    return s;
}

namespace {

std::string where(const std::filesystem::path& p, int line) {
    return p.string() + ":" + std::to_string(line) + ": ";
}

void check_consecutive(const std::set<int>& years, const std::filesystem::path& source) {
    int expect = *years.begin();
    for (int y : years) {
        if (y != expect) throw DataError(source.string() + ": non-consecutive years (" + std::to_string(expect) + " missing)");
        ++expect;
    }
}

}  // namespace

MortalityDataset load_dataset(const std::filesystem::path& deaths_csv, const std::filesystem::path& exposure_csv) {
    io::CsvTable et = io::read_csv(exposure_csv);
    int ey = et.require_column("year", exposure_csv), ea = et.require_column("age_group", exposure_csv),
        eg = et.require_column("gender", exposure_csv), ee = et.require_column("exposure", exposure_csv);
    if (et.rows.empty()) throw DataError(exposure_csv.string() + ": no exposure rows");

    struct ExposureRow {
        int year, age;
        Gender g;
        double value;
        int line;
    };
    std::vector<ExposureRow> erows;
    std::set<int> years, ages;
    for (std::size_t r = 0; r < et.rows.size(); ++r) {
        const auto& row = et.rows[r];
        int line = et.line_numbers[r];
        ExposureRow x{static_cast<int>(io::parse_int(row[static_cast<std::size_t>(ey)], exposure_csv, line)),
                      static_cast<int>(io::parse_int(row[static_cast<std::size_t>(ea)], exposure_csv, line)),
                      Gender::female, io::parse_double(row[static_cast<std::size_t>(ee)], exposure_csv, line), line};
        try {
            x.g = parse_gender(row[static_cast<std::size_t>(eg)]);
        } catch (const DataError& e) {
            throw DataError(where(exposure_csv, line) + e.what());
        }
        if (!(x.value >= 0.0) || !std::isfinite(x.value)) throw DataError(where(exposure_csv, line) + "negative exposure");
        years.insert(x.year);
        ages.insert(x.age);
        erows.push_back(x);
    }
    check_consecutive(years, exposure_csv);
    std::vector<int> labels(ages.begin(), ages.end());
    ExposureGrid grid(*years.begin(), static_cast<int>(years.size()), labels);
    auto age_of = [&](int label) { return static_cast<int>(std::lower_bound(labels.begin(), labels.end(), label) - labels.begin()); };

    std::vector<char> seen(static_cast<std::size_t>(grid.n_years()) * labels.size() * kGenders, 0);
    for (const auto& x : erows) {
        int ti = x.year - grid.first_year(), a = age_of(x.age);
        auto idx = (static_cast<std::size_t>(ti) * labels.size() + static_cast<std::size_t>(a)) * kGenders +
                   static_cast<std::size_t>(index(x.g));
        if (seen[idx]) throw DataError(where(exposure_csv, x.line) + "duplicate key");
        seen[idx] = 1;
        grid(a, x.g, ti) = x.value;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw DataError(exposure_csv.string() + ": missing exposure cell");

    io::CsvTable dt = io::read_csv(deaths_csv);
    int dy = dt.require_column("year", deaths_csv), da = dt.require_column("age_group", deaths_csv),
        dg = dt.require_column("gender", deaths_csv), dk = dt.require_column("cause", deaths_csv),
        dd = dt.require_column("deaths", deaths_csv);
    if (dt.rows.empty()) throw DataError(deaths_csv.string() + ": no death rows");

    struct DeathRow {
        int ti, a, k;
        Gender g;
        std::int64_t n;
        int line;
    };
    std::vector<DeathRow> drows;
    std::set<int> dyears;
    int max_cause = 0;
    for (std::size_t r = 0; r < dt.rows.size(); ++r) {
        const auto& row = dt.rows[r];
        int line = dt.line_numbers[r];
        int year = static_cast<int>(io::parse_int(row[static_cast<std::size_t>(dy)], deaths_csv, line));
        int age = static_cast<int>(io::parse_int(row[static_cast<std::size_t>(da)], deaths_csv, line));
        int k = static_cast<int>(io::parse_int(row[static_cast<std::size_t>(dk)], deaths_csv, line));
        std::int64_t n = io::parse_int(row[static_cast<std::size_t>(dd)], deaths_csv, line);
        Gender g;
        try {
            g = parse_gender(row[static_cast<std::size_t>(dg)]);
        } catch (const DataError& e) {
            throw DataError(where(deaths_csv, line) + e.what());
        }
        if (n < 0) throw DataError(where(deaths_csv, line) + "negative count");
        if (k < 0) throw DataError(where(deaths_csv, line) + "negative cause index");
        dyears.insert(year);
        if (!ages.count(age)) throw DataError(where(deaths_csv, line) + "age group without exposure");
        max_cause = std::max(max_cause, k);
        drows.push_back({year - grid.first_year(), age_of(age), k, g, n, line});
    }
    check_consecutive(dyears, deaths_csv);
    if (dyears != years) throw DataError(deaths_csv.string() + ": years differ from the exposure file");

    MortalityDataset ds(grid, max_cause + 1);
    std::vector<char> dseen(static_cast<std::size_t>(ds.n_years()) * labels.size() * kGenders *
                                static_cast<std::size_t>(ds.n_causes()),
                            0);
    for (const auto& x : drows) {
        auto idx = ((static_cast<std::size_t>(x.ti) * labels.size() + static_cast<std::size_t>(x.a)) * kGenders +
                    static_cast<std::size_t>(index(x.g))) *
                       static_cast<std::size_t>(ds.n_causes()) +
                   static_cast<std::size_t>(x.k);
        if (dseen[idx]) throw DataError(where(deaths_csv, x.line) + "duplicate key");
        dseen[idx] = 1;
        ds.deaths(x.a, x.g, x.k, x.ti) = x.n;
    }
    if (std::find(dseen.begin(), dseen.end(), 0) != dseen.end())
        throw DataError(deaths_csv.string() + ": missing (year, age_group, gender, cause) cell");
    return ds;
}

void write_dataset(const MortalityDataset& ds, const std::filesystem::path& deaths_csv,
                   const std::filesystem::path& exposure_csv) {
    std::ostringstream d, e;
    d << "year,age_group,gender,cause,deaths\n";
    e << "year,age_group,gender,exposure\n";
    for (int ti = 0; ti < ds.n_years(); ++ti)
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender g = gender_from_index(gi);
                int label = ds.age_labels()[static_cast<std::size_t>(a)];
                e << ds.year(ti) << ',' << label << ',' << gender_code(g) << ','
                  << io::format_double(ds.exposure(a, g, ti)) << '\n';
                for (int k = 0; k < ds.n_causes(); ++k)
                    d << ds.year(ti) << ',' << label << ',' << gender_code(g) << ',' << k << ','
                      << ds.deaths(a, g, k, ti) << '\n';
            }
    io::write_atomic(deaths_csv, d.str());
    io::write_atomic(exposure_csv, e.str());
}

ComparabilityTable load_comparability(const std::filesystem::path& csv, int cutoff_year) {
    io::CsvTable t = io::read_csv(csv);
    int ck = t.require_column("cause", csv), cf = t.require_column("factor", csv);
    ComparabilityTable table;
    table.cutoff_year = cutoff_year;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        int line = t.line_numbers[r];
        int k = static_cast<int>(io::parse_int(t.rows[r][static_cast<std::size_t>(ck)], csv, line));
        double f = io::parse_double(t.rows[r][static_cast<std::size_t>(cf)], csv, line);
        if (!(f > 0.0)) throw DataError(where(csv, line) + "comparability factors must be positive");
        if (!table.factor.emplace(k, f).second) throw DataError(where(csv, line) + "duplicate key");
    }
    return table;
}

MortalityDataset apply_comparability(const MortalityDataset& ds, const ComparabilityTable& table) {
    for (int k = 0; k < ds.n_causes(); ++k) {
        auto it = table.factor.find(k);
        if (it == table.factor.end()) throw DataError("missing comparability factor for cause " + std::to_string(k));
        if (!(it->second > 0.0)) throw DataError("comparability factors must be positive");
    }
    MortalityDataset out = ds;
    for (int ti = 0; ti < ds.n_years(); ++ti) {
        if (ds.year(ti) >= table.cutoff_year) continue;
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi)
                for (int k = 0; k < ds.n_causes(); ++k) {
                    Gender g = gender_from_index(gi);
                    double scaled = static_cast<double>(ds.deaths(a, g, k, ti)) * table.factor.at(k);
                    out.deaths(a, g, k, ti) = static_cast<std::int64_t>(std::floor(scaled + 0.5));
                }
    }
    return out;
}

TransformedCounts transform_iid(const MortalityDataset& ds, const ModelParams& theta) {
    if (theta.n_ages != ds.n_ages() || theta.n_causes() != ds.n_causes())
        throw DomainError("model dimensions do not match the dataset");
    const int causes = ds.n_causes();
    const int last = ds.n_years() - 1;
    TransformedCounts tc{ds, {}, {}, {}};
    tc.exposure_ref.resize(static_cast<std::size_t>(theta.n_groups()));
    tc.rate_ref.resize(tc.exposure_ref.size());
    tc.weight_ref.resize(tc.exposure_ref.size() * static_cast<std::size_t>(causes));
    std::vector<double> w(static_cast<std::size_t>(causes)), w_ref(w.size());
    for (int a = 0; a < ds.n_ages(); ++a)
        for (int gi = 0; gi < kGenders; ++gi) {
            Gender g = gender_from_index(gi);
            auto grp = static_cast<std::size_t>(ModelParams::group(a, g));
            double e_ref = ds.exposure(a, g, last);
            double m_ref = central_death_rate(theta, a, g, ds.year(last));
            cause_weights(theta, a, g, ds.year(last), w_ref);
            tc.exposure_ref[grp] = e_ref;
            tc.rate_ref[grp] = m_ref;
            std::copy(w_ref.begin(), w_ref.end(), tc.weight_ref.begin() + static_cast<std::ptrdiff_t>(grp * w.size()));
            for (int ti = 0; ti < ds.n_years(); ++ti) {
                double e = ds.exposure(a, g, ti);
                double m = central_death_rate(theta, a, g, ds.year(ti));
                cause_weights(theta, a, g, ds.year(ti), w);
                for (int k = 0; k < causes; ++k) {
                    auto ki = static_cast<std::size_t>(k);
                    double denom = e * m * w[ki];
                    std::int64_t n = ds.deaths(a, g, k, ti);
                    if (!(denom > 0.0)) {
                        if (n == 0) continue;
                        throw DataError("zero denominator cell in the i.i.d. transform");
                    }
                    double ratio = (e_ref * m_ref * w_ref[ki]) / denom;
                    tc.counts.deaths(a, g, k, ti) =
                        static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
                }
            }
        }
    return tc;
}

std::vector<double> NormalizedCounts::series(int a, Gender g, int k) const {
    std::vector<double> s(static_cast<std::size_t>(n_years));
    for (int ti = 0; ti < n_years; ++ti) s[static_cast<std::size_t>(ti)] = (*this)(a, g, k, ti);
    return s;
}

NormalizedCounts normalize_counts(const TransformedCounts& tc, const FactorSeries& lambda) {
    const auto& ds = tc.counts;
    if (lambda.n_factors() != ds.n_factors() || lambda.n_years() != ds.n_years())
        throw DomainError("factor series dimensions do not match the counts");
    NormalizedCounts out{ds.n_years(), ds.n_ages(), ds.n_causes(), {}};
    out.values.resize(static_cast<std::size_t>(ds.n_years()) * static_cast<std::size_t>(ds.n_ages()) * kGenders *
                      static_cast<std::size_t>(ds.n_causes()));
    for (int ti = 0; ti < ds.n_years(); ++ti)
        for (int k = 1; k < ds.n_causes(); ++k)
            if (!(lambda(k, ti) > 0.0)) throw DomainError("risk-factor realisations must be positive");
    for (int ti = 0; ti < ds.n_years(); ++ti)
        for (int a = 0; a < ds.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender g = gender_from_index(gi);
                int grp = ModelParams::group(a, g);
                for (int k = 0; k < ds.n_causes(); ++k) {
                    double mu = tc.intensity_ref(grp, k) * (k == 0 ? 1.0 : lambda(k, ti));
                    if (!(mu > 0.0)) throw DomainError("normalisation needs positive intensities");
                    out(a, g, k, ti) = (static_cast<double>(ds.deaths(a, g, k, ti)) - mu) / std::sqrt(mu);
                }
            }
    return out;
}

MortalityDataset synth_generate(const ModelParams& theta, const ExposureGrid& exposure, std::uint64_t seed,
                                const SynthOptions& options) {
    return synth_generate(theta, exposure, seed, options, nullptr);
}

MortalityDataset synth_generate(const ModelParams& theta, const ExposureGrid& exposure, std::uint64_t seed,
                                const SynthOptions& options, FactorSeries* factors_out) {
    theta.validate();
    if (theta.n_ages != exposure.n_ages()) throw DomainError("model and exposure grid have different age groups");
    if (options.inflation_d < 0.0) throw DomainError("variance inflation slope must be non-negative");
    MortalityDataset ds(exposure, theta.n_causes());
    FactorSeries lambda(theta.n_factors, exposure.n_years());
    for (int k = 1; k <= theta.n_factors; ++k)
        for (int ti = 0; ti < exposure.n_years(); ++ti) {
            double s2 = theta.sigma2[static_cast<std::size_t>(k - 1)];
            int year = exposure.year(ti);
            if (options.inflation_d > 0.0 && year >= options.inflation_ref_year) {
                double f = 1.0 + options.inflation_d * (year - options.inflation_ref_year);
                s2 *= f * f;
            }
            Rng rng = make_rng(seed, {1, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(ti)});
            lambda(k, ti) = draw_unit_gamma(rng, s2);
        }
    std::vector<double> w(static_cast<std::size_t>(theta.n_causes()));
    for (int ti = 0; ti < exposure.n_years(); ++ti)
        for (int a = 0; a < exposure.n_ages(); ++a)
            for (int gi = 0; gi < kGenders; ++gi) {
                Gender g = gender_from_index(gi);
                double em = exposure(a, g, ti) * central_death_rate(theta, a, g, exposure.year(ti));
                cause_weights(theta, a, g, exposure.year(ti), w);
                for (int k = 0; k < theta.n_causes(); ++k) {
                    double mu = em * w[static_cast<std::size_t>(k)] * (k == 0 ? 1.0 : lambda(k, ti));
                    if (mu <= 0.0) continue;
                    Rng rng = make_rng(seed, {2, static_cast<std::uint64_t>(ti),
                                              static_cast<std::uint64_t>(ModelParams::group(a, g)),
                                              static_cast<std::uint64_t>(k)});
                    std::poisson_distribution<std::int64_t> pois(mu);
                    ds.deaths(a, g, k, ti) = pois(rng);
                }
            }
    if (factors_out) *factors_out = std::move(lambda);
    return ds;
}

ModelParams synth_demo_params() {
    ModelParams p = ModelParams::make(5, 2, 2005.0, {60, 65, 70, 75, 80});
    for (int a = 0; a < p.n_ages; ++a)
        for (int gi = 0; gi < kGenders; ++gi) {
            Gender g = gender_from_index(gi);
            auto grp = static_cast<std::size_t>(ModelParams::group(a, g));
            // m ~ 0.01 at 60 for males, rising by a factor ~1.5 per group; females lower.
            p.alpha[grp] = std::log(2.0 * 0.01) + 0.4 * a - (g == Gender::female ? 0.4 : 0.0);
            p.beta[grp] = -0.02 + 0.002 * a;
            std::size_t w = static_cast<std::size_t>(p.weight_index(static_cast<int>(grp), 0));
            p.u[w + 1] = -0.3 + 0.15 * a;
            p.u[w + 2] = -0.8 + (g == Gender::male ? 0.2 : 0.0);
            p.v[w + 1] = 0.01;
            p.v[w + 2] = -0.01;
        }
    p.sigma2 = {0.01, 0.03};
    return p;
}

}  // namespace ecrp
