#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ecrp/common.hpp"
#include "ecrp/trendfam.hpp"

namespace ecrp {

// Exposure to risk on a (year x age group x gender) grid with consecutive years.
class ExposureGrid {
public:
    ExposureGrid() = default;
    ExposureGrid(int first_year, int n_years, std::vector<int> age_labels);

    int first_year() const { return first_year_; }
    int last_year() const { return first_year_ + n_years_ - 1; }
    int n_years() const { return n_years_; }
    int n_ages() const { return static_cast<int>(age_labels_.size()); }
    const std::vector<int>& age_labels() const { return age_labels_; }
    int year(int ti) const { return first_year_ + ti; }

    double operator()(int a, Gender g, int ti) const { return values_[offset(a, g, ti)]; }
    double& operator()(int a, Gender g, int ti) { return values_[offset(a, g, ti)]; }

    // Same exposure in every cell.
    static ExposureGrid constant(int first_year, int n_years, std::vector<int> age_labels, double value);

private:
    std::size_t offset(int a, Gender g, int ti) const {
        return (static_cast<std::size_t>(ti) * age_labels_.size() + static_cast<std::size_t>(a)) * kGenders +
               static_cast<std::size_t>(index(g));
    }

    int first_year_ = 0;
    int n_years_ = 0;
    std::vector<int> age_labels_;
    std::vector<double> values_;
};

// Recorded deaths per (year, age group, gender, cause) plus exposures.
class MortalityDataset {
public:
    MortalityDataset() = default;
    MortalityDataset(ExposureGrid exposure, int n_causes);

    const ExposureGrid& exposure_grid() const { return exposure_; }
    ExposureGrid& exposure_grid() { return exposure_; }

    int first_year() const { return exposure_.first_year(); }
    int last_year() const { return exposure_.last_year(); }
    int n_years() const { return exposure_.n_years(); }
    int n_ages() const { return exposure_.n_ages(); }
    int n_causes() const { return n_causes_; }
    int n_factors() const { return n_causes_ - 1; }
    const std::vector<int>& age_labels() const { return exposure_.age_labels(); }
    int year(int ti) const { return exposure_.year(ti); }

    double exposure(int a, Gender g, int ti) const { return exposure_(a, g, ti); }

    std::int64_t deaths(int a, Gender g, int k, int ti) const { return deaths_[offset(a, g, k, ti)]; }
    std::int64_t& deaths(int a, Gender g, int k, int ti) { return deaths_[offset(a, g, k, ti)]; }

    std::int64_t total_deaths(int a, Gender g, int ti) const;
    // Deaths of cause k summed over ages and genders.
    std::int64_t cause_total(int k, int ti) const;

private:
    std::size_t offset(int a, Gender g, int k, int ti) const {
        return ((static_cast<std::size_t>(ti) * static_cast<std::size_t>(n_ages()) + static_cast<std::size_t>(a)) *
                    kGenders +
                static_cast<std::size_t>(index(g))) *
                   static_cast<std::size_t>(n_causes_) +
               static_cast<std::size_t>(k);
    }

    ExposureGrid exposure_;
    int n_causes_ = 0;
    std::vector<std::int64_t> deaths_;
};

// Reads `year,age_group,gender,cause,deaths` and `year,age_group,gender,exposure`.
MortalityDataset load_dataset(const std::filesystem::path& deaths_csv, const std::filesystem::path& exposure_csv);
void write_dataset(const MortalityDataset& ds, const std::filesystem::path& deaths_csv,
                   const std::filesystem::path& exposure_csv);

struct ComparabilityTable {
    std::map<int, double> factor;  // by cause index
    int cutoff_year = 0;
};

// Reads `cause,factor`; the cutoff year comes from configuration.
ComparabilityTable load_comparability(const std::filesystem::path& csv, int cutoff_year);

// Counts before the cutoff year are multiplied by the cause factor and rounded half up.
MortalityDataset apply_comparability(const MortalityDataset& ds, const ComparabilityTable& table);

// Per-factor, per-year values (risk-factor realisations); factor k = 1..K.
class FactorSeries {
public:
    FactorSeries() = default;
    FactorSeries(int n_factors, int n_years, double fill = 1.0)
        : n_factors_(n_factors), n_years_(n_years),
          values_(static_cast<std::size_t>(n_factors) * static_cast<std::size_t>(n_years), fill) {}

    int n_factors() const { return n_factors_; }
    int n_years() const { return n_years_; }
    double operator()(int k, int ti) const { return values_[offset(k, ti)]; }
    double& operator()(int k, int ti) { return values_[offset(k, ti)]; }
    std::span<const double> factor(int k) const {
        return {values_.data() + offset(k, 0), static_cast<std::size_t>(n_years_)};
    }

private:
    std::size_t offset(int k, int ti) const {
        return static_cast<std::size_t>(k - 1) * static_cast<std::size_t>(n_years_) + static_cast<std::size_t>(ti);
    }

    int n_factors_ = 0;
    int n_years_ = 0;
    std::vector<double> values_;
};

// Counts rescaled to the intensities of the final year so that they are i.i.d. over time.
struct TransformedCounts {
    MortalityDataset counts;           // deaths hold N'; exposures are the original ones
    std::vector<double> exposure_ref;  // E_{a,g}(T) per group
    std::vector<double> rate_ref;      // m_{a,g}(T) per group
    std::vector<double> weight_ref;    // w_{a,g,k}(T) per group and cause

    int n_causes() const { return counts.n_causes(); }
    double intensity_ref(int grp, int k) const {
        auto gi = static_cast<std::size_t>(grp);
        return exposure_ref[gi] * rate_ref[gi] * weight_ref[gi * static_cast<std::size_t>(n_causes()) + static_cast<std::size_t>(k)];
    }
};

TransformedCounts transform_iid(const MortalityDataset& ds, const ModelParams& theta);

// Real-valued grid N* indexed like MortalityDataset deaths.
struct NormalizedCounts {
    int n_years = 0, n_ages = 0, n_causes = 0;
    std::vector<double> values;

    double operator()(int a, Gender g, int k, int ti) const {
        return values[((static_cast<std::size_t>(ti) * static_cast<std::size_t>(n_ages) + static_cast<std::size_t>(a)) *
                           kGenders + static_cast<std::size_t>(index(g))) *
                          static_cast<std::size_t>(n_causes) + static_cast<std::size_t>(k)];
    }
    double& operator()(int a, Gender g, int k, int ti) {
        return values[((static_cast<std::size_t>(ti) * static_cast<std::size_t>(n_ages) + static_cast<std::size_t>(a)) *
                           kGenders + static_cast<std::size_t>(index(g))) *
                          static_cast<std::size_t>(n_causes) + static_cast<std::size_t>(k)];
    }
    std::vector<double> series(int a, Gender g, int k) const;
};

// (N' - E m w lambda) / sqrt(E m w lambda) with lambda_0 := 1.
NormalizedCounts normalize_counts(const TransformedCounts& tc, const FactorSeries& lambda);

struct SynthOptions {
    // Forecast-style variance inflation sigma2 * (1 + d (t - ref_year))^2 for t >= ref_year.
    double inflation_d = 0.0;
    int inflation_ref_year = 0;
};

MortalityDataset synth_generate(const ModelParams& theta, const ExposureGrid& exposure, std::uint64_t seed,
                                const SynthOptions& options = {});

// Five age groups (60..80), two factors with variances 0.01 and 0.03, t0 = 2005;
// rates fall by about 2% a year. Used by `synth --demo` and the recovery tests.
ModelParams synth_demo_params();

// Same as synth_generate but also returns the drawn factor realisations.
MortalityDataset synth_generate(const ModelParams& theta, const ExposureGrid& exposure, std::uint64_t seed,
                                const SynthOptions& options, FactorSeries* factors_out);

}  // namespace ecrp
