#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecrp/apps.hpp"
#include "ecrp/loss.hpp"
#include "ecrp/mcmc.hpp"
#include "ecrp/model.hpp"
#include "ecrp/trendfam.hpp"
#include "ecrp/validate.hpp"

namespace ecrp::io {

// Minimal CSV table: header names plus string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;

    // Column index or -1.
    int column(std::string_view name) const;
    int require_column(std::string_view name, const std::filesystem::path& source) const;
};

// Skips blank lines and lines starting with '#'.
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(const std::string& s, const std::filesystem::path& source, int line);
std::int64_t parse_int(const std::string& s, const std::filesystem::path& source, int line);

// Writes via a temporary file in the same directory followed by a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t h);

// Shortest round-trip representation.
std::string format_double(double x);

std::string params_to_json(const ModelParams& p);
ModelParams params_from_json(const std::string& text);
void save_params(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

// One row per retained sample, columns named by param_names plus log_density.
std::string chain_to_csv(const McmcChain& chain);
// Reads samples back using `shape` for dimensions, labels and cohort keys.
std::vector<ModelParams> load_chain_samples(const std::filesystem::path& path, const ModelParams& shape);

// `n,probability` with a leading `# unit=...,tail_mass=...,n_max=...` line.
std::string loss_to_csv(const LossDistribution& d, const std::map<std::string, std::string>& meta = {});
LossDistribution load_loss_csv(const std::filesystem::path& path);

// `horizon,discount_factor`; horizon 0 may be omitted.
DiscountCurve load_discount_curve(const std::filesystem::path& path);

// `id,age_group,gender,quantity` with optional `rate`, `w0..wK` and `count` columns.
// Missing rates and weights are resolved from theta in the given year. Quantities are
// stochastically rounded onto the unit grid.
EcrpPortfolio load_portfolio(const std::filesystem::path& path, const ModelParams* theta, int n_factors, double year,
                             double unit);

// `id,age,gender,sum_insured,term` with the age in years.
std::vector<LumpSumPolicy> load_policies(const std::filesystem::path& path);

std::string reports_to_csv(std::span<const TestReport> reports);

// Age group label to index; throws DataError for unknown labels.
int age_index(const std::vector<int>& labels, int label);

}  // namespace ecrp::io
