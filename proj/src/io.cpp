#include "ecrp/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ecrp::io {

namespace {

std::string trim(std::string s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string where(const std::filesystem::path& p, int line) {
    return p.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

int CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int CsvTable::require_column(std::string_view name, const std::filesystem::path& source) const {
    int c = column(name);
    if (c < 0) throw DataError(source.string() + ": missing column '" + std::string(name) + "'");
    return c;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    int n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto cells = split(s);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(where(path, n) + "malformed row: expected " + std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(n);
    }
    if (!have_header) throw DataError(path.string() + ": empty file");
    return t;
}

double parse_double(const std::string& s, const std::filesystem::path& source, int line) {
    double x = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size()) throw DataError(where(source, line) + "malformed number '" + s + "'");
    return x;
}

std::int64_t parse_int(const std::string& s, const std::filesystem::path& source, int line) {
    std::int64_t x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size()) throw DataError(where(source, line) + "malformed integer '" + s + "'");
    return x;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) return "nan";
    return std::string(buf, p);
}

std::string params_to_json(const ModelParams& p) {
    nlohmann::ordered_json j;
    j["n_ages"] = p.n_ages;
    j["n_factors"] = p.n_factors;
    j["t0"] = p.t0;
    j["normalize_trend"] = p.normalize_trend;
    j["age_labels"] = p.age_labels;
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
    j["zeta"] = p.zeta;
    j["eta"] = p.eta;
    j["u"] = p.u;
    j["v"] = p.v;
    j["phi"] = p.phi;
    j["psi"] = p.psi;
    j["sigma2"] = p.sigma2;
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [y, x] : p.cohort) c[std::to_string(y)] = x;
    j["cohort"] = c;
    return j.dump(2) + "\n";
}

ModelParams params_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed parameter file: ") + e.what());
    }
    try {
        ModelParams p;
        p.n_ages = j.at("n_ages").get<int>();
        p.n_factors = j.at("n_factors").get<int>();
        p.t0 = j.at("t0").get<double>();
        p.normalize_trend = j.value("normalize_trend", true);
        p.age_labels = j.value("age_labels", std::vector<int>{});
        p.alpha = j.at("alpha").get<std::vector<double>>();
        p.beta = j.at("beta").get<std::vector<double>>();
        p.zeta = j.at("zeta").get<std::vector<double>>();
        p.eta = j.at("eta").get<std::vector<double>>();
        p.u = j.at("u").get<std::vector<double>>();
        p.v = j.at("v").get<std::vector<double>>();
        p.phi = j.at("phi").get<std::vector<double>>();
        p.psi = j.at("psi").get<std::vector<double>>();
        p.sigma2 = j.at("sigma2").get<std::vector<double>>();
        if (j.contains("cohort"))
            for (const auto& [k, v] : j["cohort"].items()) p.cohort[std::stoi(k)] = v.get<double>();
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed parameter file: ") + e.what());
    } catch (const DomainError& e) {
        throw DataError(std::string("inconsistent parameter file: ") + e.what());
    }
}

void save_params(const ModelParams& p, const std::filesystem::path& path) { write_atomic(path, params_to_json(p)); }

ModelParams load_params(const std::filesystem::path& path) { return params_from_json(read_file(path)); }

std::string chain_to_csv(const McmcChain& chain) {
    std::ostringstream os;
    if (chain.samples.empty()) return "log_density\n";
    auto names = param_names(chain.samples.front());
    for (const auto& n : names) os << n << ',';
    os << "log_density\n";
    for (std::size_t i = 0; i < chain.samples.size(); ++i) {
        for (double x : flatten(chain.samples[i])) os << format_double(x) << ',';
        os << format_double(i < chain.log_density.size() ? chain.log_density[i] : 0.0) << '\n';
    }
    return os.str();
}

std::vector<ModelParams> load_chain_samples(const std::filesystem::path& path, const ModelParams& shape) {
    CsvTable t = read_csv(path);
    auto names = param_names(shape);
    std::vector<int> cols;
    for (const auto& n : names) cols.push_back(t.require_column(n, path));
    std::vector<ModelParams> out;
    std::vector<double> flat(names.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            flat[i] = parse_double(t.rows[r][static_cast<std::size_t>(cols[i])], path, t.line_numbers[r]);
        ModelParams p = shape;
        unflatten(flat, p);
        out.push_back(std::move(p));
    }
    if (out.empty()) throw DataError(path.string() + ": chain file has no samples");
    return out;
}

std::string loss_to_csv(const LossDistribution& d, const std::map<std::string, std::string>& meta) {
    std::ostringstream os;
    os << "# unit=" << format_double(d.unit) << ",tail_mass=" << format_double(d.tail_mass) << ",n_max=" << d.n_max();
    for (const auto& [k, v] : meta) os << ',' << k << '=' << v;
    os << "\nn,probability\n";
    for (std::size_t n = 0; n < d.pmf.size(); ++n) os << n << ',' << format_double(d.pmf[n]) << '\n';
    return os.str();
}

LossDistribution load_loss_csv(const std::filesystem::path& path) {
    std::string text = read_file(path);
    LossDistribution d;
    std::istringstream in(text);
    std::string first;
    std::getline(in, first);
    if (first.rfind("# ", 0) == 0) {
        std::istringstream kv(first.substr(2));
        std::string item;
        while (std::getline(kv, item, ',')) {
            auto eq = item.find('=');
            if (eq == std::string::npos) continue;
            std::string k = item.substr(0, eq), v = item.substr(eq + 1);
            if (k == "unit") d.unit = parse_double(v, path, 1);
            if (k == "tail_mass") d.tail_mass = parse_double(v, path, 1);
        }
    }
    CsvTable t = read_csv(path);
    int cn = t.require_column("n", path), cp = t.require_column("probability", path);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto n = static_cast<std::size_t>(parse_int(t.rows[r][static_cast<std::size_t>(cn)], path, t.line_numbers[r]));
        if (n != d.pmf.size()) throw DataError(where(path, t.line_numbers[r]) + "loss grid must be consecutive from 0");
        d.pmf.push_back(parse_double(t.rows[r][static_cast<std::size_t>(cp)], path, t.line_numbers[r]));
    }
    return d;
}

DiscountCurve load_discount_curve(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    int ch = t.require_column("horizon", path), cd = t.require_column("discount_factor", path);
    std::map<std::int64_t, double> f;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        int line = t.line_numbers[r];
        auto h = parse_int(t.rows[r][static_cast<std::size_t>(ch)], path, line);
        double d = parse_double(t.rows[r][static_cast<std::size_t>(cd)], path, line);
        if (h < 0) throw DataError(where(path, line) + "negative horizon");
        if (!f.emplace(h, d).second) throw DataError(where(path, line) + "duplicate horizon");
    }
    f.emplace(0, 1.0);
    std::vector<double> v;
    for (const auto& [h, d] : f) {
        if (h != static_cast<std::int64_t>(v.size())) throw DataError(path.string() + ": discount horizons must be consecutive");
        v.push_back(d);
    }
    try {
        return DiscountCurve(std::move(v));
    } catch (const DomainError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

int age_index(const std::vector<int>& labels, int label) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    throw DataError("unknown age group " + std::to_string(label));
}

EcrpPortfolio load_portfolio(const std::filesystem::path& path, const ModelParams* theta, int n_factors, double year,
                             double unit) {
    if (!(unit > 0.0)) throw DomainError("loss unit must be positive");
    CsvTable t = read_csv(path);
    int ca = t.require_column("age_group", path), cg = t.require_column("gender", path);
    int cq = t.require_column("quantity", path);
    int cr = t.column("rate"), cc = t.column("count");
    std::vector<int> cw;
    for (int k = 0; k <= n_factors; ++k) cw.push_back(t.column("w" + std::to_string(k)));
    bool have_w = std::all_of(cw.begin(), cw.end(), [](int c) { return c >= 0; });
    if (!have_w && std::any_of(cw.begin(), cw.end(), [](int c) { return c >= 0; }))
        throw DataError(path.string() + ": weight columns w0..w" + std::to_string(n_factors) + " must all be present");
    if (t.column("w" + std::to_string(n_factors + 1)) >= 0)
        throw DataError(path.string() + ": more weight columns than factors");
    if ((cr < 0 || !have_w) && theta == nullptr && !(cr >= 0 && n_factors == 0))
        throw DataError(path.string() + ": rates and weights need a parameter file");

    EcrpPortfolio pf;
    pf.n_factors = n_factors;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        int line = t.line_numbers[r];
        auto cell = [&](int c) { return row[static_cast<std::size_t>(c)]; };
        Policyholder ph;
        int label = static_cast<int>(parse_int(cell(ca), path, line));
        Gender g;
        try {
            g = parse_gender(cell(cg));
        } catch (const DataError& e) {
            throw DataError(where(path, line) + e.what());
        }
        int a = -1;
        if (theta) {
            if (theta->age_labels.empty())
                a = label;
            else
                a = age_index(theta->age_labels, label);
            if (a < 0 || a >= theta->n_ages) throw DataError(where(path, line) + "age group outside the parameter grid");
        }
        ph.rate = cr >= 0 ? parse_double(cell(cr), path, line) : central_death_rate(*theta, a, g, year);
        if (have_w) {
            for (int c : cw) ph.weights.push_back(parse_double(cell(c), path, line));
        } else if (theta) {
            ph.weights = cause_weights(*theta, a, g, year);
        } else {
            ph.weights = {1.0};
        }
        double q = parse_double(cell(cq), path, line);
        if (!(q >= 0.0)) throw DataError(where(path, line) + "negative quantity");
        ph.severity = stochastic_round(q, unit);
        if (cc >= 0) {
            ph.multiplicity = parse_double(cell(cc), path, line);
            if (!(ph.multiplicity >= 0.0)) throw DataError(where(path, line) + "negative count");
        }
        pf.policyholders.push_back(std::move(ph));
    }
    try {
        pf.validate();
    } catch (const DomainError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return pf;
}

std::vector<LumpSumPolicy> load_policies(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    int ca = t.require_column("age", path), cg = t.require_column("gender", path);
    int cs = t.require_column("sum_insured", path), ct = t.require_column("term", path);
    std::vector<LumpSumPolicy> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        int line = t.line_numbers[r];
        LumpSumPolicy p;
        p.age = static_cast<int>(parse_int(row[static_cast<std::size_t>(ca)], path, line));
        try {
            p.gender = parse_gender(row[static_cast<std::size_t>(cg)]);
        } catch (const DataError& e) {
            throw DataError(where(path, line) + e.what());
        }
        p.sum_insured = parse_double(row[static_cast<std::size_t>(cs)], path, line);
        p.term = static_cast<int>(parse_int(row[static_cast<std::size_t>(ct)], path, line));
        if (p.age < 0 || p.term < 0 || !(p.sum_insured >= 0.0))
            throw DataError(where(path, line) + "age, term and sum insured must be non-negative");
        out.push_back(p);
    }
    return out;
}

std::string reports_to_csv(std::span<const TestReport> reports) {
    std::ostringstream os;
    os << "test,cells,statistic,critical,decision\n";
    for (const auto& r : reports) {
        os << r.test << ',' << r.cells << ',' << format_double(r.statistic) << ',';
        if (r.test == "cross_variance")
            os << format_double(r.critical) << ':' << format_double(r.critical_upper);
        else
            os << format_double(r.critical);
        os << ',' << (r.reject ? "reject" : "pass") << '\n';
    }
    return os.str();
}

}  // namespace ecrp::io
