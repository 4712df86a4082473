#include "techdiff/io.hpp"

#include "techdiff/errors.hpp"
#include "techdiff/spectral.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

namespace techdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
            field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
            field.remove_suffix(1);
        out.emplace_back(field);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write " + path.string());
    return out;
}

std::unordered_map<long, std::size_t> firm_index(const FirmTable& firms) {
    std::unordered_map<long, std::size_t> index;
    for (std::size_t i = 0; i < firms.size(); ++i)
        index.emplace(firms.ids[i], i);
    return index;
}

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw IngestError(path + ": missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

void CsvTable::fail(std::size_t row, const std::string& message) const {
    throw IngestError(path + ":" + std::to_string(lines[row]) + ": " + message);
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const auto& s = rows[row][col];
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
        fail(row, "column '" + header[col] + "' is not a finite number: '" + s + "'");
    return v;
}

long CsvTable::integer(std::size_t row, std::size_t col) const {
    const auto& s = rows[row][col];
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail(row, "column '" + header[col] + "' is not an integer: '" + s + "'");
    return v;
}

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& required) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestError(path.string() + ": cannot open");
    CsvTable t;
    t.path = path.string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
            line.erase(0, 3);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        auto fields = split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw IngestError(t.path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (t.header.empty())
        throw IngestError(t.path + ": no header row");
    for (const auto& name : required)
        t.column(name);
    return t;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    auto out = open_out(path);
    out << "#schema=" << kSchema << '\n';
    auto emit = [&](const std::vector<std::string>& fields) {
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (fields[c].find(',') != std::string::npos)
                throw InputError("field '" + fields[c] + "' for " + path.string() + " contains a comma");
            out << (c ? "," : "") << fields[c];
        }
        out << '\n';
    };
    emit(header);
    for (const auto& r : rows)
        emit(r);
}

void write_json(const fs::path& path, json doc) {
    if (doc.is_object())
        doc["schema"] = std::string(kSchema);
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(path.string() + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

FirmTable read_firms(const fs::path& path) {
    const auto t = read_csv(path, {"firm_id", "latitude", "longitude"});
    const auto c_id = t.column("firm_id"), c_lat = t.column("latitude"), c_lon = t.column("longitude");
    FirmTable firms;
    std::set<long> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long id = t.integer(r, c_id);
        if (!seen.insert(id).second)
            t.fail(r, "duplicate firm_id " + std::to_string(id));
        const GeoPoint p{t.number(r, c_lat), t.number(r, c_lon)};
        try {
            validate(p);
        } catch (const Error& e) {
            t.fail(r, e.what());
        }
        firms.ids.push_back(id);
        firms.coords.push_back(p);
    }
    if (firms.size() == 0)
        throw IngestError(t.path + ": no firms");
    return firms;
}

AdoptionPanel read_panel(const fs::path& path, const FirmTable& firms) {
    const auto t = read_csv(path, {"firm_id", "year", "tech", "adopted"});
    const auto c_id = t.column("firm_id"), c_year = t.column("year"), c_tech = t.column("tech"),
               c_adopted = t.column("adopted");
    if (t.rows.empty())
        throw IngestError(t.path + ": no rows");
    const auto index = firm_index(firms);
    std::vector<std::string> techs;
    int first = 0, last = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& name = t.rows[r][c_tech];
        if (name.empty())
            t.fail(r, "empty tech name");
        if (std::find(techs.begin(), techs.end(), name) == techs.end())
            techs.push_back(name);
        const int year = static_cast<int>(t.integer(r, c_year));
        first = r == 0 ? year : std::min(first, year);
        last = r == 0 ? year : std::max(last, year);
    }
    AdoptionPanel panel(firms.size(), first, last, techs);
    std::vector<std::uint8_t> seen(firms.size() * techs.size() * static_cast<std::size_t>(last - first + 1), 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto it = index.find(t.integer(r, c_id));
        if (it == index.end())
            t.fail(r, "firm_id " + t.rows[r][c_id] + " is not in the firm table");
        const auto k = panel.tech_index(t.rows[r][c_tech]);
        const int year = static_cast<int>(t.integer(r, c_year));
        const long a = t.integer(r, c_adopted);
        if (a != 0 && a != 1)
            t.fail(r, "adopted must be 0 or 1");
        auto& flag = seen[(k * static_cast<std::size_t>(last - first + 1) + static_cast<std::size_t>(year - first)) *
                              firms.size() +
                          it->second];
        if (flag)
            t.fail(r, "duplicate row for firm " + t.rows[r][c_id] + ", year " + std::to_string(year) + ", tech " +
                          t.rows[r][c_tech]);
        flag = 1;
        panel.set(k, year, it->second, a == 1);
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw IngestError(t.path + ": panel is incomplete; every firm needs a row for every year and tech");
    try {
        panel.check_cumulative();
    } catch (const InputError& e) {
        throw IngestError(t.path + ": " + e.what());
    }
    return panel;
}

std::vector<YearNetwork> read_edges(const fs::path& path, const FirmTable& firms, int first_year, int last_year) {
    const auto t = read_csv(path, {"year", "firm_i", "firm_j", "weight_musd"});
    const auto c_year = t.column("year"), c_i = t.column("firm_i"), c_j = t.column("firm_j"),
               c_w = t.column("weight_musd");
    if (t.rows.empty())
        throw IngestError(t.path + ": no edges");
    const auto index = firm_index(firms);
    std::vector<YearNetwork> nets;
    for (int y = first_year; y <= last_year; ++y)
        nets.push_back({y, firms.size(), {}});
    std::set<std::tuple<int, std::size_t, std::size_t>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const int year = static_cast<int>(t.integer(r, c_year));
        if (year < first_year || year > last_year)
            t.fail(r, "year " + std::to_string(year) + " is outside the panel years");
        const auto a = index.find(t.integer(r, c_i));
        const auto b = index.find(t.integer(r, c_j));
        if (a == index.end() || b == index.end())
            t.fail(r, "edge endpoint is not in the firm table");
        if (a->second == b->second)
            t.fail(r, "self-loop on firm " + t.rows[r][c_i]);
        const double w = t.number(r, c_w);
        if (!(w > 0.0))
            t.fail(r, "weight_musd must be positive");
        const auto i = std::min(a->second, b->second), j = std::max(a->second, b->second);
        if (!seen.insert({year, i, j}).second)
            t.fail(r, "duplicate edge " + t.rows[r][c_i] + "-" + t.rows[r][c_j] + " in " + std::to_string(year));
        nets[static_cast<std::size_t>(year - first_year)].edges.push_back({i, j, w});
    }
    for (auto& net : nets) {
        if (net.edges.empty())
            throw IngestError(t.path + ": no edges for year " + std::to_string(net.year));
        std::sort(net.edges.begin(), net.edges.end(),
                  [](const Edge& x, const Edge& y) { return x.i != y.i ? x.i < y.i : x.j < y.j; });
        try {
            validate(net);
        } catch (const Error& e) {
            throw IngestError(t.path + ": year " + std::to_string(net.year) + ": " + e.what());
        }
    }
    return nets;
}

TreatedSet read_treated(const fs::path& path, const FirmTable& firms) {
    const auto t = read_csv(path, {"firm_id", "treated"});
    const auto c_id = t.column("firm_id"), c_t = t.column("treated");
    const bool has_seed = std::find(t.header.begin(), t.header.end(), "shock_seed") != t.header.end();
    const auto index = firm_index(firms);
    TreatedSet set;
    set.treated.assign(firms.size(), 0);
    set.shock_seed.assign(firms.size(), 0);
    std::vector<std::uint8_t> seen(firms.size(), 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto it = index.find(t.integer(r, c_id));
        if (it == index.end())
            t.fail(r, "firm_id " + t.rows[r][c_id] + " is not in the firm table");
        if (seen[it->second]++)
            t.fail(r, "duplicate firm_id " + t.rows[r][c_id]);
        const long v = t.integer(r, c_t);
        if (v != 0 && v != 1)
            t.fail(r, "treated must be 0 or 1");
        set.treated[it->second] = static_cast<std::uint8_t>(v);
        if (has_seed) {
            const long s = t.integer(r, t.column("shock_seed"));
            if (s != 0 && s != 1)
                t.fail(r, "shock_seed must be 0 or 1");
            set.shock_seed[it->second] = static_cast<std::uint8_t>(s);
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw IngestError(t.path + ": every firm needs a treated row");
    return set;
}

void write_firms(const fs::path& path, const FirmTable& firms) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < firms.size(); ++i)
        rows.push_back({std::to_string(firms.ids[i]), format_double(firms.coords[i].latitude),
                        format_double(firms.coords[i].longitude)});
    write_csv(path, {"firm_id", "latitude", "longitude"}, rows);
}

void write_panel(const fs::path& path, const AdoptionPanel& panel, const FirmTable& firms) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(panel.n_techs() * static_cast<std::size_t>(panel.n_years()) * panel.n_firms());
    for (std::size_t k = 0; k < panel.n_techs(); ++k)
        for (int y = panel.first_year(); y <= panel.last_year(); ++y) {
            const auto row = panel.row(k, y);
            for (std::size_t i = 0; i < panel.n_firms(); ++i)
                rows.push_back({std::to_string(firms.ids[i]), std::to_string(y), panel.techs()[k],
                                row[i] ? "1" : "0"});
        }
    write_csv(path, {"firm_id", "year", "tech", "adopted"}, rows);
}

void write_edges(const fs::path& path, const std::vector<YearNetwork>& networks, const FirmTable& firms) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& net : networks)
        for (const auto& e : net.edges)
            rows.push_back({std::to_string(net.year), std::to_string(firms.ids[e.i]), std::to_string(firms.ids[e.j]),
                            format_double(e.weight)});
    write_csv(path, {"year", "firm_i", "firm_j", "weight_musd"}, rows);
}

void write_treated(const fs::path& path, const TreatedSet& set, const FirmTable& firms) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < firms.size(); ++i)
        rows.push_back({std::to_string(firms.ids[i]), set.treated[i] ? "1" : "0", set.shock_seed[i] ? "1" : "0"});
    write_csv(path, {"firm_id", "treated", "shock_seed"}, rows);
}

Dataset read_dataset(const fs::path& dir) {
    Dataset d;
    d.firms = read_firms(dir / "firms.csv");
    d.panel = read_panel(dir / "panel.csv", d.firms);
    d.networks = read_edges(dir / "edges.csv", d.firms, d.panel.first_year(), d.panel.last_year());
    if (fs::exists(dir / "treated.csv"))
        d.shock = read_treated(dir / "treated.csv", d.firms);
    return d;
}

Dataset to_dataset(const SyntheticDataset& ds) {
    Dataset d;
    d.firms = ds.firms;
    d.panel = ds.panel;
    d.networks = ds.networks;
    if (ds.config.shock.enabled)
        d.shock = {ds.treated, ds.shock_seed};
    return d;
}

json generation_log_json(const SyntheticDataset& ds) {
    json lam = json::object();
    for (std::size_t k = 0; k < ds.panel.n_techs(); ++k)
        lam[ds.panel.techs()[k]] = ds.log.lambda2[k];
    json shock = ds.config.shock;
    std::vector<long> treated, seed;
    for (std::size_t i = 0; i < ds.firms.size(); ++i) {
        if (!ds.treated.empty() && ds.treated[i])
            treated.push_back(ds.firms.ids[i]);
        if (!ds.shock_seed.empty() && ds.shock_seed[i])
            seed.push_back(ds.firms.ids[i]);
    }
    shock["rng_seed"] = ds.config.seed;
    shock["seed_firms"] = seed;
    shock["treated_firms"] = treated;
    shock["pretrend_imbalance"] = ds.log.shock_imbalance;
    return {
        {"config", ds.config},
        {"years", ds.log.years},
        {"lambda2", lam},
        {"weight_rescale", ds.log.weight_rescale},
        {"density", ds.log.density},
        {"mean_degree", ds.log.mean_degree},
        {"mean_weight", ds.log.mean_weight},
        {"network_retries", ds.log.network_retries},
        {"shock", shock},
    };
}

std::vector<std::string> write_dataset(const fs::path& dir, const SyntheticDataset& ds) {
    fs::create_directories(dir);
    write_firms(dir / "firms.csv", ds.firms);
    write_panel(dir / "panel.csv", ds.panel, ds.firms);
    write_edges(dir / "edges.csv", ds.networks, ds.firms);
    std::vector<std::string> names{"firms.csv", "panel.csv", "edges.csv"};
    if (ds.config.shock.enabled) {
        write_treated(dir / "treated.csv", {ds.treated, ds.shock_seed}, ds.firms);
        names.push_back("treated.csv");
    }
    write_json(dir / "generation_log.json", generation_log_json(ds));
    names.push_back("generation_log.json");
    return names;
}

void to_json(json& j, const TechSpec& t) {
    j = {{"name", t.name}, {"intro_year", t.intro_year}, {"seed_fraction", t.seed_fraction},
         {"forcing_scale", t.forcing_scale}};
}

void from_json(const json& j, TechSpec& t) {
    ConfigFields f(j, "technology");
    f.get("name", t.name);
    f.get("intro_year", t.intro_year);
    f.get("seed_fraction", t.seed_fraction);
    f.get("forcing_scale", t.forcing_scale);
    f.finish();
}

void to_json(json& j, const ShockSpec& s) {
    j = {{"enabled", s.enabled},
         {"year", s.year},
         {"forcing_boost", s.forcing_boost},
         {"impulse", s.impulse},
         {"consolidation", s.consolidation},
         {"consolidation_from", s.consolidation_from},
         {"consolidation_to", s.consolidation_to},
         {"seed_cluster_share", s.seed_cluster_share},
         {"balance", s.balance},
         {"treated_epsilon", s.treated_epsilon}};
}

void from_json(const json& j, ShockSpec& s) {
    ConfigFields f(j, "shock");
    f.get("enabled", s.enabled);
    f.get("year", s.year);
    f.get("forcing_boost", s.forcing_boost);
    f.get("impulse", s.impulse);
    f.get("consolidation", s.consolidation);
    f.get("consolidation_from", s.consolidation_from);
    f.get("consolidation_to", s.consolidation_to);
    f.get("seed_cluster_share", s.seed_cluster_share);
    f.get("balance", s.balance);
    f.get("treated_epsilon", s.treated_epsilon);
    f.finish();
}

void to_json(json& j, const MultiplierScheme& m) {
    j = {{"both_adopted", m.both_adopted}, {"one_adopted", m.one_adopted}, {"neither", m.neither}};
}

void from_json(const json& j, MultiplierScheme& m) {
    ConfigFields f(j, "multiplier");
    f.get("both_adopted", m.both_adopted);
    f.get("one_adopted", m.one_adopted);
    f.get("neither", m.neither);
    f.finish();
}

void to_json(json& j, const SimConfig& c) {
    j = {{"n_firms", c.n_firms},
         {"first_year", c.first_year},
         {"last_year", c.last_year},
         {"technologies", c.technologies},
         {"nu", c.nu},
         {"kappa", c.kappa},
         {"network_coupling", c.network_coupling},
         {"dt", c.dt},
         {"forcing", c.forcing},
         {"shock", c.shock},
         {"target_density", c.target_density},
         {"target_degree", c.target_degree},
         {"multiplier", c.multiplier},
         {"seed", c.seed},
         {"n_clusters", c.n_clusters},
         {"cluster_sigma_km", c.cluster_sigma_km},
         {"lat_min", c.lat_min},
         {"lat_max", c.lat_max},
         {"lon_min", c.lon_min},
         {"lon_max", c.lon_max},
         {"spatial_epsilon", c.spatial_epsilon},
         {"edge_persistence", c.edge_persistence},
         {"weight_mean", c.weight_mean},
         {"weight_cv", c.weight_cv},
         {"degree_shape", c.degree_shape},
         {"min_degree", c.min_degree},
         {"churn_candidates", c.churn_candidates},
         {"stratum_km", c.stratum_km},
         {"max_retries", c.max_retries}};
}

void from_json(const json& j, SimConfig& c) {
    ConfigFields f(j, "simulation");
    f.get("n_firms", c.n_firms);
    f.get("first_year", c.first_year);
    f.get("last_year", c.last_year);
    f.get("technologies", c.technologies);
    f.get("nu", c.nu);
    f.get("kappa", c.kappa);
    f.get("network_coupling", c.network_coupling);
    f.get("dt", c.dt);
    f.get("forcing", c.forcing);
    f.get("shock", c.shock);
    f.get("target_density", c.target_density);
    f.get("target_degree", c.target_degree);
    f.get("multiplier", c.multiplier);
    f.get("seed", c.seed);
    f.get("n_clusters", c.n_clusters);
    f.get("cluster_sigma_km", c.cluster_sigma_km);
    f.get("lat_min", c.lat_min);
    f.get("lat_max", c.lat_max);
    f.get("lon_min", c.lon_min);
    f.get("lon_max", c.lon_max);
    f.get("spatial_epsilon", c.spatial_epsilon);
    f.get("edge_persistence", c.edge_persistence);
    f.get("weight_mean", c.weight_mean);
    f.get("weight_cv", c.weight_cv);
    f.get("degree_shape", c.degree_shape);
    f.get("min_degree", c.min_degree);
    f.get("churn_candidates", c.churn_candidates);
    f.get("stratum_km", c.stratum_km);
    f.get("max_retries", c.max_retries);
    f.finish();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

std::map<std::string, std::string> digest_files(const fs::path& dir, const std::vector<std::string>& names) {
    std::map<std::string, std::string> out;
    for (const auto& name : names)
        out[name] = sha256_file(dir / name);
    return out;
}

}  // namespace techdiff
