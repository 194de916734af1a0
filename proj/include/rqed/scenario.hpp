#pragma once
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fock.hpp"
#include "freq.hpp"
#include "kernels.hpp"

namespace rqed {

using json = nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Hashing: FNV-1a over raw bytes, used for scenario, grid and mode-set fingerprints.

inline std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t h = 14695981039346656037ull)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) { return fnv1a(s.data(), s.size(), h); }
template <class T>
inline std::uint64_t fnv1a_value(const T& v, std::uint64_t h)
{
    return fnv1a(&v, sizeof v, h);
}

inline std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::uint64_t grid_hash(const TimeGrid& g, const SiteSet& s)
{
    std::uint64_t h = fnv1a_value(g.t0, 14695981039346656037ull);
    h = fnv1a_value(g.dt, h);
    h = fnv1a_value(g.n, h);
    for (double w : s.weights) h = fnv1a_value(w, h);
    return h;
}

inline std::uint64_t modeset_hash(const ModeSet& m)
{
    std::uint64_t h = fnv1a_value(static_cast<int>(m.band), 14695981039346656037ull);
    h = fnv1a_value(m.omega0, h);
    for (double w : m.omega) h = fnv1a_value(w, h);
    for (auto& row : m.u)
        for (cplx v : row) h = fnv1a_value(v, h);
    return h;
}

// ---------------------------------------------------------------------------------------------
// Scenario model.

struct Tolerances {
    double kernel = 1e-10;
    double wick = 1e-11;
    double round_trip = 1e-12;
    double form = 1e-10;
    double dressing = 1e-10;
    double moments = 1e-3;
    double rwa_slope = 0.2;
    double rwa_exact = 1e-12;

    void scale(double f)
    {
        for (double* t : {&kernel, &wick, &round_trip, &form, &dressing, &moments, &rwa_exact}) *t *= f;
    }
};

struct Budgets {
    long cutoff = 3;      // photon cutoff for oracle runs
    long fock_dim = 4096; // total oracle Hilbert-space dimension
    long degree = 4;      // functional-expansion degree
    long order = 2;       // diagram order
    long wick_factors = 6;
    long grid_points = 32; // dressing point-set size

    static const std::map<std::string, long>& caps()
    {
        static const std::map<std::string, long> c{{"cutoff", 12},      {"fock_dim", 65536}, {"degree", 4},
                                                    {"order", 3},        {"wick_factors", 8}, {"grid_points", 32}};
        return c;
    }
    long& field(const std::string& key)
    {
        if (key == "cutoff") return cutoff;
        if (key == "fock_dim") return fock_dim;
        if (key == "degree") return degree;
        if (key == "order") return order;
        if (key == "wick_factors") return wick_factors;
        if (key == "grid_points") return grid_points;
        throw config_error("unknown budget: " + key);
    }
    void set(const std::string& key, long v)
    {
        long& slot = field(key);
        const long cap = caps().at(key);
        if (v < 0 || v > cap) throw config_error("budget " + key + " = " + std::to_string(v) + " exceeds hard cap " + std::to_string(cap));
        slot = v;
    }
    json to_json() const
    {
        return {{"cutoff", cutoff}, {"fock_dim", fock_dim},         {"degree", degree},
                {"order", order},   {"wick_factors", wick_factors}, {"grid_points", grid_points}};
    }
};

struct DressSpec {
    int window_begin = 0;
    int window_count = 4;
    std::string bare = "device"; // "device" or "synthetic"
    std::vector<std::pair<int, int>> blocks{{1, 1}};
};

struct MomentsSpec {
    double window = 0.0; // compared interval [0, window); 0 means half the period
};

struct RwaSpec {
    std::vector<double> bandwidths{0.2, 0.1, 0.05, 0.02};
    double omega0 = 1.0;
    int periods = 8;
    bool extras = false;
};

struct OutputSpec {
    std::string format = "auto"; // text, binary or auto
    size_t binary_threshold = 4096;
};

struct Scenario {
    json raw;
    std::filesystem::path base_dir;
    TimeGrid grid;
    SiteSet sites;
    std::optional<ModeSet> broad, narrow;
    DeviceModel device;
    Sources sources;
    Tolerances tol;
    Budgets budgets;
    double hbar = 1.0;
    std::uint64_t seed = 1;
    DressSpec dress;
    MomentsSpec moments;
    RwaSpec rwa;
    OutputSpec output;
    std::vector<std::string> warnings;

    std::uint64_t hash() const { return fnv1a(raw.dump()); }
};

namespace detail {

inline const json& need(const json& j, const std::string& key, const std::string& path)
{
    if (!j.is_object() || !j.contains(key)) throw config_error("missing field: " + path + key);
    return j.at(key);
}

template <class T>
inline T get_as(const json& v, const std::string& name)
{
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw config_error("field " + name + " has the wrong type");
    }
}

template <class T>
inline T need_as(const json& j, const std::string& key, const std::string& path)
{
    return get_as<T>(need(j, key, path), path + key);
}

template <class T>
inline T opt_as(const json& j, const std::string& key, const std::string& path, T fallback)
{
    return j.is_object() && j.contains(key) ? get_as<T>(j.at(key), path + key) : fallback;
}

// A complex number is written as a plain number or as [re, im].
inline cplx to_cplx(const json& v, const std::string& name)
{
    if (v.is_number()) return v.get<double>();
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
    throw config_error("field " + name + " must be a number or [re, im]");
}

inline ModeSet parse_modes(const json& j, Band band, const std::string& path, int sites)
{
    ModeSet m;
    m.band = band;
    m.omega = need_as<std::vector<double>>(j, "omega", path);
    if (band == Band::narrow) m.omega0 = need_as<double>(j, "omega0", path);
    if (j.contains("u")) {
        const json& u = j.at("u");
        if (!u.is_array()) throw config_error("field " + path + "u must be an array of per-mode site lists");
        for (size_t k = 0; k < u.size(); ++k) {
            const json& row = u[k];
            if (!row.is_array()) throw config_error("field " + path + "u must be an array of per-mode site lists");
            cvec r;
            for (size_t x = 0; x < row.size(); ++x) r.push_back(to_cplx(row[x], path + "u"));
            m.u.push_back(r);
        }
    } else {
        m.u.assign(m.omega.size(), cvec(sites, 1.0));
    }
    return m;
}

inline Signal read_table(const std::filesystem::path& file, const TimeGrid& g, const SiteSet& s)
{
    std::ifstream in(file);
    if (!in) throw config_error("referenced file does not exist: " + file.string());
    Signal f(g, s);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int x = 0, k = 0;
        double re = 0.0, im = 0.0;
        if (!(ls >> x >> k >> re >> im) || x < 0 || x >= s.size() || k < 0 || k >= g.n)
            throw config_error(file.string() + ":" + std::to_string(lineno) + ": expected 'site sample re im' on the grid");
        f(x, k) = {re, im};
    }
    return f;
}

// Adds one analytic or tabulated primitive to a source signal.
inline void add_primitive(Signal& f, const json& p, const std::string& path, const std::filesystem::path& base)
{
    const std::string kind = need_as<std::string>(p, "kind", path);
    const TimeGrid& g = f.grid;
    const int site = opt_as<int>(p, "site", path, -1);
    if (site >= f.m()) throw config_error("field " + path + "site is out of range");
    const cplx amp = p.contains("amplitude") ? to_cplx(p.at("amplitude"), path + "amplitude") : cplx(1.0);
    auto each_site = [&](auto&& fn) {
        for (int x = 0; x < f.m(); ++x)
            if (site < 0 || x == site)
                for (int k = 0; k < g.n; ++k) f(x, k) += fn(g.time(k));
    };
    if (kind == "spike") {
        const int k = need_as<int>(p, "sample", path);
        if (k < 0 || k >= g.n) throw config_error("field " + path + "sample is off the grid");
        for (int x = 0; x < f.m(); ++x)
            if (site < 0 || x == site) f(x, k) += amp;
    } else if (kind == "tone") {
        const double w = need_as<double>(p, "omega", path);
        const double ph = opt_as<double>(p, "phase", path, 0.0);
        const bool complex_tone = opt_as<bool>(p, "complex", path, false);
        each_site([&](double t) { return complex_tone ? amp * std::exp(I * (w * t + ph)) : amp * std::cos(w * t + ph); });
    } else if (kind == "packet") {
        const double w = opt_as<double>(p, "omega", path, 0.0);
        const double c = need_as<double>(p, "center", path);
        const double s = need_as<double>(p, "width", path);
        if (!(s > 0.0)) throw config_error("field " + path + "width must be positive");
        each_site([&](double t) { return amp * std::exp(-0.5 * std::pow((t - c) / s, 2)) * std::cos(w * t); });
    } else if (kind == "table") {
        const std::filesystem::path file = base / need_as<std::string>(p, "file", path);
        const Signal t = read_table(file, g, f.sites);
        for (size_t i = 0; i < f.values.size(); ++i) f.values[i] += amp * t.values[i];
    } else {
        throw config_error("field " + path + "kind must be spike, tone, packet or table");
    }
}

inline DeviceModel parse_device(const json& j, int sites)
{
    const std::string path = "device.";
    DeviceModel d;
    const std::string kind = need_as<std::string>(j, "kind", path);
    if (kind == "none") return d;
    if (kind == "two_level") d.kind = DeviceKind::two_level;
    else if (kind == "oscillator") d.kind = DeviceKind::oscillator;
    else throw config_error("field device.kind must be none, two_level or oscillator");
    d.omega = need_as<double>(j, "omega", path);
    if (!(d.omega > 0.0)) throw config_error("field device.omega must be positive");
    d.cutoff = opt_as<int>(j, "cutoff", path, 4);
    if (j.contains("current")) d.current = get_as<std::vector<double>>(j.at("current"), "device.current");
    if (j.contains("dipole"))
        for (auto& v : j.at("dipole")) d.dipole.push_back(to_cplx(v, "device.dipole"));
    if (!d.current.empty() && static_cast<int>(d.current.size()) != sites)
        throw config_error("field device.current needs one entry per site");
    if (!d.dipole.empty() && static_cast<int>(d.dipole.size()) != sites)
        throw config_error("field device.dipole needs one entry per site");
    if (j.contains("initial")) {
        // diagonal occupation probabilities of the device levels
        const auto p = get_as<std::vector<double>>(j.at("initial"), "device.initial");
        if (static_cast<int>(p.size()) != d.dim()) throw config_error("field device.initial needs one entry per device level");
        d.rho = Mat::Zero(d.dim(), d.dim());
        for (int i = 0; i < d.dim(); ++i) d.rho(i, i) = p[i];
    }
    return d;
}

} // namespace detail

// Parses and validates a scenario. Missing required fields are named in the error as "missing field: a.b".
inline Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir = ".",
                               const std::vector<std::pair<std::string, long>>& budget_overrides = {})
{
    using namespace detail;
    if (!j.is_object()) throw config_error("scenario must be a JSON object");
    Scenario sc;
    sc.raw = j;
    sc.base_dir = base_dir;

    const json& gj = need(j, "grid", "");
    const int n = need_as<int>(gj, "n", "grid.");
    const double period = need_as<double>(gj, "period", "grid.");
    if (n < 2 || !(period > 0.0)) throw config_error("field grid needs n >= 2 and period > 0");
    sc.grid = TimeGrid::periodic(period, n, opt_as<double>(gj, "t0", "grid.", 0.0));

    if (j.contains("sites")) {
        const json& sj = j.at("sites");
        if (sj.is_number_integer()) {
            const int m = sj.get<int>();
            if (m < 1) throw config_error("field sites must be at least 1");
            sc.sites = SiteSet::uniform(m);
        } else {
            const auto w = need_as<std::vector<double>>(sj, "weights", "sites.");
            std::vector<std::string> labels;
            if (sj.contains("labels")) labels = get_as<std::vector<std::string>>(sj.at("labels"), "sites.labels");
            else
                for (size_t i = 0; i < w.size(); ++i) labels.push_back("x" + std::to_string(i));
            sc.sites = SiteSet(labels, w);
        }
    }

    sc.hbar = opt_as<double>(j, "hbar", "", 1.0);
    if (!(sc.hbar > 0.0)) throw config_error("field hbar must be positive");
    sc.seed = opt_as<std::uint64_t>(j, "seed", "", 1);

    const json& mj = need(j, "modes", "");
    if (mj.contains("broad")) sc.broad = parse_modes(mj.at("broad"), Band::broad, "modes.broad.", sc.sites.size());
    if (mj.contains("narrow")) sc.narrow = parse_modes(mj.at("narrow"), Band::narrow, "modes.narrow.", sc.sites.size());
    if (!sc.broad && !sc.narrow) throw config_error("missing field: modes.broad or modes.narrow");
    for (auto* m : {&sc.broad, &sc.narrow})
        if (*m) (*m)->validate(sc.sites);

    if (j.contains("device")) sc.device = parse_device(j.at("device"), sc.sites.size());

    if (j.contains("sources")) {
        const json& src = j.at("sources");
        for (auto [name, slot] : {std::pair<const char*, std::optional<Signal>*>{"J_e", &sc.sources.J_e},
                                  {"A_e", &sc.sources.A_e},
                                  {"D_e", &sc.sources.D_e},
                                  {"E_e", &sc.sources.E_e}}) {
            if (!src.contains(name)) continue;
            const json& list = src.at(name);
            if (!list.is_array()) throw config_error(std::string("field sources.") + name + " must be a list of primitives");
            Signal f(sc.grid, sc.sites);
            for (size_t i = 0; i < list.size(); ++i)
                add_primitive(f, list[i], std::string("sources.") + name + "[" + std::to_string(i) + "].", base_dir);
            *slot = f;
        }
    }

    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        const std::string p = "tolerances.";
        sc.tol.kernel = opt_as(t, "kernel", p, sc.tol.kernel);
        sc.tol.wick = opt_as(t, "wick", p, sc.tol.wick);
        sc.tol.round_trip = opt_as(t, "round_trip", p, sc.tol.round_trip);
        sc.tol.form = opt_as(t, "form", p, sc.tol.form);
        sc.tol.dressing = opt_as(t, "dressing", p, sc.tol.dressing);
        sc.tol.moments = opt_as(t, "moments", p, sc.tol.moments);
        sc.tol.rwa_slope = opt_as(t, "rwa_slope", p, sc.tol.rwa_slope);
        sc.tol.rwa_exact = opt_as(t, "rwa_exact", p, sc.tol.rwa_exact);
    }

    if (j.contains("budgets"))
        for (auto& [key, v] : j.at("budgets").items()) sc.budgets.set(key, get_as<long>(v, "budgets." + key));
    for (auto& [key, v] : budget_overrides) sc.budgets.set(key, v);

    if (j.contains("dress")) {
        const json& d = j.at("dress");
        const std::string p = "dress.";
        sc.dress.window_begin = opt_as(d, "window_begin", p, sc.dress.window_begin);
        sc.dress.window_count = opt_as(d, "window_count", p, sc.dress.window_count);
        sc.dress.bare = opt_as(d, "bare", p, sc.dress.bare);
        if (sc.dress.bare != "device" && sc.dress.bare != "synthetic") throw config_error("field dress.bare must be device or synthetic");
        if (d.contains("blocks")) sc.dress.blocks = get_as<std::vector<std::pair<int, int>>>(d.at("blocks"), "dress.blocks");
    }
    if (j.contains("moments")) sc.moments.window = opt_as(j.at("moments"), "window", "moments.", 0.0);
    if (j.contains("rwa")) {
        const json& r = j.at("rwa");
        const std::string p = "rwa.";
        sc.rwa.bandwidths = opt_as(r, "bandwidths", p, sc.rwa.bandwidths);
        sc.rwa.omega0 = opt_as(r, "omega0", p, sc.rwa.omega0);
        sc.rwa.periods = opt_as(r, "periods", p, sc.rwa.periods);
        sc.rwa.extras = opt_as(r, "extras", p, sc.rwa.extras);
        if (sc.rwa.bandwidths.size() < 2) throw config_error("field rwa.bandwidths needs at least two entries");
        for (double b : sc.rwa.bandwidths)
            if (!(b > 0.0 && b < 1.0)) throw config_error("field rwa.bandwidths entries must lie in (0, 1)");
        if (!(sc.rwa.omega0 > 0.0) || sc.rwa.periods < 1) throw config_error("field rwa needs omega0 > 0 and periods >= 1");
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        sc.output.format = opt_as(o, "format", "output.", sc.output.format);
        sc.output.binary_threshold = opt_as(o, "binary_threshold", "output.", sc.output.binary_threshold);
        if (sc.output.format != "text" && sc.output.format != "binary" && sc.output.format != "auto")
            throw config_error("field output.format must be text, binary or auto");
    }

    // Budget checks against the configured limits.
    if (sc.device.kind == DeviceKind::oscillator && sc.device.cutoff > sc.budgets.cutoff)
        throw config_error("budget violation: device cutoff exceeds budgets.cutoff");
    if (sc.budgets.wick_factors % 2 != 0) throw config_error("budget violation: budgets.wick_factors must be even");
    if (sc.budgets.order > sc.budgets.degree) throw config_error("budget violation: budgets.order exceeds budgets.degree");
    if (static_cast<long>(sc.dress.window_count) * sc.sites.size() > sc.budgets.grid_points)
        throw config_error("budget violation: dressing point set exceeds budgets.grid_points");
    if (sc.dress.window_begin < 0 || sc.dress.window_count < 1 || sc.dress.window_begin + sc.dress.window_count > sc.grid.n)
        throw config_error("field dress window lies outside the grid");

    // Warnings: non-commensurate modes leak in the discrete frequency split.
    for (auto* m : {&sc.broad, &sc.narrow})
        if (*m && !(*m)->commensurate(sc.grid)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s modes are not commensurate with the grid period (defect %.3g); identity tolerances should be 1e-6",
                          to_string((*m)->band), (*m)->commensurability_defect(sc.grid));
            sc.warnings.push_back(buf);
        }
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& file, const std::vector<std::pair<std::string, long>>& budget_overrides = {})
{
    std::ifstream in(file);
    if (!in) throw config_error("cannot open scenario " + file.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw config_error("scenario " + file.string() + " is not valid JSON: " + e.what());
    }
    return parse_scenario(j, file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path(), budget_overrides);
}

} // namespace rqed
