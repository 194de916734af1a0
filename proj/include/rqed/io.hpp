#pragma once
#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace rqed {

// Artifact files carry one JSON header line followed by a text or binary payload.
// Text payloads print doubles with 17 significant digits, so both encodings reload bit-exactly.

enum class Encoding { text, binary };

inline const char* to_string(Encoding e) { return e == Encoding::text ? "text" : "binary"; }

inline Encoding choose_encoding(const OutputSpec& o, size_t entries)
{
    if (o.format == "text") return Encoding::text;
    if (o.format == "binary") return Encoding::binary;
    return entries > o.binary_threshold ? Encoding::binary : Encoding::text;
}

namespace detail {

inline json grid_json(const TimeGrid& g, const SiteSet& s)
{
    return {{"t0", g.t0}, {"dt", g.dt}, {"n", g.n}, {"labels", s.labels}, {"weights", s.weights}, {"hash", hex64(grid_hash(g, s))}};
}

inline std::pair<TimeGrid, SiteSet> grid_from_json(const json& j)
{
    const TimeGrid g(j.at("t0").get<double>(), j.at("dt").get<double>(), j.at("n").get<int>());
    const SiteSet s(j.at("labels").get<std::vector<std::string>>(), j.at("weights").get<std::vector<double>>());
    if (j.at("hash").get<std::string>() != hex64(grid_hash(g, s))) throw config_error("grid hash mismatch in artifact header");
    return {g, s};
}

inline std::ofstream open_out(const std::filesystem::path& file)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) throw config_error("cannot write " + file.string());
    return out;
}

inline std::pair<json, std::ifstream> open_in(const std::filesystem::path& file, const std::string& format)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw config_error("cannot open " + file.string());
    std::string line;
    std::getline(in, line);
    json h;
    try {
        h = json::parse(line);
    } catch (const json::parse_error&) {
        throw config_error(file.string() + ": missing artifact header");
    }
    if (h.value("format", "") != format) throw config_error(file.string() + ": not a " + format + " file");
    return {h, std::move(in)};
}

inline void put_text(std::ostream& os, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

inline double get_text(std::istream& is, const std::filesystem::path& file)
{
    std::string tok;
    if (!(is >> tok)) throw config_error(file.string() + ": truncated payload");
    return std::strtod(tok.c_str(), nullptr);
}

inline void put_binary(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

inline double get_binary(std::istream& is, const std::filesystem::path& file)
{
    double v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw config_error(file.string() + ": truncated payload");
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------------------------
// Kernel files: records (x, x', lag, re, im) for every site pair and lag sample.

inline void write_kernel(const std::filesystem::path& file, const StationaryKernel& K, const std::string& kind, const ModeSet& modes,
                         Encoding enc)
{
    auto out = detail::open_out(file);
    const json h{{"format", "rqed-kernel"},
                 {"kind", kind},
                 {"band", to_string(modes.band)},
                 {"omega0", modes.omega0},
                 {"modeset", hex64(modeset_hash(modes))},
                 {"grid", detail::grid_json(K.grid, K.sites)},
                 {"encoding", to_string(enc)},
                 {"records", K.values.size()}};
    out << h.dump() << '\n';
    for (int x = 0; x < K.m(); ++x)
        for (int xp = 0; xp < K.m(); ++xp)
            for (int k = 0; k < K.n(); ++k) {
                const cplx v = K(x, xp, k);
                if (enc == Encoding::binary) {
                    for (double d : {double(x), double(xp), K.grid.lag(k), v.real(), v.imag()}) detail::put_binary(out, d);
                } else {
                    out << x << ' ' << xp << ' ';
                    detail::put_text(out, K.grid.lag(k));
                    out << ' ';
                    detail::put_text(out, v.real());
                    out << ' ';
                    detail::put_text(out, v.imag());
                    out << '\n';
                }
            }
}

struct KernelFile {
    json header;
    StationaryKernel kernel;
};

inline KernelFile read_kernel(const std::filesystem::path& file)
{
    auto [h, in] = detail::open_in(file, "rqed-kernel");
    const auto [g, s] = detail::grid_from_json(h.at("grid"));
    KernelFile kf{h, StationaryKernel(g, s)};
    const bool bin = h.at("encoding") == "binary";
    const size_t records = h.at("records").get<size_t>();
    if (records != kf.kernel.values.size()) throw shape_error(file.string() + ": record count does not match the grid");
    auto get = [&] { return bin ? detail::get_binary(in, file) : detail::get_text(in, file); };
    for (size_t r = 0; r < records; ++r) {
        const int x = static_cast<int>(get()), xp = static_cast<int>(get());
        const double lag = get(), re = get(), im = get();
        if (x < 0 || xp < 0 || x >= s.size() || xp >= s.size()) throw shape_error(file.string() + ": site index out of range");
        kf.kernel(x, xp, static_cast<int>(std::lround(lag / g.dt))) = {re, im};
    }
    return kf;
}

// ---------------------------------------------------------------------------------------------
// Cumulant files: one block per file, dense row-major tensor over the point set.

inline std::string block_tag(const std::vector<int>& counts)
{
    std::string t;
    for (int c : counts) t += std::to_string(c);
    return t;
}

inline void write_cumulant_block(const std::filesystem::path& file, const CumulantSet& Q, const std::vector<int>& counts, Encoding enc)
{
    const cvec* blk = Q.find(counts);
    if (!blk) throw config_error("cumulant block " + block_tag(counts) + " is absent");
    int m = 0, n = 0;
    for (int f = 0; f < Q.schema.size(); ++f) (Q.schema.response[f] ? m : n) += counts[f];
    std::vector<std::array<int, 2>> pts;
    for (int p = 0; p < Q.P(); ++p) pts.push_back({Q.points.site[p], Q.points.k[p]});
    const char* kinds[] = {"bare", "dressed", "moment"};
    const bool narrow = Q.schema == FieldSchema::narrow(), merged = Q.schema == FieldSchema::merged();
    const json h{{"format", "rqed-cumulant"},
                 {"m", m},
                 {"n", n},
                 {"band", merged ? "merged" : narrow ? "narrow" : "broad"},
                 {"kind", kinds[static_cast<int>(Q.kind)]},
                 {"fields", Q.schema.names},
                 {"response", Q.schema.response},
                 {"block", counts},
                 {"grid", detail::grid_json(Q.points.grid, Q.points.sites)},
                 {"points", pts},
                 {"encoding", to_string(enc)},
                 {"entries", blk->size()}};
    auto out = detail::open_out(file);
    out << h.dump() << '\n';
    for (cplx v : *blk) {
        if (enc == Encoding::binary) {
            detail::put_binary(out, v.real());
            detail::put_binary(out, v.imag());
        } else {
            detail::put_text(out, v.real());
            out << ' ';
            detail::put_text(out, v.imag());
            out << '\n';
        }
    }
}

// Writes every block of a set as <stem>_<counts>.rqc and returns the paths.
inline std::vector<std::filesystem::path> write_cumulant_set(const std::filesystem::path& dir, const std::string& stem,
                                                             const CumulantSet& Q, const OutputSpec& o)
{
    std::vector<std::filesystem::path> files;
    for (auto& [counts, blk] : Q.blocks) {
        files.push_back(dir / (stem + "_" + block_tag(counts) + ".rqc"));
        write_cumulant_block(files.back(), Q, counts, choose_encoding(o, blk.size()));
    }
    return files;
}

// Reads blocks written from one set back into a CumulantSet.
inline CumulantSet read_cumulant_set(const std::vector<std::filesystem::path>& files)
{
    CumulantSet Q;
    bool first = true;
    for (auto& file : files) {
        auto [h, in] = detail::open_in(file, "rqed-cumulant");
        const FieldSchema schema{h.at("fields").get<std::vector<std::string>>(), h.at("response").get<std::vector<bool>>()};
        const auto [g, s] = detail::grid_from_json(h.at("grid"));
        PointSet P{g, s, {}, {}};
        for (auto& p : h.at("points")) {
            P.site.push_back(p[0].get<int>());
            P.k.push_back(p[1].get<int>());
        }
        const std::string kind = h.at("kind");
        if (first) {
            Q.schema = schema;
            Q.points = P;
            Q.kind = kind == "bare" ? CumulantKind::bare : kind == "dressed" ? CumulantKind::dressed : CumulantKind::moment;
            first = false;
        } else if (!(schema == Q.schema) || P.site != Q.points.site || P.k != Q.points.k || !(g == Q.points.grid)) {
            throw config_error(file.string() + ": block belongs to a different cumulant set");
        }
        const auto counts = h.at("block").get<std::vector<int>>();
        if (static_cast<int>(counts.size()) != schema.size()) throw shape_error(file.string() + ": block counts do not match the fields");
        cvec& blk = Q.block(counts);
        if (h.at("entries").get<size_t>() != blk.size()) throw shape_error(file.string() + ": entry count does not match the block");
        const bool bin = h.at("encoding") == "binary";
        for (auto& v : blk) {
            const double re = bin ? detail::get_binary(in, file) : detail::get_text(in, file);
            const double im = bin ? detail::get_binary(in, file) : detail::get_text(in, file);
            v = {re, im};
        }
    }
    return Q;
}

// ---------------------------------------------------------------------------------------------
// Tables and manifest.

// Columns: time, then re and im of every named signal, one block per site.
inline void write_signal_table(const std::filesystem::path& file, const std::vector<std::pair<std::string, const Signal*>>& cols,
                               int k_end = -1)
{
    if (cols.empty()) return;
    const Signal& ref = *cols.front().second;
    if (k_end < 0) k_end = ref.n();
    auto out = detail::open_out(file);
    for (int x = 0; x < ref.m(); ++x) {
        out << "# site " << ref.sites.labels[x] << "\n# t";
        for (auto& [name, s] : cols) out << ' ' << name << ".re " << name << ".im";
        out << '\n';
        for (int k = 0; k < k_end; ++k) {
            detail::put_text(out, ref.grid.time(k));
            for (auto& [name, s] : cols) {
                out << ' ';
                detail::put_text(out, (*s)(x, k).real());
                out << ' ';
                detail::put_text(out, (*s)(x, k).imag());
            }
            out << '\n';
        }
        out << "\n\n";
    }
}

inline json report_json(const Report& r)
{
    json checks = json::array();
    for (auto& c : r.checks) checks.push_back({{"name", c.name}, {"deviation", c.deviation}, {"tolerance", c.tolerance}, {"pass", c.pass()}});
    return checks;
}

inline constexpr const char* rqed_version = "1.0.0";

// Manifest with scenario hash, seed, versions and deviations. It holds no timestamps, so reruns are bit-identical.
inline json make_manifest(const Scenario& sc, const std::string& command, const std::string& profile, const Report& r,
                          const std::vector<std::filesystem::path>& artifacts)
{
    json files = json::array();
    for (auto& a : artifacts) files.push_back(a.filename().string());
    return {{"command", command},
            {"scenario_hash", hex64(sc.hash())},
            {"seed", sc.seed},
            {"versions", {{"rqed", rqed_version}, {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION)}, {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
            {"tolerance_profile", profile},
            {"budgets", sc.budgets.to_json()},
            {"warnings", sc.warnings},
            {"checks", report_json(r)},
            {"max_deviation", r.max_deviation()},
            {"pass", r.pass()},
            {"artifacts", files}};
}

inline void write_json(const std::filesystem::path& file, const json& j)
{
    auto out = detail::open_out(file);
    out << j.dump(2) << '\n';
}

} // namespace rqed
