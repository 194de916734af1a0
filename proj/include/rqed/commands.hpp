#pragma once
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "io.hpp"
#include "suites.hpp"

namespace rqed {

struct RunResult {
    Report report;
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> warnings;
};

struct RunOptions {
    std::filesystem::path out_dir = ".";
    int threads = 1;
};

namespace detail {

inline const ModeSet& require_broad(const Scenario& sc, const std::string& cmd)
{
    if (!sc.broad) throw config_error("missing field: modes.broad (required by " + cmd + ")");
    return *sc.broad;
}

inline void require_fock_budget(const Scenario& sc, long dim, const std::string& what)
{
    if (dim > sc.budgets.fock_dim)
        throw config_error("budget violation: " + what + " needs Fock dimension " + std::to_string(dim) + " > budgets.fock_dim " +
                           std::to_string(sc.budgets.fock_dim));
}

inline long ipow(long b, int e)
{
    long r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

} // namespace detail

// kernels: builds each kernel family, persists plus/retarded/Feynman tables and checks their identities.
inline RunResult run_kernels(const Scenario& sc, const RunOptions& opt)
{
    RunResult res;
    for (const auto* m : {&sc.broad, &sc.narrow}) {
        if (!*m) continue;
        const ModeSet& modes = **m;
        const std::string band = to_string(modes.band);
        const auto fam = build_kernel_family(modes, sc.grid, sc.sites);
        for (auto [kind, K] : {std::pair<const char*, const StationaryKernel*>{"plus", &fam.plus},
                               {"retarded", &fam.retarded},
                               {"feynman", &fam.feynman}}) {
            const auto file = opt.out_dir / ("kernel_" + band + "_" + kind + ".rqk");
            write_kernel(file, *K, kind, modes, choose_encoding(sc.output, K->values.size()));
            res.artifacts.push_back(file);
            res.report.add(band + " " + kind + " kernel file round trip", max_abs_diff(read_kernel(file).kernel, *K), 0.0);
        }
        res.report.merge(kernel_suite({modes}, sc.grid, sc.sites, sc.tol.kernel, sc.hbar));
    }
    return res;
}

// verify wick: pairing sums against the operator oracle for every branch pattern.
inline RunResult run_verify_wick(const Scenario& sc, const RunOptions&)
{
    RunResult res;
    const int factors = static_cast<int>(sc.budgets.wick_factors);
    for (const auto* m : {&sc.broad, &sc.narrow}) {
        if (!*m) continue;
        detail::require_fock_budget(sc, detail::ipow(factors + 1, (*m)->size()), "verify wick");
        res.report.merge(wick_suite(**m, sc.grid, sc.sites, factors, sc.hbar, sc.seed, sc.tol.wick, sc.budgets.fock_dim));
    }
    return res;
}

// verify transforms: substitution round trips, reordering forms and vacuum functionals.
inline RunResult run_verify_transforms(const Scenario& sc, const RunOptions&)
{
    if (!sc.broad || !sc.narrow) throw config_error("missing field: modes.broad and modes.narrow are both required by verify transforms");
    RunResult res;
    const auto b = build_kernel_family(*sc.broad, sc.grid, sc.sites);
    const auto n = build_kernel_family(*sc.narrow, sc.grid, sc.sites);
    res.report.merge(transform_suite(b, n, sc.seed, sc.hbar, sc.tol.round_trip, sc.tol.form));
    res.report.merge(vacuum_suite(b, n, sc.seed, sc.hbar, sc.tol.form));
    return res;
}

// dress: diagram engine against the functional oracle on a grid window; emits cumulant files and diagram listings.
inline RunResult run_dress(const Scenario& sc, const RunOptions& opt)
{
    const ModeSet& modes = detail::require_broad(sc, "dress");
    RunResult res;
    const PointSet P = PointSet::window(sc.grid, sc.sites, sc.dress.window_begin, sc.dress.window_count);
    CumulantSet bare;
    if (sc.dress.bare == "synthetic") {
        bare = synthetic_bare_cumulants(P, sc.seed);
    } else {
        if (!sc.device.has_current()) throw config_error("missing field: device.current (dress with bare = device)");
        bare = extract_bare_cumulants(sc.device, P, sc.hbar);
    }
    std::vector<VertexType> types;
    long degree = 0;
    for (auto& [counts, blk] : bare.blocks) {
        types.push_back({counts[0], counts[1]});
        degree = std::max<long>(degree, total_degree(counts));
    }
    for (auto [m, n] : sc.dress.blocks) {
        if (m < 0 || n < 0 || m + n < 1) throw config_error("field dress.blocks entries must be (m, n) with m + n >= 1");
        degree = std::max<long>(degree, m + n);
    }
    if (degree > sc.budgets.degree)
        throw config_error("budget violation: dressing needs tensor degree " + std::to_string(degree) + " > budgets.degree " +
                           std::to_string(sc.budgets.degree));
    const int order = static_cast<int>(sc.budgets.order);
    const auto K = kernel_matrix(build_kernel_family(modes, sc.grid, sc.sites).retarded, P);
    const auto cmp = dressing_compare(bare, K, order, types, sc.dress.blocks, sc.tol.dressing);
    res.report.merge(cmp.report);
    if (types.size() > 1) res.report.merge(mayer_check(bare, K, std::min(order, 2), types, sc.tol.dressing));

    CumulantSet dressed = cmp.oracle.total;
    dressed.kind = CumulantKind::dressed;
    const auto bare_files = write_cumulant_set(opt.out_dir, "bare", bare, sc.output);
    const auto dressed_files = write_cumulant_set(opt.out_dir, "dressed", dressed, sc.output);
    res.report.add("cumulant file round trip",
                   std::max(max_abs_diff(read_cumulant_set(bare_files), bare), max_abs_diff(read_cumulant_set(dressed_files), dressed)), 0.0);
    res.artifacts = bare_files;
    res.artifacts.insert(res.artifacts.end(), dressed_files.begin(), dressed_files.end());

    const auto listing = opt.out_dir / "diagrams.txt";
    std::ofstream os(listing);
    for (auto [m, n] : sc.dress.blocks)
        for (auto& d : enumerate_diagrams(types, m, n, order)) os << d.describe() << '\n';
    res.artifacts.push_back(listing);
    return res;
}

// moments: mean field from the chain-resummed dressed cumulants against the operator oracle on [0, window).
inline RunResult run_moments(const Scenario& sc, const RunOptions& opt)
{
    const ModeSet& modes = detail::require_broad(sc, "moments");
    if (!sc.device.has_current()) throw config_error("missing field: device.current (required by moments)");
    if (!sc.sources.J_e && !sc.sources.A_e) throw config_error("missing field: sources.J_e or sources.A_e (required by moments)");
    RunResult res;
    const TimeGrid& g = sc.grid;
    const double window = sc.moments.window > 0.0 ? sc.moments.window : 0.5 * g.period();
    if (window > 0.5 * g.period() + 1e-12 * g.period())
        res.warnings.push_back("moments window exceeds half the period; retarded kernels wrap around");
    int nw = 0;
    while (nw < g.n && g.time(nw) - g.t0 < window) ++nw;
    if (nw < 2) throw config_error("field moments.window holds fewer than two samples");
    detail::require_fock_budget(sc, sc.device.dim() * detail::ipow(sc.budgets.cutoff + 1, modes.size()), "moments");

    auto gate = [&](const std::optional<Signal>& s) {
        Signal f(g, sc.sites);
        if (s)
            for (int x = 0; x < f.m(); ++x)
                for (int k = 0; k < nw; ++k) f(x, k) = (*s)(x, k);
        return f;
    };
    const Signal J = gate(sc.sources.J_e), A = gate(sc.sources.A_e), zero(g, sc.sites);
    if ((sc.sources.J_e && max_abs_diff(J, *sc.sources.J_e) > 0.0) || (sc.sources.A_e && max_abs_diff(A, *sc.sources.A_e) > 0.0))
        res.warnings.push_back("sources were cut to the compared window");

    const PointSet P = PointSet::window(g, sc.sites, 0, nw);
    const auto fam = build_kernel_family(modes, g, sc.sites);
    const CumulantSet bare = extract_bare_cumulants(sc.device, P, sc.hbar);
    const Mat q11 = chain_resummed(block_matrix(*bare.find(1, 1), P.size()), to_matrix(kernel_matrix(fam.retarded, P)), P);
    CumulantSet dressed = bare;
    dressed.kind = CumulantKind::dressed;
    cvec& blk = dressed.block(1, 1);
    for (int p = 0; p < P.size(); ++p)
        for (int q = 0; q < P.size(); ++q) blk[dressed.flat({p, q})] = q11(p, q);
    const Signal field = solution_from_dressed(dressed, fam, zero, J, zero, A, 1).field;

    FockSpace fs(sc.sites, modes, std::nullopt, static_cast<int>(sc.budgets.cutoff), sc.device, sc.hbar, sc.budgets.fock_dim);
    Sources src;
    if (sc.sources.J_e) src.J_e = J;
    if (sc.sources.A_e) src.A_e = A;
    const Signal oracle = expectation_signal(fs, g, src, Op::A);

    double diff = 0.0, scale = 0.0;
    for (int x = 0; x < sc.sites.size(); ++x)
        for (int k = 0; k < nw; ++k) {
            diff = std::max(diff, std::abs(field(x, k) - oracle(x, k)));
            scale = std::max(scale, std::abs(oracle(x, k)));
        }
    res.report.add("mean field from dressed cumulants vs operator oracle (relative)", scale > 0.0 ? diff / scale : diff, sc.tol.moments);

    const auto table = opt.out_dir / "moments.tsv";
    write_signal_table(table, {{"dressed", &field}, {"oracle", &oracle}}, nw);
    res.artifacts = write_cumulant_set(opt.out_dir, "dressed", dressed, sc.output);
    res.artifacts.insert(res.artifacts.begin(), table);
    return res;
}

// rwa-scan: narrow-band deviations against bandwidth and the exact counter-rotating identities.
inline RunResult run_rwa_scan(const Scenario& sc, const RunOptions& opt)
{
    RunResult res;
    RwaDesign d;
    d.omega0 = sc.rwa.omega0;
    d.N = sc.rwa.periods;
    d.hbar = sc.hbar;
    for (double b : sc.rwa.bandwidths) {
        const double oob = out_of_band_fraction(d.tones(d.grid(b), b, 1, false), d.omega0);
        if (oob > 1e-3) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "b = %g: %.2e of the bilinear source power lies outside the band", b, oob);
            res.warnings.push_back(buf);
        }
    }
    const auto st = rwa_study(d, sc.rwa.bandwidths, opt.threads, sc.tol.rwa_slope, sc.tol.rwa_exact, sc.rwa.extras);
    res.report = st.report;
    const auto table = opt.out_dir / "rwa_scan.tsv";
    std::ofstream os(table);
    write_scan_tables(os, st.points);
    res.artifacts.push_back(table);
    return res;
}

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"kernels", "verify wick", "verify transforms", "dress", "moments", "rwa-scan"};
    return names;
}

inline RunResult run_command(const std::string& command, const Scenario& sc, const RunOptions& opt)
{
    if (command == "kernels") return run_kernels(sc, opt);
    if (command == "verify wick") return run_verify_wick(sc, opt);
    if (command == "verify transforms") return run_verify_transforms(sc, opt);
    if (command == "dress") return run_dress(sc, opt);
    if (command == "moments") return run_moments(sc, opt);
    if (command == "rwa-scan") return run_rwa_scan(sc, opt);
    throw config_error("unknown command: " + command);
}

} // namespace rqed
