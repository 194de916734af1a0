#pragma once
#include <random>

#include "normal_modes.hpp"
#include "rwa.hpp"
#include "wick.hpp"

namespace rqed {

inline Report prefixed(const Report& r, const std::string& p)
{
    Report out;
    for (auto& c : r.checks) out.add(p + ": " + c.name, c.deviation, c.tolerance);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Kernel identities: definitions, contraction transforms and wave quantisation, both bands.

inline Report kernel_suite(const std::vector<ModeSet>& sets, const TimeGrid& g, const SiteSet& s, double tol = 1e-10,
                           double hbar = 1.0)
{
    Report r;
    for (auto& m : sets) {
        const std::string b = to_string(m.band);
        const auto f = build_kernel_family(m, g, s);
        r.merge(prefixed(verify_kernel_properties(f, tol), b));
        r.merge(prefixed(verify_contraction_transform(f, tol), b));
        // cutoff 1 keeps only the vacuum row, which is all a c-number commutator needs
        r.merge(verify_wave_quantisation(m, g, s, f, 1, hbar, tol));
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Frequency split on seeded random batteries.

inline Report freq_suite(const TimeGrid& g, const SiteSet& s, int count, std::uint64_t seed, double tol = 1e-12)
{
    double comp = 0, idem = 0, orth = 0, ann = 0, pars = 0;
    for (int i = 0; i < count; ++i) {
        const Signal f = random_signal(g, s, seed + 2 * i, Spectrum::interior);
        const Signal h = random_signal(g, s, seed + 2 * i + 1, Spectrum::interior);
        const Signal ff = random_signal(g, s, seed + 2 * i + 7919, Spectrum::full);
        const Signal fp = positive_part(f), fm = negative_part(f), hp = positive_part(h), hm = negative_part(h);
        const double sf = std::sqrt(std::abs(contract_scalar(f, conj(f)))), sh = std::sqrt(std::abs(contract_scalar(h, conj(h))));
        const double fmax = std::max(max_abs(f.values), max_abs(ff.values));
        comp = std::max(comp, max_abs_diff(positive_part(ff) + negative_part(ff), ff) / fmax);
        idem = std::max({idem, max_abs_diff(positive_part(fp), fp) / fmax, max_abs_diff(negative_part(fm), fm) / fmax});
        orth = std::max(orth, std::abs(contract_scalar(fp, conj(hm))) / (sf * sh));
        ann = std::max({ann, std::abs(contract_scalar(fp, hp)) / (sf * sh), std::abs(contract_scalar(fm, hm)) / (sf * sh)});
        const double sff = std::sqrt(std::abs(contract_scalar(ff, conj(ff))));
        pars = std::max({pars, std::abs(contract_scalar(f, h) - frequency_pairing(f, h)) / (sf * sh),
                         std::abs(contract_scalar(ff, h) - frequency_pairing(ff, h)) / (sff * sh)});
    }
    Report r;
    r.add("completeness f+ + f- = f", comp, tol);
    r.add("idempotence", idem, tol);
    r.add("orthogonality of f+ and g-", orth, tol);
    r.add("annihilation of f+ g+ and f- g-", ann, tol);
    r.add("Parseval pairing", pars, tol);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Causal Wick theorem: pairing sums against the operator oracle over every branch pattern.

inline Report wick_suite(const ModeSet& modes, const TimeGrid& g, const SiteSet& s, int max_factors, double hbar,
                         std::uint64_t seed, double tol = 1e-11, long budget = 4096)
{
    const bool narrow = modes.band == Band::narrow;
    const auto fam = build_kernel_family(modes, g, s);
    const WickKernels wk{narrow ? nullptr : &fam, narrow ? &fam : nullptr, hbar};
    std::mt19937_64 rng(seed);
    Report r;
    for (int n = 2; n <= max_factors; n += 2) {
        FockSpace fs(s, narrow ? std::nullopt : std::optional<ModeSet>(modes), narrow ? std::optional<ModeSet>(modes) : std::nullopt,
                     n, {}, hbar, budget);
        std::vector<std::vector<OrderedFactor>> cases;
        std::vector<int> ks(n);
        std::iota(ks.begin(), ks.end(), 1);
        std::shuffle(ks.begin(), ks.end(), rng);
        const int stride = std::max(1, (g.n / 2 - 1) / (n + 1));
        for (auto& k : ks) k = stride * k;
        const int ops = narrow ? (1 << n) : 1;
        for (int branches = 0; branches < (1 << n); ++branches)
            for (int opmask = 0; opmask < ops; ++opmask) {
                std::vector<OrderedFactor> f;
                for (int i = 0; i < n; ++i) {
                    const Op op = narrow ? ((opmask >> i) & 1 ? Op::Edag : Op::E) : Op::A;
                    f.push_back({op, i % s.size(), ks[i], (branches >> i) & 1 ? Branch::minus : Branch::plus});
                }
                cases.push_back(std::move(f));
            }
        r.merge(prefixed(verify_wick(fs, g, wk, cases, tol), std::string(to_string(modes.band)) + " " + std::to_string(n) + " factors"));
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Response transformation round trips and reordering forms on spike and random batteries.

inline std::vector<Signal> test_battery(const TimeGrid& g, const SiteSet& s, int random_count, std::uint64_t seed)
{
    std::vector<Signal> b;
    for (int x = 0; x < s.size(); ++x)
        for (int k : {1, g.n / 5, g.n / 3}) b.push_back(Signal::spike(g, s, x, k, 1.0 / g.dt));
    for (int i = 0; i < random_count; ++i) b.push_back(random_signal(g, s, seed + i, Spectrum::full));
    return b;
}

inline Report transform_suite(const KernelFamily& broad, const KernelFamily& narrow, std::uint64_t seed, double hbar = 1.0,
                              double tol_round = 1e-12, double tol_form = 1e-10)
{
    const TimeGrid& g = broad.plus.grid;
    const SiteSet& s = broad.plus.sites;
    const auto bat = test_battery(g, s, 6, seed);
    double broad_rt = 0.0, narrow_rt = 0.0, narrow_constraints = 0.0;
    for (size_t i = 0; i < bat.size(); ++i) {
        const Signal& x = bat[i];
        const Signal& y = bat[(i + 1) % bat.size()];
        const double sc = std::max({1.0, max_abs(x.values), max_abs(y.values)});
        const auto back = broad_invert(broad_substitute(x, y, hbar), hbar);
        broad_rt = std::max({broad_rt, max_abs_diff(back.response, x) / sc, max_abs_diff(back.source, y) / sc});
        const auto c = NarrowCausal::plain(x, y, bat[(i + 2) % bat.size()], bat[(i + 3) % bat.size()],
                                           bat[(i + 4) % bat.size()], bat[(i + 5) % bat.size()]);
        const auto sk = narrow_substitute(c, hbar);
        narrow_constraints = std::max(narrow_constraints, sk.plain_defect() / sc);
        const auto nb = narrow_invert(sk, hbar);
        for (auto [a, b] : {std::pair{&nb.mu, &c.mu}, {&nb.d, &c.d}, {&nb.nu, &c.nu}, {&nb.e, &c.e}, {&nb.nu_p, &c.nu_p},
                            {&nb.e_p, &c.e_p}, {&nb.mubar, &c.mubar}, {&nb.ebar_p, &c.ebar_p}})
            narrow_rt = std::max(narrow_rt, max_abs_diff(*a, *b) / sc);
        narrow_constraints = std::max(narrow_constraints, nb.plain_defect() / sc);
    }
    Report r;
    r.add("broad substitute then invert", broad_rt, tol_round);
    r.add("narrow substitute then invert", narrow_rt, tol_round);
    r.add("narrow conjugation constraints preserved", narrow_constraints, tol_round);
    r.merge(transform_reordering_form(broad, bat, hbar, tol_form));
    r.merge(transform_reordering_form(narrow, bat, hbar, tol_form));
    return r;
}

// ---------------------------------------------------------------------------------------------
// Vacuum functionals two ways: skeleton reordering form against the causal closed form.

inline Report vacuum_suite(const KernelFamily& broad, const KernelFamily& narrow, std::uint64_t seed, double hbar = 1.0,
                           double tol = 1e-10, double amplitude = 0.3)
{
    const TimeGrid& g = broad.plus.grid;
    const SiteSet& s = broad.plus.sites;
    auto rnd = [&](int k, bool real) { return amplitude * random_signal(g, s, seed + k, Spectrum::full, real); };
    double db = 0.0, dn = 0.0;
    for (int t = 0; t < 4; ++t) {
        const Signal eta = I * rnd(10 * t, true), j = rnd(10 * t + 1, true);
        const auto sk = broad_substitute(eta, j, hbar);
        const cplx a = vacuum_broad_skeleton(broad, sk.plus, sk.minus, hbar), b = vacuum_broad_causal(broad, eta, j);
        db = std::max(db, std::abs(a - b) / std::max(1.0, std::abs(b)));
        const Signal mu = rnd(10 * t + 2, false), d = rnd(10 * t + 3, false);
        const auto c = NarrowCausal::plain(mu, d, mu, d, mu, d);
        const auto ns = narrow_substitute(c, hbar);
        const cplx na = vacuum_narrow_skeleton(narrow, ns.mubar_p, ns.mu_p, ns.mubar_m, ns.mu_m, hbar);
        const cplx nb = vacuum_narrow_causal(narrow, c.mu, c.mubar, c.d, c.dbar);
        dn = std::max(dn, std::abs(na - nb) / std::max(1.0, std::abs(nb)));
    }
    Report r;
    r.add("broad vacuum functional skeleton vs causal", db, tol);
    r.add("narrow vacuum functional skeleton vs causal", dn, tol);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Dressing cross-validation between the diagram engine and the functional oracle.

inline cvec random_symmetric_block(const std::vector<int>& counts, int P, std::mt19937_64& rng, double scale)
{
    std::normal_distribution<double> nd;
    cvec t(CumulantSet::block_size(counts, P));
    for (auto& v : t) v = scale * cplx(nd(rng), nd(rng));
    symmetrize_block(t, counts, P);
    return t;
}

inline CumulantSet synthetic_bare_cumulants(const PointSet& pts, std::uint64_t seed, double s11 = 1.0, double s13 = 0.7,
                                            double s22 = 0.5)
{
    std::mt19937_64 rng(seed);
    CumulantSet Q{FieldSchema::broad(), pts, CumulantKind::bare, {}};
    Q.block(1, 1) = random_symmetric_block({1, 1}, pts.size(), rng, s11);
    Q.block(1, 3) = random_symmetric_block({1, 3}, pts.size(), rng, s13);
    Q.block(2, 2) = random_symmetric_block({2, 2}, pts.size(), rng, s22);
    return Q;
}

inline double block_deviation(const cvec& a, const cvec* b)
{
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - (b ? (*b)[i] : cplx(0.0))));
    return d;
}

struct DressingComparison {
    Report report;
    DressingResult oracle;
    std::map<std::vector<int>, cvec> diagrams; // summed over orders
};

inline DressingComparison dressing_compare(const CumulantSet& bare, const std::vector<cvec>& K, int order,
                                           const std::vector<VertexType>& types,
                                           const std::vector<std::pair<int, int>>& blocks, double tol = 1e-10)
{
    int mm = 0, nn = 0;
    for (auto [m, n] : blocks) {
        mm = std::max(mm, m);
        nn = std::max(nn, n);
    }
    DressingComparison out;
    out.oracle = dress_functional_oracle(bare, DressingOperator::broad(bare.schema, K), order, {mm, nn});
    for (auto [m, n] : blocks) {
        double dev = 0.0;
        cvec total(CumulantSet::block_size({m, n}, bare.P()), 0.0);
        for (int k = 0; k <= order; ++k) {
            const cvec t = diagram_sum(bare, K, types, m, n, k);
            dev = std::max(dev, block_deviation(t, out.oracle.orders[k].find(m, n)));
            for (size_t i = 0; i < t.size(); ++i) total[i] += t[i];
        }
        out.diagrams[{m, n}] = total;
        out.report.add("diagrams vs oracle block (" + std::to_string(m) + "," + std::to_string(n) + ")", dev, tol);
    }
    return out;
}

// Disconnected diagrams must be absent from cumulants and present in moments.
inline Report mayer_check(const CumulantSet& bare, const std::vector<cvec>& K, int order, const std::vector<VertexType>& types,
                          double tol = 1e-10)
{
    const auto op = DressingOperator::broad(bare.schema, K);
    const auto mom = dress_functional_oracle(bare, op, order, {2, 3}, true);
    const auto cum = dress_functional_oracle(bare, op, order, {2, 3});
    double dm = 0.0, dc = 0.0, gap = 0.0;
    for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 1}, {2, 2}, {1, 3}, {2, 3}})
        for (int k = 0; k <= order; ++k) {
            const cvec all = diagram_sum(bare, K, types, m, n, k, false);
            const cvec conn = diagram_sum(bare, K, types, m, n, k, true);
            dm = std::max(dm, block_deviation(all, mom.orders[k].find(m, n)));
            dc = std::max(dc, block_deviation(conn, cum.orders[k].find(m, n)));
            gap = std::max(gap, block_deviation(all, &conn));
        }
    Report r;
    r.add("moments equal all diagrams", dm, tol);
    r.add("cumulants equal connected diagrams", dc, tol);
    r.add("disconnected diagrams contribute to moments", gap > 1e-6 ? 0.0 : 1.0, 0.5);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Convergence helpers.

struct ConvergenceStudy {
    std::vector<double> dt;
    std::vector<double> error;      // raw error against the reference at each dt
    double extrapolated_error = 0.0; // Richardson from the two finest levels
    double last_ratio() const { return error.size() < 2 ? 0.0 : error[error.size() - 2] / error.back(); }
};

// ---------------------------------------------------------------------------------------------
// Gaussian end to end: oscillator device coupled to broad modes.

struct GaussianScenario {
    SiteSet sites;
    ModeSet modes = ModeSet::single(Band::broad, 1.0);
    DeviceModel device;
    double hbar = 1.0;
    double window = 10.0; // compared interval [0, window); the grid period is twice this
    int cutoff = 6;
    // negligible at both window edges, so endpoint quadrature weights do not matter
    std::function<double(double)> drive = [](double t) { return 0.05 * std::exp(-std::pow(t - 4.5, 2)) * std::cos(1.1 * t); };

    GaussianScenario()
    {
        device.kind = DeviceKind::oscillator;
        device.omega = 1.4;
        device.cutoff = 6;
        device.current = {0.3};
    }
    TimeGrid grid(int n_window) const { return TimeGrid::periodic(2.0 * window, 2 * n_window); }
};

struct GaussianLevel {
    Mat q11;          // chain-resummed dressed Q11 on the window
    Signal field;     // solution_from_dressed mean field
    Signal oracle;    // Fock-oracle <A>
    std::vector<cplx> commutator; // Fock-oracle retarded current commutator at probe pairs
};

inline GaussianLevel gaussian_level(const GaussianScenario& sc, int n_window,
                                    const std::vector<std::pair<double, double>>& probes)
{
    const TimeGrid g = sc.grid(n_window);
    const PointSet P = PointSet::window(g, sc.sites, 0, n_window);
    const auto fam = build_kernel_family(sc.modes, g, sc.sites);
    const CumulantSet bare = extract_bare_cumulants(sc.device, P, sc.hbar);
    const Mat Q = block_matrix(*bare.find(1, 1), P.size());
    GaussianLevel L;
    L.q11 = chain_resummed(Q, to_matrix(kernel_matrix(fam.retarded, P)), P);
    CumulantSet dressed = bare;
    dressed.kind = CumulantKind::dressed;
    cvec& blk = dressed.block(1, 1);
    for (int p = 0; p < P.size(); ++p)
        for (int q = 0; q < P.size(); ++q) blk[dressed.flat({p, q})] = L.q11(p, q);
    const Signal J = Signal::from_function(g, sc.sites, [&](int, double t) { return cplx(t < sc.window ? sc.drive(t) : 0.0); });
    const Signal zero(g, sc.sites);
    L.field = solution_from_dressed(dressed, fam, zero, J, zero, zero, 1).field;
    FockSpace fs(sc.sites, sc.modes, std::nullopt, sc.cutoff, sc.device, sc.hbar);
    Sources src;
    src.J_e = J;
    L.oracle = expectation_signal(fs, g, src, Op::A);
        for (auto [t, tp] : probes) {
        const int k = static_cast<int>(std::lround(t / g.dt)), kp = static_cast<int>(std::lround(tp / g.dt));
        const cplx ab = heisenberg_correlator(fs, g, {}, {{Op::J, 0, k, Branch::minus}, {Op::J, 0, kp, Branch::plus}});
        const cplx ba = heisenberg_correlator(fs, g, {}, {{Op::J, 0, kp, Branch::minus}, {Op::J, 0, k, Branch::plus}});
        L.commutator.push_back((I / sc.hbar) * (ab - ba));
    }
    return L;
}

struct GaussianReport {
    Report report;
    ConvergenceStudy q11, field, oracle, commutator;
};

// Levels n, 2n, 4n window points. Errors are sampled on the coarse points; Richardson combines the
// two finest levels as (4 X_fine - X_mid)/3.
inline GaussianReport gaussian_end_to_end(const GaussianScenario& sc, int n0 = 64, int levels = 3, double tol = 1e-6,
                                          double ratio_lo = 3.0, double ratio_hi = 5.0)
{
    const GaussianSystem gs(sc.sites, sc.modes, sc.device, sc.hbar);
    const std::vector<std::pair<double, double>> probes{{2.5, 0.625}, {5.0, 1.25}, {8.75, 5.0}};
    const TimeGrid g0 = sc.grid(n0);
    const auto exact = gs.mean_field(g0, [&](int, double t) { return t < sc.window ? sc.drive(t) : 0.0; }, nullptr, 8, 12);
    std::vector<GaussianLevel> L;
    for (int l = 0; l < levels; ++l) L.push_back(gaussian_level(sc, n0 << l, probes));

    auto q_at = [&](int l, int p, int q) { return L[l].q11(p << l, q << l); };
    auto f_at = [&](const Signal& s, int l, int k) { return s(0, k << l); };
    GaussianReport out;
    double q_scale = 0.0, f_scale = 0.0, c_scale = 0.0;
    for (int p = 0; p < n0; ++p) {
        for (int q = 0; q < n0; ++q) q_scale = std::max(q_scale, std::abs(gs.dressed_q11(0, 0, (p - q) * g0.dt)));
        f_scale = std::max(f_scale, std::abs(exact.field(0, p)));
    }
    for (auto [t, tp] : probes) c_scale = std::max(c_scale, std::abs(gs.dressed_q11(0, 0, t - tp)));

    auto study = [&](auto value_at, auto exact_at, int count, double scale, ConvergenceStudy& st) {
        for (int l = 0; l < levels; ++l) {
            double e = 0.0;
            for (int i = 0; i < count; ++i) e = std::max(e, std::abs(value_at(l, i) - exact_at(i)));
            st.dt.push_back(g0.dt / (1 << l));
            st.error.push_back(e / scale);
        }
        double e = 0.0;
        for (int i = 0; i < count; ++i) {
            const cplx r = (4.0 * value_at(levels - 1, i) - value_at(levels - 2, i)) / 3.0;
            e = std::max(e, std::abs(r - exact_at(i)));
        }
        st.extrapolated_error = e / scale;
    };
    study([&](int l, int i) { return q_at(l, i / n0, i % n0); },
          [&](int i) { return gs.dressed_q11(0, 0, (i / n0 - i % n0) * g0.dt); }, n0 * n0, q_scale, out.q11);
    study([&](int l, int i) { return f_at(L[l].field, l, i); }, [&](int i) { return exact.field(0, i); }, n0, f_scale, out.field);
    study([&](int l, int i) { return f_at(L[l].oracle, l, i); }, [&](int i) { return exact.field(0, i); }, n0, f_scale, out.oracle);
    study([&](int l, int i) { return L[l].commutator[i]; },
          [&](int i) { return gs.dressed_q11(0, 0, probes[i].first - probes[i].second); }, static_cast<int>(probes.size()),
          c_scale, out.commutator);

    for (auto [name, st] : {std::pair<const char*, ConvergenceStudy*>{"chain-resummed Q11 vs normal modes", &out.q11},
                            {"dressed mean field vs normal modes", &out.field},
                            {"Fock-oracle mean field vs normal modes", &out.oracle},
                            {"Fock-oracle current commutator vs dressed Q11", &out.commutator}}) {
        out.report.add(std::string(name) + " (extrapolated)", st->extrapolated_error, tol);
        const double r = st->last_ratio();
        out.report.add(std::string(name) + " dt-halving ratio " + std::to_string(r), std::abs(r - 4.0),
                       std::max(4.0 - ratio_lo, ratio_hi - 4.0));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Mean-field dressing identity on a nonlinear device from two oracle runs:
//   <A>_full[J_e, A_e] = D_R J_e + D_R <J>[A_e + D_R J_e]  (second run without J_e).

struct MeanFieldScenario {
    SiteSet sites;
    ModeSet modes;
    DeviceModel device;
    double hbar = 1.0;
    double window = 8.0;
    int cutoff = 4;
    std::function<double(double)> J_drive = [](double t) { return 0.05 * std::exp(-std::pow(t - 2.5, 2)) * std::cos(1.1 * t); };
    std::function<double(double)> A_drive = [](double t) { return 0.2 * std::exp(-std::pow(t - 3.5, 2) / 0.5) * std::sin(1.3 * t); };

    MeanFieldScenario()
    {
        modes.band = Band::broad;
        modes.omega = {1.0, 1.5};
        modes.u = {cvec{1.0}, cvec{0.7}};
        device.kind = DeviceKind::two_level;
        device.omega = 1.2;
        device.current = {0.3};
    }
    TimeGrid grid(int n_window) const { return TimeGrid::periodic(2.0 * window, 2 * n_window); }
};

inline std::pair<Signal, Signal> mean_field_identity_sides(const MeanFieldScenario& sc, int n_window)
{
    const TimeGrid g = sc.grid(n_window);
    const auto fam = build_kernel_family(sc.modes, g, sc.sites);
    auto gate = [&](const std::function<double(double)>& f) {
        return Signal::from_function(g, sc.sites, [&](int, double t) { return cplx(t < sc.window ? f(t) : 0.0); });
    };
    const Signal J = gate(sc.J_drive), A = gate(sc.A_drive);
    FockSpace fs(sc.sites, sc.modes, std::nullopt, sc.cutoff, sc.device, sc.hbar);
    Sources full;
    full.J_e = J;
    full.A_e = A;
    const Signal lhs = expectation_signal(fs, g, full, Op::A);
    Sources second;
    second.A_e = A + apply_kernel_left(fam.retarded, J);
    Signal cur = expectation_signal(fs, g, second, Op::J);
    for (int x = 0; x < cur.m(); ++x)
        for (int k = n_window; k < g.n; ++k) cur(x, k) = 0.0;
    const Signal rhs = apply_kernel_left(fam.retarded, J + cur);
    return {lhs, rhs};
}

struct MeanFieldReport {
    Report report;
    ConvergenceStudy study; // relative deviation between the two sides
};

inline MeanFieldReport mean_field_identity(const MeanFieldScenario& sc, const std::vector<int>& levels, double tol = 1e-4,
                                           double ratio_lo = 3.0, double ratio_hi = 5.0)
{
    MeanFieldReport out;
    for (int n : levels) {
        auto [lhs, rhs] = mean_field_identity_sides(sc, n);
        double d = 0.0, s = 1e-300;
        for (int x = 0; x < lhs.m(); ++x)
            for (int k = 0; k < n; ++k) {
                d = std::max(d, std::abs(lhs(x, k) - rhs(x, k)));
                s = std::max(s, std::abs(lhs(x, k)));
            }
        out.study.dt.push_back(sc.grid(n).dt);
        out.study.error.push_back(d / s);
    }
    out.report.add("two-run mean-field identity at finest dt", out.study.error.back(), tol);
    const double r = out.study.last_ratio();
    out.report.add("mean-field identity dt-halving ratio " + std::to_string(r), std::abs(r - 4.0),
                   std::max(4.0 - ratio_lo, ratio_hi - 4.0));
    return out;
}

// Solution formulas depend on the sources only through j_e + J_e and a_e + A_e.
inline Report consistency_check(std::uint64_t seed, double tol = 1e-12)
{
    TimeGrid g{0.0, 0.3, 16};
    const SiteSet s = SiteSet::uniform(1);
    const PointSet pts = PointSet::window(g, s, 0, 4);
    const CumulantSet Q = synthetic_bare_cumulants(pts, seed, 0.3, 0.2, 0.1);
    const auto fam = build_kernel_family(ModeSet::single(Band::broad, 1.0), g, s);
    auto sig = [&](int k) { return 0.2 * random_signal(g, s, seed + k, Spectrum::full, true); };
    SolutionArgs a;
    a.eta = sig(1);
    a.zeta = sig(2);
    a.j_e = sig(3);
    a.J_e = sig(4);
    a.a_e = sig(5);
    a.A_e = sig(6);
    SolutionArgs b = a;
    const Signal dj = sig(7), da = sig(8);
    b.j_e = *a.j_e + dj;
    b.J_e = *a.J_e - dj;
    b.a_e = *a.a_e - da;
    b.A_e = *a.A_e + da;
    const cplx va = solution_functional(Q, &fam, nullptr, a), vb = solution_functional(Q, &fam, nullptr, b);
    const auto ma = solution_from_dressed(Q, fam, *a.j_e, *a.J_e, *a.a_e, *a.A_e);
    const auto mb = solution_from_dressed(Q, fam, *b.j_e, *b.J_e, *b.a_e, *b.A_e);
    Report r;
    r.add("solution functional under source re-splitting", std::abs(va - vb) / std::max(1.0, std::abs(va)), tol);
    r.add("mean field under source re-splitting",
          std::max(max_abs_diff(ma.field, mb.field), max_abs_diff(ma.current, mb.current)), tol);
    return r;
}

// ---------------------------------------------------------------------------------------------
// S-matrix identities: Heisenberg products against S-matrix forms, convergence in dt.

struct SmatrixStudy {
    Report report;
    ConvergenceStudy plus, minus;
    double unitarity = 0.0;
};

inline SmatrixStudy smatrix_convergence(const std::vector<int>& levels, double period = 4.0 * std::numbers::pi,
                                        double tol_unitarity = 1e-10, double ratio_lo = 3.0, double ratio_hi = 5.0)
{
    SmatrixStudy out;
    SiteSet s;
    DeviceModel dev;
    dev.kind = DeviceKind::two_level;
    dev.omega = 1.2;
    dev.current = {0.3};
    for (int n : levels) {
        const auto g = TimeGrid::periodic(period, n);
        FockSpace fs(s, ModeSet::single(Band::broad, 1.0), std::nullopt, 3, dev);
        Sources src;
        src.J_e = Signal::from_function(g, s, [](int, double t) { return cplx(0.2 * std::sin(0.5 * t)); });
        const int q = n / 8;
        const auto r = verify_smatrix_identity(fs, g, src,
                                               {{Op::A, 0, 3 * q, Branch::plus},
                                                {Op::J, 0, q, Branch::plus},
                                                {Op::A, 0, 2 * q, Branch::minus},
                                                {Op::J, 0, 5 * q, Branch::minus}});
        out.plus.dt.push_back(g.dt);
        out.plus.error.push_back(r.plus_deviation);
        out.minus.dt.push_back(g.dt);
        out.minus.error.push_back(r.minus_deviation);
        out.unitarity = std::max(out.unitarity, r.unitarity);
    }
    const double tr = std::max(4.0 - ratio_lo, ratio_hi - 4.0);
    out.report.add("T+ product dt-halving ratio " + std::to_string(out.plus.last_ratio()), std::abs(out.plus.last_ratio() - 4.0), tr);
    out.report.add("T- product dt-halving ratio " + std::to_string(out.minus.last_ratio()), std::abs(out.minus.last_ratio() - 4.0), tr);
    out.report.add("unitarity defect", out.unitarity, tol_unitarity);
    return out;
}

// ---------------------------------------------------------------------------------------------
// RWA scaling criteria over one decade of bandwidth.

struct RwaStudy {
    Report report;
    std::vector<RwaScanPoint> points;
    double slope_kernel = 0, slope_bilinear = 0, slope_derivative = 0;
};

inline RwaStudy rwa_study(const RwaDesign& d, const std::vector<double>& bs, int threads = 1, double slope_tol = 0.2,
                          double exact_tol = 1e-12, bool extras = false)
{
    RwaStudy out;
    out.points = rwa_scan(d, bs, extras, extras, threads);
    std::vector<double> k, b, v;
    for (auto& p : out.points) {
        k.push_back(p.kernel_max);
        b.push_back(p.bilinear);
        v.push_back(p.derivative);
    }
    out.slope_kernel = loglog_slope(bs, k);
    out.slope_bilinear = loglog_slope(bs, b);
    out.slope_derivative = loglog_slope(bs, v);
    out.report.add("kernel resonance form slope " + std::to_string(out.slope_kernel), std::abs(out.slope_kernel - 1.0), slope_tol);
    out.report.add("bilinear form slope " + std::to_string(out.slope_bilinear), std::abs(out.slope_bilinear - 1.0), slope_tol);
    out.report.add("derivative form slope " + std::to_string(out.slope_derivative), std::abs(out.slope_derivative - 1.0), slope_tol);
    if (extras) {
        std::vector<double> dr, hz;
        for (auto& p : out.points) {
            dr.push_back(p.dressing);
            hz.push_back(p.heisenberg);
        }
        const double sd = loglog_slope(bs, dr), sh = loglog_slope(bs, hz);
        out.report.add("dressing pipelines slope " + std::to_string(sd), std::abs(sd - 1.0), slope_tol);
        out.report.add("Heisenberg envelope slope " + std::to_string(sh), std::abs(sh - 1.0), slope_tol);
    }
    const TimeGrid g = d.grid(bs.front());
    for (std::uint64_t seed : {1u, 2u, 3u})
        out.report.merge(rwa_exact_identities(g, SiteSet::uniform(2), d.omega0, seed, d.hbar, exact_tol));
    return out;
}

} // namespace rqed
