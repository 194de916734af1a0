#pragma once
#include "freq.hpp"
#include "report.hpp"

namespace rqed {

enum class Band { broad, narrow };

inline const char* to_string(Band b) { return b == Band::broad ? "broad" : "narrow"; }

struct ModeSet {
    Band band = Band::broad;
    std::vector<double> omega;
    std::vector<cvec> u; // u[kappa][x]
    double omega0 = 0.0;

    int size() const { return static_cast<int>(omega.size()); }

    void validate(const SiteSet& s) const
    {
        if (omega.size() != u.size()) throw config_error("mode table and frequency list differ in length");
        for (size_t k = 0; k < omega.size(); ++k) {
            if (!(omega[k] > 0.0)) throw config_error("mode frequencies must be positive");
            if (static_cast<int>(u[k].size()) != s.size()) throw config_error("mode function table has wrong site count");
        }
        if (band == Band::narrow && omega0 < 0.0) throw config_error("carrier frequency must be non-negative");
    }

    double bandwidth_ratio() const
    {
        if (omega0 <= 0.0) return 0.0;
        double b = 0.0;
        for (double w : omega) b = std::max(b, std::abs(w - omega0) / omega0);
        return b;
    }

    // Largest distance of a kernel frequency, in grid frequency units, from an integer.
    double commensurability_defect(const TimeGrid& g) const
    {
        double d = 0.0;
        for (double w : omega) {
            const double c = (band == Band::narrow ? w - omega0 : w) * g.period() / (2.0 * std::numbers::pi);
            d = std::max(d, std::abs(c - std::round(c)));
        }
        return d;
    }
    bool commensurate(const TimeGrid& g, double tol = 1e-9) const { return commensurability_defect(g) < tol; }

    static ModeSet single(Band band, double w, int sites = 1, double omega0 = 0.0)
    {
        ModeSet m;
        m.band = band;
        m.omega = {w};
        m.u = {cvec(sites, 1.0)};
        m.omega0 = omega0;
        return m;
    }
};

struct KernelFamily {
    Band band = Band::broad;
    double omega0 = 0.0;
    StationaryKernel plus;
    StationaryKernel retarded;
    StationaryKernel feynman;
};

inline StationaryKernel build_plus_kernel(const ModeSet& modes, const TimeGrid& g, const SiteSet& s)
{
    modes.validate(s);
    StationaryKernel K(g, s);
    for (int x = 0; x < s.size(); ++x)
        for (int xp = 0; xp < s.size(); ++xp)
            for (int k = 0; k < g.n; ++k) {
                const double tau = g.lag(k);
                cplx acc = 0.0;
                for (int q = 0; q < modes.size(); ++q) {
                    const double w = modes.omega[q];
                    const cplx uu = modes.u[q][x] * std::conj(modes.u[q][xp]);
                    if (modes.band == Band::broad)
                        acc += uu * std::exp(-I * w * tau) / (2.0 * w);
                    else
                        acc += uu * (w / 2.0) * std::exp(-I * (w - modes.omega0) * tau);
                }
                K(x, xp, k) = I * acc;
            }
    return K;
}

inline KernelFamily derive_kernel_family(const StationaryKernel& plus, Band band, double omega0 = 0.0)
{
    KernelFamily f;
    f.band = band;
    f.omega0 = omega0;
    f.plus = plus;
    if (band == Band::narrow) {
        f.retarded = theta_gate(plus);
        f.feynman = f.retarded;
    } else {
        const StationaryKernel back = reflect(plus);
        f.retarded = theta_gate(plus - back);
        f.feynman = theta_gate(plus) + theta_gate(back, false);
    }
    return f;
}

inline KernelFamily build_kernel_family(const ModeSet& modes, const TimeGrid& g, const SiteSet& s)
{
    return derive_kernel_family(build_plus_kernel(modes, g, s), modes.band, modes.omega0);
}

inline Report verify_contraction_transform(const KernelFamily& f, double tol = 1e-10)
{
    Report r;
    if (f.band == Band::broad) {
        const StationaryKernel rp = positive_part(f.retarded);
        const StationaryKernel rm = f.retarded - rp;
        r.add("feynman = R+(x,x',t) + R+(x',x,-t)", max_abs_diff(f.feynman, rp + reflect(rp)), tol);
        r.add("plus = R+(x,x',t) - R-(x',x,-t)", max_abs_diff(f.plus, rp - reflect(rm)), tol);
    } else {
        r.add("feynman = retarded", max_abs_diff(f.feynman, f.retarded), tol);
        r.add("plus = R(x,x',t) - R*(x',x,-t)", max_abs_diff(f.plus, f.retarded - conj(reflect(f.retarded))), tol);
    }
    return r;
}

// Structural properties of a family: definitions, causality, hermiticity, reality, positivity.
inline Report verify_kernel_properties(const KernelFamily& f, double tol = 1e-10)
{
    Report r;
    const auto& g = f.plus.grid;
    if (f.band == Band::broad) {
        const StationaryKernel back = reflect(f.plus);
        r.add("retarded definition", max_abs_diff(f.retarded, theta_gate(f.plus - back)), tol);
        r.add("feynman definition", max_abs_diff(f.feynman, theta_gate(f.plus) + theta_gate(back, false)), tol);
        double im = 0.0;
        for (auto& v : f.retarded.values) im = std::max(im, std::abs(v.imag()));
        r.add("retarded kernel is real", im, tol);
        r.add("plus kernel frequency-positive", max_abs_diff(positive_part(f.plus), f.plus), tol);
    } else {
        r.add("retarded definition", max_abs_diff(f.retarded, theta_gate(f.plus)), tol);
        auto shifted = modulate_lag(f.plus, [&](double tau) { return std::exp(-I * f.omega0 * tau); });
        r.add("carrier-shifted plus kernel frequency-positive", max_abs_diff(positive_part(shifted), shifted), tol);
    }
    r.add("plus kernel hermiticity", max_abs_diff(f.plus, -1.0 * conj(reflect(f.plus))), tol);
    double causal = 0.0;
    for (int x = 0; x < f.retarded.m(); ++x)
        for (int xp = 0; xp < f.retarded.m(); ++xp)
            for (int k = g.n / 2 + 1; k < g.n; ++k) causal = std::max(causal, std::abs(f.retarded(x, xp, k)));
    r.add("retarded kernel causal", causal, 0.0);
    return r;
}

} // namespace rqed
