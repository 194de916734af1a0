#pragma once
#include "wick.hpp"

namespace rqed {

struct BroadSkeleton {
    Signal plus, minus;
};
struct BroadCausal {
    Signal response; // eta or zeta
    Signal source;   // j_e or a_e
};

// eta_pm = j_e/hbar +- eta^(-+); the same map serves (zeta, a_e).
inline BroadSkeleton broad_substitute(const Signal& eta, const Signal& j_e, double hbar = 1.0)
{
    require_same(eta.grid, j_e.grid, eta.sites, j_e.sites);
    const Signal base = (1.0 / hbar) * j_e;
    return {base + negative_part(eta), base - positive_part(eta)};
}

inline BroadCausal broad_invert(const BroadSkeleton& s, double hbar = 1.0)
{
    return {s.plus - s.minus, hbar * (positive_part(s.plus) + negative_part(s.minus))};
}

// Narrow causal variables. Bars are independent in the duplicated phase space and equal to
// complex conjugates in the plain one.
struct NarrowCausal {
    Signal mu, mubar, d, dbar;
    Signal nu, nubar, e, ebar;
    Signal nu_p, nubar_p, e_p, ebar_p; // primed auxiliaries of the field line

    static NarrowCausal plain(const Signal& mu, const Signal& d, const Signal& nu, const Signal& e, const Signal& nu_p,
                              const Signal& e_p)
    {
        return {mu, conj(mu), d, conj(d), nu, conj(nu), e, conj(e), nu_p, conj(nu_p), e_p, conj(e_p)};
    }
    double plain_defect() const
    {
        return std::max({max_abs_diff(mubar, conj(mu)), max_abs_diff(dbar, conj(d)), max_abs_diff(nubar, conj(nu)),
                         max_abs_diff(ebar, conj(e)), max_abs_diff(nubar_p, conj(nu_p)),
                         max_abs_diff(ebar_p, conj(e_p))});
    }
};

struct NarrowSkeleton {
    Signal mu_p, mubar_p, mu_m, mubar_m;
    Signal nu_p, nubar_p, nu_m, nubar_m;
    Signal E_p, Ebar_p, E_m, Ebar_m;

    // mubar_pm = mu_mp*, nubar_pm = nu_mp*, Ebar_pm = E_mp*
    double plain_defect() const
    {
        return std::max({max_abs_diff(mubar_p, conj(mu_m)), max_abs_diff(mubar_m, conj(mu_p)),
                         max_abs_diff(nubar_p, conj(nu_m)), max_abs_diff(nubar_m, conj(nu_p)),
                         max_abs_diff(Ebar_p, conj(E_m)), max_abs_diff(Ebar_m, conj(E_p))});
    }
};

inline NarrowSkeleton narrow_substitute(const NarrowCausal& c, double hbar = 1.0, bool plain = true, double tol = 1e-12)
{
    if (plain && c.plain_defect() > tol) throw config_error("narrow causal arguments violate the conjugation constraints");
    const double ih = 1.0 / hbar;
    NarrowSkeleton s;
    s.mu_p = ih * c.d;
    s.mubar_p = c.mubar + ih * c.dbar;
    s.mubar_m = ih * c.dbar;
    s.mu_m = c.mu + ih * c.d;
    s.nu_p = ih * c.e;
    s.nubar_p = c.nubar + ih * c.ebar;
    s.nubar_m = ih * c.ebar;
    s.nu_m = c.nu + ih * c.e;
    s.E_p = c.e_p;
    s.Ebar_p = hbar * c.nubar_p + c.ebar_p;
    s.Ebar_m = c.ebar_p;
    s.E_m = hbar * c.nu_p + c.e_p;
    return s;
}

inline NarrowCausal narrow_invert(const NarrowSkeleton& s, double hbar = 1.0)
{
    NarrowCausal c;
    c.d = hbar * s.mu_p;
    c.dbar = hbar * s.mubar_m;
    c.mu = s.mu_m - s.mu_p;
    c.mubar = s.mubar_p - s.mubar_m;
    c.e = hbar * s.nu_p;
    c.ebar = hbar * s.nubar_m;
    c.nu = s.nu_m - s.nu_p;
    c.nubar = s.nubar_p - s.nubar_m;
    c.e_p = s.E_p;
    c.ebar_p = s.Ebar_m;
    c.nu_p = (1.0 / hbar) * (s.E_m - s.E_p);
    c.nubar_p = (1.0 / hbar) * (s.Ebar_p - s.Ebar_m);
    return c;
}

// Linear exponent i(eta+ + J_e/hbar) A+ - i(eta- + J_e/hbar) A- with A_pm = a' +- hbar zeta'^(-+).
inline cplx linear_exponent_skeleton(const BroadSkeleton& eta, const Signal& J_e, const BroadSkeleton& A, double hbar = 1.0)
{
    const Signal Jh = (1.0 / hbar) * J_e;
    return I * contract_scalar(eta.plus + Jh, A.plus) - I * contract_scalar(eta.minus + Jh, A.minus);
}
// Its causal value i[eta a' + zeta'(j_e + J_e)].
inline cplx linear_exponent_causal(const Signal& eta, const Signal& j_e, const Signal& J_e, const Signal& a_p,
                                   const Signal& zeta_p)
{
    return I * (contract_scalar(eta, a_p) + contract_scalar(zeta_p, j_e + J_e));
}

// A_pm = a' +- hbar zeta'^(-+)
inline BroadSkeleton field_substitute(const Signal& zeta_p, const Signal& a_p, double hbar = 1.0)
{
    return broad_substitute(hbar * zeta_p, hbar * a_p, hbar);
}

// Symbol-level checks of the reordering-form transforms on a battery of test arguments.
//   broad:  Z_C(a+, a-) = -i hbar (a+ + a-) D_R (a+^(+) - a-^(-))
//   narrow: Z_C(a+, b+, a-, b-) = -i hbar (a+ + a-) G_R b+ + i hbar (b+ + b-) G_R* a-
// plus the value identities for the vacuum exponents under substitution.
inline Report transform_reordering_form(const KernelFamily& f, const std::vector<Signal>& battery, double hbar = 1.0,
                                        double tol = 1e-10)
{
    Report r;
    const int nb = static_cast<int>(battery.size());
    double dev_form = 0.0, dev_value = 0.0, scale = 1e-300;
    for (int i = 0; i < nb; ++i) {
        const Signal& x = battery[i];
        const Signal& y = battery[(i + 1) % nb];
        const Signal& z = battery[(i + 2) % nb];
        const Signal& w = battery[(i + 3) % nb];
        if (f.band == Band::broad) {
            const cplx lhs = broad_reordering_form(f, x, y, hbar);
            const cplx rhs = -I * hbar * contract_kernel(x + y, f.retarded, positive_part(x) - negative_part(y));
            dev_form = std::max(dev_form, std::abs(lhs - rhs));
            scale = std::max(scale, std::abs(lhs));
            auto s = broad_substitute(x, y, hbar);
            const cplx zc = broad_reordering_form(f, I * s.plus, -I * s.minus, hbar);
            dev_value = std::max(dev_value, std::abs(zc - I * contract_kernel(x, f.retarded, y)));
        } else {
            const cplx lhs = narrow_reordering_form(f, x, y, z, w, hbar);
            const cplx rhs = -I * hbar * contract_kernel(x + z, f.retarded, y) + I * hbar * contract_kernel(y + w, conj(f.retarded), z);
            dev_form = std::max(dev_form, std::abs(lhs - rhs));
            scale = std::max(scale, std::abs(lhs));
            // duplicated phase space: mu, mubar, d, dbar independent
            NarrowCausal c{x, z, y, w, x, x, x, x, x, x, x, x};
            auto s = narrow_substitute(c, hbar, false);
            const cplx zc = narrow_reordering_form(f, I * s.mubar_p, I * s.mu_p, -I * s.mubar_m, -I * s.mu_m, hbar);
            const cplx cv = I * contract_kernel(c.mubar, f.retarded, c.d) - I * contract_kernel(c.mu, conj(f.retarded), c.dbar);
            dev_value = std::max(dev_value, std::abs(zc - cv));
        }
    }
    const std::string b = to_string(f.band);
    r.add(b + " reordering form in causal derivatives", dev_form, tol * std::max(1.0, scale));
    r.add(b + " vacuum exponent under substitution", dev_value, tol * std::max(1.0, scale));
    return r;
}

// E = G_R d_e, or Ebar = G_R* dbar_e for the conjugate branch.
inline Signal emit_retarded_field(const Signal& source, const KernelFamily& f, bool conjugate_branch = false)
{
    return apply_kernel_left(conjugate_branch ? conj(f.retarded) : f.retarded, source);
}

} // namespace rqed
